#include "ltkv/engine.hpp"

#include "ltkv/error.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

namespace ltkv {

namespace {

inline void relax(unsigned i) {
    if (i < 64) {
#if defined(__x86_64__) || defined(__i386__)
        __builtin_ia32_pause();
#endif
    } else {
        std::this_thread::yield();
    }
}

inline bool same_hash(const std::uint8_t* a, const KeyHash& b) { return std::memcmp(a, b.bytes.data(), 32) == 0; }

KeyHash load_hash(const std::uint8_t* p) {
    KeyHash h;
    std::memcpy(h.bytes.data(), p, 32);
    return h;
}

std::size_t count_distinct(std::vector<KeyHash>& hs) {
    std::sort(hs.begin(), hs.end());
    return static_cast<std::size_t>(std::unique(hs.begin(), hs.end()) - hs.begin());
}

} // namespace

struct Engine::RecordView {
    Pin pin;
    const std::uint8_t* body = nullptr;

    const std::uint8_t* hkey() const { return body + record::kHkeyOff; }
    std::uint32_t key_size() const { return load_u32(body + record::kKeySizeOff); }
    std::uint32_t val_size() const { return load_u32(body + record::kValSizeOff); }
    std::uint64_t next() const { return atomic_load_u64(body + record::kNextOff); }
    std::string_view key() const {
        return {reinterpret_cast<const char*>(body + record::kHeaderSize), key_size()};
    }
    std::string_view value() const {
        return {reinterpret_cast<const char*>(body + record::kHeaderSize + key_size()), val_size()};
    }
    bool matches(const KeyHash& h, std::string_view k) const { return same_hash(hkey(), h) && key() == k; }
};

Engine::Engine(SpaceManager& spaces, DiskWorker& worker, const Params& params)
    : sm_(spaces), worker_(worker), p_(params), ta_(spaces, p_.layout), da_(spaces, params.cursor, params.scan_limit) {}

std::uint64_t Engine::create_root(SpaceManager&, TrieAllocator& ta, WriteSet& ws) { return ta.alloc(ws, kNullAddress); }

EngineCounters Engine::counters() const {
    EngineCounters c;
    c.single_writes = single_writes_.load(std::memory_order_relaxed);
    c.batch_writes = batch_writes_.load(std::memory_order_relaxed);
    c.batch_retries = batch_retries_.load(std::memory_order_relaxed);
    c.batch_locks = batch_locks_.load(std::memory_order_relaxed);
    c.splits = splits_.load(std::memory_order_relaxed);
    c.merges = merges_.load(std::memory_order_relaxed);
    return c;
}

std::uint64_t Engine::max_value_size(std::size_t key_size) const {
    const std::uint64_t room = DataAllocator::max_body(sm_.region_size()) - record::kHeaderSize;
    return key_size >= room ? 0 : room - key_size;
}

void Engine::check_sizes(std::string_view key, std::string_view value) const {
    if (key.empty())
        throw Error(ErrorCode::invalid_argument, "key must not be empty");
    if (key.size() + value.size() + record::kHeaderSize > DataAllocator::max_body(sm_.region_size()))
        throw Error(ErrorCode::invalid_argument, "key and value exceed the region capacity");
}

void Engine::check_healthy() const {
    if (poisoned_.load(std::memory_order_acquire))
        throw Error(ErrorCode::io_error, "store is unusable after a failed write; reopen it");
}

void Engine::poison(const char*) { poisoned_.store(true, std::memory_order_release); }

// ---------------------------------------------------------------- primitives

NodeRef Engine::node(std::uint64_t addr) { return NodeRef(sm_.pin(SpaceId::trie, addr, p_.layout.size), addr, &p_.layout); }

UpgradableLock& Engine::lock_of(const NodeRef& n) {
    return sm_.lock_table(n.pin()).get(sm_.lock_slot_index(n.addr()), n.lock_slot());
}

Engine::Held Engine::acquire(std::uint64_t addr, unsigned depth, Mode mode) {
    Held h;
    h.node = node(addr);
    h.lock = &lock_of(h.node);
    switch (mode) {
    case Mode::shared: h.lock->lock_shared(); break;
    case Mode::upgradable: h.lock->lock_upgradable(); break;
    case Mode::write: h.lock->lock(); break;
    case Mode::none: break;
    }
    h.mode = mode;
    h.depth = depth;
    return h;
}

void Engine::release(Held& h) {
    switch (h.mode) {
    case Mode::shared: h.lock->unlock_shared(); break;
    case Mode::upgradable: h.lock->unlock_upgradable(); break;
    case Mode::write: h.lock->unlock(); break;
    case Mode::none: break;
    }
    h.mode = Mode::none;
    h.node = NodeRef();
}

namespace {
// Releases a lock set on scope exit.
template <class Vec, class Fn>
struct ReleaseAll {
    Vec& v;
    Fn fn;
    ~ReleaseAll() {
        for (auto& h : v)
            fn(h);
    }
};
template <class Vec, class Fn>
ReleaseAll(Vec&, Fn) -> ReleaseAll<Vec, Fn>;
} // namespace

Engine::RecordView Engine::record(std::uint64_t addr) {
    RecordView v;
    v.pin = sm_.pin(SpaceId::data, addr, 8 + record::kHeaderSize);
    v.body = v.pin.at(addr) + 8;
    return v;
}

std::uint64_t Engine::new_record(WriteSet& ws, const KeyHash& h, std::string_view key, std::string_view value,
                                 std::uint64_t next) {
    const std::uint64_t body = record::kHeaderSize + key.size() + value.size();
    const std::uint64_t addr = da_.alloc(ws, body);
    std::vector<std::uint8_t> buf(body);
    std::memcpy(buf.data(), h.bytes.data(), 32);
    store_u32(buf.data() + record::kKeySizeOff, static_cast<std::uint32_t>(key.size()));
    store_u32(buf.data() + record::kValSizeOff, static_cast<std::uint32_t>(value.size()));
    store_u64(buf.data() + record::kNextOff, next);
    std::memcpy(buf.data() + record::kHeaderSize, key.data(), key.size());
    std::memcpy(buf.data() + record::kHeaderSize + key.size(), value.data(), value.size());
    sm_.write(ws, SpaceId::data, addr + 8, buf.data(), buf.size());
    return addr;
}

void Engine::set_next(WriteSet& ws, std::uint64_t rec, std::uint64_t next) {
    const std::uint64_t off = rec + 8 + record::kNextOff;
    if (sm_.read_u64(SpaceId::data, off) != next)
        sm_.write_u64(ws, SpaceId::data, off, next);
}

void Engine::set_slot(WriteSet& ws, const NodeRef& n, unsigned c, std::uint64_t child, bool data) {
    const NodeLayout& l = p_.layout;
    if (!n.has(c) || n.child(c) != child)
        sm_.write_u64(ws, SpaceId::trie, n.addr() + l.child_off(c), child);
    const unsigned w = c / 64;
    const std::uint64_t bit = std::uint64_t{1} << (c % 64);
    const std::uint64_t chd = n.mask_word(NodeLayout::kChdOff, w);
    const std::uint64_t dat = n.mask_word(l.data_off(), w);
    const std::uint64_t new_dat = data ? dat | bit : dat & ~bit;
    if (new_dat != dat)
        sm_.write_u64(ws, SpaceId::trie, n.addr() + l.data_off() + 8 * w, new_dat);
    if (!(chd & bit))
        sm_.write_u64(ws, SpaceId::trie, n.addr() + NodeLayout::kChdOff + 8 * w, chd | bit);
}

void Engine::clear_slot(WriteSet& ws, const NodeRef& n, unsigned c) {
    const NodeLayout& l = p_.layout;
    const unsigned w = c / 64;
    const std::uint64_t bit = std::uint64_t{1} << (c % 64);
    const std::uint64_t chd = n.mask_word(NodeLayout::kChdOff, w);
    const std::uint64_t dat = n.mask_word(l.data_off(), w);
    if (chd & bit)
        sm_.write_u64(ws, SpaceId::trie, n.addr() + NodeLayout::kChdOff + 8 * w, chd & ~bit);
    if (dat & bit)
        sm_.write_u64(ws, SpaceId::trie, n.addr() + l.data_off() + 8 * w, dat & ~bit);
}

void Engine::free_node(WriteSet& ws, const NodeRef& n) {
    lock_of(n).bump_generation();
    ta_.free(ws, n.addr());
    merges_.fetch_add(1, std::memory_order_relaxed);
}

// ---------------------------------------------------------------- algorithms

bool Engine::chain_contains(const NodeRef& n, unsigned c, const KeyHash& h, std::string_view key) {
    if (!n.has(c) || !n.is_data(c))
        return false;
    for (std::uint64_t a = n.child(c); a != kNullAddress;) {
        RecordView v = record(a);
        if (v.matches(h, key))
            return true;
        a = v.next();
    }
    return false;
}

bool Engine::insert_at(WriteSet& ws, const NodeRef& n, unsigned depth, const KeyHash& h, std::string_view key,
                       std::string_view value) {
    const unsigned c = char_of(h, depth);
    if (!n.has(c)) {
        set_slot(ws, n, c, new_record(ws, h, key, value, kNullAddress), true);
        return false;
    }
    if (!n.is_data(c))
        throw Error(ErrorCode::corruption, "insert endpoint slot holds a tree node");

    const std::uint64_t head = n.child(c);
    std::uint64_t prev = kNullAddress;
    std::vector<std::pair<std::uint64_t, KeyHash>> chain;
    for (std::uint64_t a = head; a != kNullAddress;) {
        RecordView v = record(a);
        if (v.matches(h, key)) {
            const std::uint64_t capacity = da_.body_capacity(a) - record::kHeaderSize - key.size();
            if (value.size() <= capacity) {
                const auto vs = static_cast<std::uint32_t>(value.size());
                sm_.write(ws, SpaceId::data, a + 8 + record::kValSizeOff, &vs, 4);
                sm_.write(ws, SpaceId::data, a + 8 + record::kHeaderSize + key.size(), value.data(), value.size());
            } else {
                const std::uint64_t fresh = new_record(ws, h, key, value, v.next());
                if (prev == kNullAddress)
                    set_slot(ws, n, c, fresh, true);
                else
                    set_next(ws, prev, fresh);
                v = RecordView();
                da_.free(ws, a);
            }
            return true;
        }
        chain.emplace_back(a, load_hash(v.hkey()));
        prev = a;
        a = v.next();
    }

    std::vector<KeyHash> hs;
    hs.reserve(chain.size() + 1);
    for (const auto& r : chain)
        hs.push_back(r.second);
    hs.push_back(h);
    if (count_distinct(hs) <= p_.sluggishness) {
        set_slot(ws, n, c, new_record(ws, h, key, value, head), true);
        return false;
    }
    // Too many distinct hashes under this slot: replace the chain by a subtree.
    chain.emplace_back(new_record(ws, h, key, value, kNullAddress), h);
    const std::uint64_t sub = build_subtree(ws, chain, depth + 1, n.addr());
    set_slot(ws, n, c, sub, false);
    splits_.fetch_add(1, std::memory_order_relaxed);
    return false;
}

std::uint64_t Engine::build_subtree(WriteSet& ws, std::vector<std::pair<std::uint64_t, KeyHash>>& recs,
                                    unsigned depth, std::uint64_t parent) {
    const NodeLayout& l = p_.layout;
    const std::uint64_t addr = ta_.alloc(ws, parent);
    std::stable_sort(recs.begin(), recs.end(), [&](const auto& a, const auto& b) {
        return char_of(a.second, depth) < char_of(b.second, depth);
    });
    std::vector<std::uint64_t> masks(2 * l.mask_words(), 0);
    std::size_t i = 0;
    while (i < recs.size()) {
        const unsigned c = char_of(recs[i].second, depth);
        std::size_t j = i + 1;
        while (j < recs.size() && char_of(recs[j].second, depth) == c)
            ++j;
        std::vector<KeyHash> hs;
        for (std::size_t k = i; k < j; ++k)
            hs.push_back(recs[k].second);
        const std::uint64_t bit = std::uint64_t{1} << (c % 64);
        masks[c / 64] |= bit;
        std::uint64_t child;
        if (count_distinct(hs) > p_.sluggishness && depth + 1 < max_depth(l.b)) {
            std::vector<std::pair<std::uint64_t, KeyHash>> group(recs.begin() + i, recs.begin() + j);
            child = build_subtree(ws, group, depth + 1, addr);
        } else {
            for (std::size_t k = i; k < j; ++k)
                set_next(ws, recs[k].first, k + 1 < j ? recs[k + 1].first : kNullAddress);
            child = recs[i].first;
            masks[l.mask_words() + c / 64] |= bit;
        }
        sm_.write_u64(ws, SpaceId::trie, addr + l.child_off(c), child);
        i = j;
    }
    sm_.write(ws, SpaceId::trie, addr + NodeLayout::kChdOff, masks.data(), masks.size() * 8);
    return addr;
}

bool Engine::delete_at(WriteSet& ws, const std::vector<NodeRef*>& path, const KeyHash& h, std::string_view key) {
    const NodeRef& n = *path.back();
    const unsigned c = char_of(h, static_cast<unsigned>(path.size() - 1));
    if (!n.has(c) || !n.is_data(c))
        return false;
    std::uint64_t prev = kNullAddress;
    std::uint64_t a = n.child(c);
    std::uint64_t next = kNullAddress;
    while (a != kNullAddress) {
        RecordView v = record(a);
        if (v.matches(h, key)) {
            next = v.next();
            break;
        }
        prev = a;
        a = v.next();
    }
    if (a == kNullAddress)
        return false;
    if (prev != kNullAddress)
        set_next(ws, prev, next);
    else if (next != kNullAddress)
        set_slot(ws, n, c, next, true);
    else
        clear_slot(ws, n, c);
    da_.free(ws, a);
    if (prev == kNullAddress && next == kNullAddress)
        merge_up(ws, path, h);
    return true;
}

void Engine::merge_up(WriteSet& ws, const std::vector<NodeRef*>& path, const KeyHash& h) {
    const NodeLayout& l = p_.layout;
    for (std::size_t i = path.size() - 1; i > 0; --i) {
        const NodeRef& nd = *path[i];
        const NodeRef& parent = *path[i - 1];
        const unsigned pc = char_of(h, static_cast<unsigned>(i - 1));
        const unsigned count = nd.child_count();
        if (count == 0) {
            clear_slot(ws, parent, pc);
            free_node(ws, nd);
            continue;
        }
        if (count == 1) {
            unsigned only = 0;
            for (unsigned w = 0; w < l.mask_words(); ++w) {
                const std::uint64_t m = nd.mask_word(NodeLayout::kChdOff, w);
                if (m) {
                    only = w * 64 + static_cast<unsigned>(std::countr_zero(m));
                    break;
                }
            }
            if (nd.is_data(only)) {
                set_slot(ws, parent, pc, nd.child(only), true);
                free_node(ws, nd);
                continue;
            }
        }
        break;
    }
}

void Engine::walk_unlocked(const KeyHash& h, std::vector<NodeRef>& path) {
    path.clear();
    path.push_back(node(p_.root));
    for (unsigned depth = 0;; ++depth) {
        const NodeRef& n = path.back();
        const unsigned c = char_of(h, depth);
        if (!n.has(c) || n.is_data(c))
            return;
        const std::uint64_t child = n.child(c);
        path.push_back(node(child));
    }
}

// ---------------------------------------------------------------- operations

std::optional<std::string> Engine::get(std::string_view key) {
    const KeyHash h = hash(key);
    Held cur = acquire(p_.root, 0, Mode::shared);
    try {
        for (;;) {
            const unsigned c = char_of(h, cur.depth);
            if (!cur.node.has(c)) {
                release(cur);
                return std::nullopt;
            }
            if (cur.node.is_data(c)) {
                for (std::uint64_t a = cur.node.child(c); a != kNullAddress;) {
                    RecordView v = record(a);
                    if (v.matches(h, key)) {
                        std::string out(v.value());
                        release(cur);
                        return out;
                    }
                    a = v.next();
                }
                release(cur);
                return std::nullopt;
            }
            Held next = acquire(cur.node.child(c), cur.depth + 1, Mode::shared);
            release(cur);
            cur = std::move(next);
        }
    } catch (...) {
        release(cur);
        throw;
    }
}

bool Engine::put(std::string_view key, std::string_view value) {
    check_healthy();
    check_sizes(key, value);
    const KeyHash h = hash(key);
    Held cur = acquire(p_.root, 0, Mode::upgradable);
    std::uint64_t ticket = 0;
    bool existed = false;
    try {
        for (;;) {
            const unsigned c = char_of(h, cur.depth);
            if (!cur.node.has(c) || cur.node.is_data(c))
                break;
            // This node stays as it is; let readers back in before moving on.
            cur.lock->downgrade_to_shared();
            cur.mode = Mode::shared;
            Held next = acquire(cur.node.child(c), cur.depth + 1, Mode::upgradable);
            release(cur);
            cur = std::move(next);
        }
        cur.lock->upgrade();
        cur.mode = Mode::write;
        {
            std::scoped_lock spaces(trie_mu_, data_mu_);
            WriteSet ws;
            try {
                existed = insert_at(ws, cur.node, cur.depth, h, key, value);
                ticket = worker_.submit(ws);
            } catch (...) {
                poison("put");
                throw;
            }
            ws.release_pins();
        }
        release(cur);
    } catch (...) {
        release(cur);
        throw;
    }
    single_writes_.fetch_add(1, std::memory_order_relaxed);
    worker_.wait(ticket);
    return existed;
}

bool Engine::remove(std::string_view key) {
    check_healthy();
    const KeyHash h = hash(key);
    std::vector<Held> path;
    ReleaseAll guard{path, [](Held& x) { release(x); }};
    path.push_back(acquire(p_.root, 0, Mode::write));
    for (;;) {
        const Held& cur = path.back();
        const unsigned c = char_of(h, cur.depth);
        if (!cur.node.has(c) || cur.node.is_data(c))
            break;
        path.push_back(acquire(cur.node.child(c), cur.depth + 1, Mode::write));
    }
    const unsigned c = char_of(h, path.back().depth);
    if (!chain_contains(path.back().node, c, h, key))
        return false;
    std::vector<NodeRef*> refs;
    for (Held& x : path)
        refs.push_back(&x.node);
    std::uint64_t ticket = 0;
    {
        std::scoped_lock spaces(trie_mu_, data_mu_);
        WriteSet ws;
        try {
            delete_at(ws, refs, h, key);
            ticket = worker_.submit(ws);
        } catch (...) {
            poison("delete");
            throw;
        }
        ws.release_pins();
    }
    for (Held& x : path)
        release(x);
    single_writes_.fetch_add(1, std::memory_order_relaxed);
    worker_.wait(ticket);
    return true;
}

std::vector<bool> Engine::write(const std::vector<BatchOp>& ops) {
    if (ops.empty())
        return {};
    if (ops.size() == 1) {
        const BatchOp& op = ops[0];
        return {op.kind == BatchOp::put ? put(op.key, op.value) : remove(op.key)};
    }
    check_healthy();
    std::vector<KeyHash> hashes;
    hashes.reserve(ops.size());
    for (const BatchOp& op : ops) {
        if (op.kind == BatchOp::put)
            check_sizes(op.key, op.value);
        hashes.push_back(hash(op.key));
    }

    using clock = std::chrono::steady_clock;
    std::vector<std::vector<std::uint64_t>> expected(ops.size());
    std::vector<Target> targets;
    std::vector<Held> locked;
    std::vector<NodeRef> path;
    for (;;) {
        targets.clear();
        locked.clear();
        bool ok = true;
        {
            std::lock_guard global(batch_mu_);
            // Phase 1: find the nodes each op will modify.
            for (std::size_t i = 0; i < ops.size(); ++i) {
                const KeyHash& h = hashes[i];
                const bool whole_path = ops[i].kind == BatchOp::del;
                expected[i].clear();
                Held cur = acquire(p_.root, 0, Mode::shared);
                for (;;) {
                    const unsigned c = char_of(h, cur.depth);
                    const bool descend = cur.node.has(c) && !cur.node.is_data(c);
                    if (whole_path || !descend) {
                        targets.push_back(Target{cur.node.addr(), cur.depth, cur.lock->generation(), node(cur.node.addr())});
                        expected[i].push_back(cur.node.addr());
                    }
                    if (!descend)
                        break;
                    Held next = acquire(cur.node.child(c), cur.depth + 1, Mode::shared);
                    release(cur);
                    cur = std::move(next);
                }
                release(cur);
            }
            std::sort(targets.begin(), targets.end(), [](const Target& a, const Target& b) {
                return a.depth != b.depth ? a.depth < b.depth : a.addr < b.addr;
            });
            targets.erase(std::unique(targets.begin(), targets.end(),
                                      [](const Target& a, const Target& b) { return a.addr == b.addr; }),
                          targets.end());
            for (Target& t : targets) {
                UpgradableLock& lk = lock_of(t.node);
                const auto deadline = clock::now() + std::chrono::milliseconds(100);
                unsigned spins = 0;
                while (!lk.try_lock()) {
                    if (clock::now() > deadline) {
                        ok = false;
                        break;
                    }
                    relax(spins++);
                }
                if (!ok)
                    break;
                Held hd;
                hd.node = node(t.addr);
                hd.lock = &lk;
                hd.mode = Mode::write;
                hd.depth = t.depth;
                locked.push_back(std::move(hd));
            }
        }
        ReleaseAll guard{locked, [](Held& x) { release(x); }};
        // Validate: nothing we depend on was freed, recycled, or split between
        // the read walk and the write locks.
        for (std::size_t k = 0; ok && k < targets.size(); ++k)
            ok = lock_of(targets[k].node).generation() == targets[k].generation;
        for (std::size_t i = 0; ok && i < ops.size(); ++i) {
            walk_unlocked(hashes[i], path);
            if (ops[i].kind == BatchOp::put) {
                ok = path.back().addr() == expected[i].back();
            } else {
                ok = path.size() == expected[i].size();
                for (std::size_t k = 0; ok && k < path.size(); ++k)
                    ok = path[k].addr() == expected[i][k];
            }
        }
        if (!ok) {
            batch_retries_.fetch_add(1, std::memory_order_relaxed);
            continue;
        }
        batch_locks_.fetch_add(locked.size(), std::memory_order_relaxed);

        // Phase 2: every op under one write set, one log record.
        std::vector<bool> results(ops.size());
        std::uint64_t ticket = 0;
        {
            std::scoped_lock spaces(trie_mu_, data_mu_);
            WriteSet ws;
            try {
                std::vector<NodeRef*> refs;
                for (std::size_t i = 0; i < ops.size(); ++i) {
                    walk_unlocked(hashes[i], path);
                    if (ops[i].kind == BatchOp::put) {
                        results[i] = insert_at(ws, path.back(), static_cast<unsigned>(path.size() - 1), hashes[i],
                                               ops[i].key, ops[i].value);
                    } else {
                        refs.clear();
                        for (NodeRef& r : path)
                            refs.push_back(&r);
                        results[i] = delete_at(ws, refs, hashes[i], ops[i].key);
                    }
                }
                ticket = worker_.submit(ws);
            } catch (...) {
                poison("batch");
                throw;
            }
            ws.release_pins();
        }
        for (Held& x : locked)
            release(x);
        batch_writes_.fetch_add(1, std::memory_order_relaxed);
        worker_.wait(ticket);
        return results;
    }
}

// ---------------------------------------------------------------- walks

void Engine::scan_walk(Held& h, const std::function<void(std::string_view, std::string_view)>& fn) {
    const NodeLayout& l = p_.layout;
    for (unsigned w = 0; w < l.mask_words(); ++w) {
        std::uint64_t m = h.node.mask_word(NodeLayout::kChdOff, w);
        while (m) {
            const unsigned c = w * 64 + static_cast<unsigned>(std::countr_zero(m));
            m &= m - 1;
            if (h.node.is_data(c)) {
                for (std::uint64_t a = h.node.child(c); a != kNullAddress;) {
                    RecordView v = record(a);
                    fn(v.key(), v.value());
                    a = v.next();
                }
            } else {
                Held child = acquire(h.node.child(c), h.depth + 1, Mode::shared);
                try {
                    scan_walk(child, fn);
                } catch (...) {
                    release(child);
                    throw;
                }
                release(child);
            }
        }
    }
}

void Engine::scan(const std::function<void(std::string_view, std::string_view)>& fn) {
    Held root = acquire(p_.root, 0, Mode::shared);
    try {
        scan_walk(root, fn);
    } catch (...) {
        release(root);
        throw;
    }
    release(root);
}

void Engine::stats_walk(Held& h, TreeStats& st, std::vector<unsigned>& prefix) {
    const NodeLayout& l = p_.layout;
    auto violation = [&](const std::string& what) {
        if (st.violations++ == 0)
            st.first_violation = what;
    };
    ++st.nodes;
    for (unsigned w = 0; w < l.mask_words(); ++w) {
        std::uint64_t m = h.node.mask_word(NodeLayout::kChdOff, w);
        if (h.node.mask_word(l.data_off(), w) & ~m)
            violation("data mask not a subset of child mask at node " + std::to_string(h.node.addr()));
        while (m) {
            const unsigned c = w * 64 + static_cast<unsigned>(std::countr_zero(m));
            m &= m - 1;
            ++st.used_slots;
            prefix.push_back(c);
            if (h.node.is_data(c)) {
                ++st.chains;
                std::vector<KeyHash> hs;
                for (std::uint64_t a = h.node.child(c); a != kNullAddress;) {
                    if (a >= sm_.tail(SpaceId::data)) {
                        violation("record link outside data space");
                        break;
                    }
                    RecordView v = record(a);
                    const KeyHash hk = load_hash(v.hkey());
                    for (unsigned i = 0; i < prefix.size(); ++i)
                        if (char_of(hk, i) != prefix[i]) {
                            violation("record at " + std::to_string(a) + " breaks prefix consistency");
                            break;
                        }
                    hs.push_back(hk);
                    ++st.records;
                    st.path_length_sum += h.depth + 1;
                    st.max_path_length = std::max<std::uint64_t>(st.max_path_length, h.depth + 1);
                    st.user_bytes += v.key_size() + v.val_size();
                    st.record_bytes += envelope::size_of(sm_.read_u64(SpaceId::data, a));
                    a = v.next();
                }
                const std::uint64_t distinct = count_distinct(hs);
                st.max_chain_distinct = std::max(st.max_chain_distinct, distinct);
                if (distinct > p_.sluggishness)
                    violation("chain with " + std::to_string(distinct) + " distinct hashes");
            } else {
                const std::uint64_t child_addr = h.node.child(c);
                if (child_addr >= sm_.tail(SpaceId::trie) || child_addr < header::kSize) {
                    violation("tree link outside trie space");
                } else {
                    Held child = acquire(child_addr, h.depth + 1, Mode::shared);
                    try {
                        if (child.node.parent() != h.node.addr())
                            violation("parent link mismatch at node " + std::to_string(child_addr));
                        stats_walk(child, st, prefix);
                    } catch (...) {
                        release(child);
                        throw;
                    }
                    release(child);
                }
            }
            prefix.pop_back();
        }
    }
}

TreeStats Engine::tree_stats() {
    TreeStats st;
    std::vector<unsigned> prefix;
    Held root = acquire(p_.root, 0, Mode::shared);
    try {
        stats_walk(root, st, prefix);
    } catch (...) {
        release(root);
        throw;
    }
    release(root);
    return st;
}

} // namespace ltkv
