#include "ltkv/store.hpp"

#include "ltkv/crc32c.hpp"
#include "ltkv/error.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <filesystem>

namespace fs = std::filesystem;

namespace ltkv {

namespace {

struct Header {
    StoreConfig cfg;
    HashSeed seed;
    std::uint64_t root = kNullAddress;
    std::uint64_t cursor = 0;
    std::array<std::uint64_t, kSpaceCount> tails{};
};

void encode_fixed(const Header& h, std::uint8_t* page) {
    store_u64(page + header::kMagicOff, header::kMagic);
    store_u32(page + header::kVersionOff, header::kFormatVersion);
    store_u32(page + header::kBranchingOff, h.cfg.branching_factor);
    store_u32(page + header::kSluggishOff, h.cfg.sluggishness);
    store_u32(page + header::kRegionBitsOff, h.cfg.region_size_bits);
    store_u32(page + header::kChunkSizeOff, h.cfg.wal_chunk_size);
    store_u32(page + header::kHashKindOff, static_cast<std::uint32_t>(h.cfg.hash));
    std::memcpy(page + header::kSeedOff, h.seed.bytes.data(), 32);
    store_u32(page + header::kChecksumOff, crc32c(page, header::kChecksumOff));
}

Header decode_header(const std::uint8_t* page) {
    if (load_u64(page + header::kMagicOff) != header::kMagic)
        throw Error(ErrorCode::corruption, "reserved header has a bad magic number");
    if (load_u32(page + header::kChecksumOff) != crc32c(page, header::kChecksumOff))
        throw Error(ErrorCode::corruption, "reserved header checksum mismatch");
    if (load_u32(page + header::kVersionOff) != header::kFormatVersion)
        throw Error(ErrorCode::corruption, "unsupported format version");
    Header h;
    h.cfg.branching_factor = load_u32(page + header::kBranchingOff);
    h.cfg.sluggishness = load_u32(page + header::kSluggishOff);
    h.cfg.region_size_bits = load_u32(page + header::kRegionBitsOff);
    h.cfg.wal_chunk_size = load_u32(page + header::kChunkSizeOff);
    h.cfg.hash = static_cast<HashKind>(load_u32(page + header::kHashKindOff));
    std::memcpy(h.seed.bytes.data(), page + header::kSeedOff, 32);
    h.root = load_u64(page + header::kRootOff);
    h.cursor = load_u64(page + header::kCursorOff);
    for (std::size_t i = 0; i < kSpaceCount; ++i)
        h.tails[i] = load_u64(page + header::kTailsOff + 8 * i);
    try {
        h.cfg.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::corruption, std::string("reserved header holds an invalid config: ") + e.what());
    }
    return h;
}

Header read_header(SegmentSet& files) {
    std::vector<std::uint8_t> page(header::kSize);
    files[SpaceId::trie].read(0, page.data(), page.size());
    return decode_header(page.data());
}

int take_lock(const std::string& dir) {
    const std::string path = dir + "/LOCK";
    int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0)
        throw_errno("open " + path);
    if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
        const int err = errno;
        ::close(fd);
        if (err == EWOULDBLOCK)
            throw Error(ErrorCode::locked, "store is already open: " + dir);
        throw_errno("lock " + path, err);
    }
    return fd;
}

} // namespace

std::unique_ptr<Store> Store::create(const std::string& dir, const StoreConfig& config) {
    config.validate();
    std::error_code ec;
    if (fs::exists(dir, ec)) {
        if (!fs::is_directory(dir, ec))
            throw Error(ErrorCode::already_exists, "not a directory: " + dir);
        if (!fs::is_empty(dir, ec))
            throw Error(ErrorCode::already_exists, "directory is not empty: " + dir);
    } else if (!fs::create_directories(dir, ec) && ec) {
        throw Error(ErrorCode::io_error, "cannot create " + dir + ": " + ec.message());
    }
    const int lock_fd = take_lock(dir);
    try {
        const bool sync = config.durability == Durability::fsync;
        const NodeLayout layout = NodeLayout::for_branching(config.branching_factor);
        Header h;
        h.cfg = config;
        h.seed = HashSeed::random();
        h.root = header::kSize;
        h.cursor = 0;
        h.tails = {header::kSize + layout.size, 0, 0, 0};

        std::vector<std::uint8_t> page(header::kSize + layout.size, 0);
        encode_fixed(h, page.data());
        store_u64(page.data() + header::kRootOff, h.root);
        store_u64(page.data() + header::kCursorOff, h.cursor);
        for (std::size_t i = 0; i < kSpaceCount; ++i)
            store_u64(page.data() + header::kTailsOff + 8 * i, h.tails[i]);
        store_u64(page.data() + h.root + NodeLayout::kParentOff, kNullAddress);

        SegmentSet files(dir);
        files[SpaceId::trie].write(0, page.data(), page.size());
        for (std::size_t i = 0; i < kSpaceCount; ++i)
            files[static_cast<SpaceId>(i)].ensure_size(h.tails[i], config.region_size());
        if (sync)
            for (std::size_t i = 0; i < kSpaceCount; ++i)
                files[static_cast<SpaceId>(i)].sync();
        { wal::LogFile log(dir, 0); }
        wal::write_meta(dir, wal::Meta{0, 1}, sync);
    } catch (...) {
        ::close(lock_fd);
        throw;
    }
    ::close(lock_fd);
    return open(dir, config);
}

std::unique_ptr<Store> Store::open(const std::string& dir, const StoreConfig& runtime) {
    if (!fs::exists(dir + "/trie-0.seg"))
        throw Error(ErrorCode::not_found, "no store in " + dir);
    std::unique_ptr<Store> s(new Store());
    s->dir_ = dir;
    s->closed_ = true;
    s->lock_fd_ = take_lock(dir);
    try {
        s->files_ = std::make_unique<SegmentSet>(dir);
        Header h = read_header(*s->files_);
        StoreConfig cfg = h.cfg;
        apply_runtime_knobs(cfg, runtime);
        cfg.validate();
        const bool sync = cfg.durability == Durability::fsync;
        s->recovery_ = recover(dir, *s->files_, cfg.wal_chunk_size, sync);
        h = read_header(*s->files_);
        s->cfg_ = cfg;
        s->seed_ = h.seed;

        const NodeLayout layout = NodeLayout::for_branching(cfg.branching_factor);
        SpaceManager::Options so;
        so.region_bits = cfg.region_size_bits;
        so.memory_budget = cfg.memory_budget;
        so.trie_node_size = layout.size;
        s->spaces_ = std::make_unique<SpaceManager>(*s->files_, so, h.tails);

        DiskWorker::Options wo;
        wo.chunk_size = cfg.wal_chunk_size;
        wo.durability = cfg.durability;
        wo.checkpoint_wal_bytes = cfg.checkpoint_wal_bytes;
        wo.block_cache_bytes = cfg.block_cache_bytes;
        wo.crash_at_wal_byte = cfg.crash_at_wal_byte;
        s->worker_ = std::make_unique<DiskWorker>(dir, *s->files_, wo, s->recovery_.next_seq);
        DiskWorker* w = s->worker_.get();
        s->spaces_->set_flush_hook([w] { w->flush(); });

        Engine::Params p;
        p.layout = layout;
        p.sluggishness = cfg.sluggishness;
        p.seed = h.seed;
        p.hash = cfg.hash;
        p.root = h.root;
        p.cursor = h.cursor;
        p.scan_limit = cfg.scan_limit;
        if (h.root < header::kSize || h.root + layout.size > h.tails[0])
            throw Error(ErrorCode::corruption, "root address outside trie space");
        s->engine_ = std::make_unique<Engine>(*s->spaces_, *s->worker_, p);
        s->closed_ = false;
    } catch (...) {
        s->closed_ = true;
        s->engine_.reset();
        s->worker_.reset();
        s->spaces_.reset();
        ::close(s->lock_fd_);
        s->lock_fd_ = -1;
        throw;
    }
    return s;
}

Store::~Store() {
    try {
        close();
    } catch (...) {
    }
    if (lock_fd_ >= 0)
        ::close(lock_fd_);
}

void Store::check_open() const {
    if (closed_)
        throw Error(ErrorCode::rejected, "store is closed");
}

std::optional<std::string> Store::get(std::string_view key) {
    check_open();
    return engine_->get(key);
}

bool Store::put(std::string_view key, std::string_view value) {
    check_open();
    return engine_->put(key, value);
}

bool Store::remove(std::string_view key) {
    check_open();
    return engine_->remove(key);
}

std::vector<bool> Store::write(const std::vector<BatchOp>& ops) {
    check_open();
    return engine_->write(ops);
}

void Store::scan(const std::function<void(std::string_view, std::string_view)>& fn) {
    check_open();
    engine_->scan(fn);
}

StoreStats Store::stats() {
    check_open();
    StoreStats st;
    st.tree = engine_->tree_stats();
    {
        std::scoped_lock spaces(engine_->trie_space_lock(), engine_->data_space_lock());
        for (std::size_t i = 0; i < kSpaceCount; ++i)
            st.tails[i] = spaces_->tail(static_cast<SpaceId>(i));
        st.data = engine_->data_alloc().walk();
        st.nodes_in_use = engine_->trie_alloc().in_use();
        st.free_nodes = engine_->trie_alloc().free_depth();
    }
    st.branching_factor = cfg_.branching_factor;
    st.sluggishness = cfg_.sluggishness;
    st.node_size = engine_->layout().size;
    st.allocations = engine_->data_alloc().allocations();
    st.recycled = engine_->data_alloc().recycled();
    return st;
}

void Store::checkpoint() {
    check_open();
    worker_->checkpoint();
}

void Store::close() {
    if (closed_)
        return;
    closed_ = true;
    worker_->close();
    spaces_->unmap_all();
    if (lock_fd_ >= 0) {
        ::close(lock_fd_);
        lock_fd_ = -1;
    }
}

void Store::simulate_crash() {
    if (closed_)
        return;
    closed_ = true;
    worker_->crash();
    spaces_->unmap_all();
    if (lock_fd_ >= 0) {
        ::close(lock_fd_);
        lock_fd_ = -1;
    }
}

} // namespace ltkv
