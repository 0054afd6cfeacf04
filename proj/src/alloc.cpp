#include "ltkv/alloc.hpp"

#include "ltkv/error.hpp"

#include <vector>

namespace ltkv {

// ---------------------------------------------------------------- trie nodes

std::uint64_t TrieAllocator::slots_allocated() const {
    const std::uint64_t tail = sm_.tail(SpaceId::trie);
    const std::uint64_t r = sm_.region_size();
    const std::uint64_t first = header::kSize;
    auto slots_in = [&](std::uint64_t region, std::uint64_t end_in_region) {
        const std::uint64_t start = region == 0 ? first : 0;
        return end_in_region > start ? (end_in_region - start) / l_.size : 0;
    };
    const std::uint64_t full = tail / r;
    std::uint64_t n = 0;
    if (full > 0)
        n += slots_in(0, r) + (full - 1) * slots_in(1, r);
    n += slots_in(full, tail % r);
    return n;
}

std::uint64_t TrieAllocator::alloc(WriteSet& ws, std::uint64_t parent) {
    std::uint64_t addr;
    const std::uint64_t depth_bytes = sm_.tail(SpaceId::trie_free);
    if (depth_bytes > 0) {
        addr = sm_.read_u64(SpaceId::trie_free, depth_bytes - 8);
        sm_.set_tail(ws, SpaceId::trie_free, depth_bytes - 8);
        recycled_.fetch_add(1, std::memory_order_relaxed);
    } else {
        const std::uint64_t r = sm_.region_size();
        addr = sm_.tail(SpaceId::trie);
        const std::uint64_t start = (addr >> sm_.region_bits()) == 0 ? header::kSize : 0;
        // Slots are counted from the region's first slot so they never straddle.
        const std::uint64_t in_region = addr & (r - 1);
        if (in_region + l_.size > r)
            addr = (addr | (r - 1)) + 1;
        else if (in_region < start)
            addr = (addr & ~(r - 1)) + start;
        sm_.set_tail(ws, SpaceId::trie, addr + l_.size);
    }
    sm_.write_u64(ws, SpaceId::trie, addr + NodeLayout::kParentOff, parent);
    std::vector<std::uint8_t> zeros(2 * l_.mask_bytes, 0);
    sm_.write(ws, SpaceId::trie, addr + NodeLayout::kChdOff, zeros.data(), zeros.size());
    return addr;
}

void TrieAllocator::free(WriteSet& ws, std::uint64_t node) {
    const std::uint64_t t = sm_.tail(SpaceId::trie_free);
    sm_.set_tail(ws, SpaceId::trie_free, t + 8);
    sm_.write_u64(ws, SpaceId::trie_free, t, node);
}

// ---------------------------------------------------------------- data space

DataAllocator::Desc DataAllocator::read_desc(std::uint64_t i) {
    Pin p = sm_.pin(SpaceId::data_free, i * 16, 16);
    return Desc{load_u64(p.at(i * 16)), load_u64(p.at(i * 16 + 8))};
}

void DataAllocator::write_desc(WriteSet& ws, std::uint64_t i, const Desc& d) {
    std::uint8_t buf[16];
    store_u64(buf, d.addr);
    store_u64(buf + 8, d.size);
    sm_.write(ws, SpaceId::data_free, i * 16, buf, 16);
}

std::uint64_t DataAllocator::push_desc(WriteSet& ws, const Desc& d) {
    const std::uint64_t i = descriptor_count();
    sm_.extend(ws, SpaceId::data_free, 16);
    write_desc(ws, i, d);
    return i;
}

void DataAllocator::retire_desc(WriteSet& ws, std::uint64_t i) {
    const std::uint64_t last = descriptor_count() - 1;
    if (i != last) {
        const Desc moved = read_desc(last);
        write_desc(ws, i, moved);
        write_envelope(ws, moved.addr, moved.size, true, i);
    }
    sm_.set_tail(ws, SpaceId::data_free, last * 16);
}

void DataAllocator::write_envelope(WriteSet& ws, std::uint64_t addr, std::uint64_t size, bool free,
                                   std::uint64_t desc) {
    sm_.write_u64(ws, SpaceId::data, addr, envelope::make_header(size, free, desc));
    sm_.write_u64(ws, SpaceId::data, addr + size - 8, size);
}

void DataAllocator::set_cursor(WriteSet& ws, std::uint64_t c) {
    if (c == cursor_)
        return;
    cursor_ = c;
    sm_.write_u64(ws, SpaceId::trie, header::kCursorOff, c);
}

std::uint64_t DataAllocator::envelope_size(std::uint64_t addr) {
    const std::uint64_t h = read_header(addr);
    if (envelope::is_free(h))
        throw Error(ErrorCode::corruption, "record address points at a hole");
    return envelope::size_of(h);
}

std::uint64_t DataAllocator::alloc(WriteSet& ws, std::uint64_t body) {
    const std::uint64_t need = envelope::round_up(body + envelope::kOverhead);
    const std::uint64_t r = sm_.region_size();
    if (need > r)
        throw Error(ErrorCode::invalid_argument, "object larger than a region");
    allocations_.fetch_add(1, std::memory_order_relaxed);

    const std::uint64_t count = descriptor_count();
    if (count > 0) {
        const std::uint64_t steps = scan_limit_ < count ? scan_limit_ : count;
        const std::uint64_t start = cursor_ % count;
        for (std::uint64_t i = 0; i < steps; ++i) {
            const std::uint64_t idx = (start + i) % count;
            const Desc d = read_desc(idx);
            if (d.size < need)
                continue;
            recycled_.fetch_add(1, std::memory_order_relaxed);
            if (d.size - need >= envelope::kMinSplit) {
                write_envelope(ws, d.addr + need, d.size - need, true, idx);
                write_desc(ws, idx, Desc{d.addr + need, d.size - need});
                write_envelope(ws, d.addr, need, false, 0);
            } else {
                retire_desc(ws, idx);
                write_envelope(ws, d.addr, d.size, false, 0);
            }
            set_cursor(ws, idx);
            return d.addr;
        }
        // The next scan resumes where this one gave up.
        set_cursor(ws, (start + steps) % count);
    }

    std::uint64_t tail = sm_.tail(SpaceId::data);
    const std::uint64_t in_region = tail & (r - 1);
    if (in_region + need > r) {
        // The rest of this region cannot hold the object; turn it into a hole.
        const std::uint64_t gap = r - in_region;
        sm_.extend(ws, SpaceId::data, gap);
        write_envelope(ws, tail, gap, false, 0);
        free(ws, tail);
        tail += gap;
    }
    sm_.extend(ws, SpaceId::data, need);
    write_envelope(ws, tail, need, false, 0);
    return tail;
}

void DataAllocator::free(WriteSet& ws, std::uint64_t addr) {
    const std::uint64_t h = read_header(addr);
    if (envelope::is_free(h))
        throw Error(ErrorCode::corruption, "double free of data envelope at " + std::to_string(addr));
    const std::uint64_t size = envelope::size_of(h);
    const std::uint64_t r = sm_.region_size();
    const std::uint64_t region_start = addr & ~(r - 1);
    const std::uint64_t region_end = region_start + r;

    std::uint64_t start = addr;
    std::uint64_t total = size;
    bool prev_free = false;
    bool next_free = false;
    std::uint64_t next_desc = 0;

    if (addr > region_start) {
        const std::uint64_t psize = sm_.read_u64(SpaceId::data, addr - 8);
        const std::uint64_t ph = read_header(addr - psize);
        if (envelope::is_free(ph)) {
            prev_free = true;
            start = addr - psize;
            total += psize;
        }
    }
    const std::uint64_t next = addr + size;
    if (next < region_end && next < sm_.tail(SpaceId::data)) {
        const std::uint64_t nh = read_header(next);
        if (envelope::is_free(nh)) {
            next_free = true;
            next_desc = envelope::desc_of(nh);
            total += envelope::size_of(nh);
        }
    }

    std::uint64_t idx;
    if (prev_free && next_free) {
        retire_desc(ws, next_desc);
        idx = envelope::desc_of(read_header(start)); // may have moved in the swap
        write_desc(ws, idx, Desc{start, total});
    } else if (prev_free) {
        idx = envelope::desc_of(read_header(start));
        write_desc(ws, idx, Desc{start, total});
    } else if (next_free) {
        idx = next_desc;
        write_desc(ws, idx, Desc{start, total});
    } else {
        idx = push_desc(ws, Desc{start, total});
    }
    write_envelope(ws, start, total, true, idx);
}

DataWalkReport DataAllocator::walk() {
    DataWalkReport rep;
    auto fail = [&](const std::string& msg) {
        if (rep.ok) {
            rep.ok = false;
            rep.problem = msg;
        }
    };
    const std::uint64_t tail = sm_.tail(SpaceId::data);
    const std::uint64_t r = sm_.region_size();
    const std::uint64_t count = descriptor_count();
    rep.descriptors = count;
    std::uint64_t pos = 0;
    bool prev_hole = false;
    while (pos < tail) {
        if ((pos & (r - 1)) == 0)
            prev_hole = false;
        const std::uint64_t h = read_header(pos);
        const std::uint64_t size = envelope::size_of(h);
        if (size < envelope::kOverhead || size % envelope::kAlign != 0 || pos + size > tail ||
            ((pos + size - 1) & ~(r - 1)) != (pos & ~(r - 1))) {
            fail("bad envelope size " + std::to_string(size) + " at " + std::to_string(pos));
            break;
        }
        if (sm_.read_u64(SpaceId::data, pos + size - 8) != size)
            fail("footer disagrees with header at " + std::to_string(pos));
        ++rep.envelopes;
        if (envelope::is_free(h)) {
            ++rep.holes;
            rep.hole_bytes += size;
            if (prev_hole) {
                ++rep.adjacent_holes;
                fail("adjacent holes at " + std::to_string(pos));
            }
            const std::uint64_t d = envelope::desc_of(h);
            if (d >= count) {
                fail("hole descriptor index out of range at " + std::to_string(pos));
            } else {
                const Desc desc = read_desc(d);
                if (desc.addr != pos || desc.size != size)
                    fail("descriptor " + std::to_string(d) + " does not match hole at " + std::to_string(pos));
            }
            prev_hole = true;
        } else {
            ++rep.in_use;
            rep.in_use_bytes += size;
            prev_hole = false;
        }
        pos += size;
    }
    if (rep.ok && rep.holes != count)
        fail("descriptor count " + std::to_string(count) + " != hole count " + std::to_string(rep.holes));
    if (rep.ok && rep.in_use_bytes + rep.hole_bytes != tail)
        fail("envelopes do not cover the data space");
    return rep;
}

} // namespace ltkv
