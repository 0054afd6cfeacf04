#pragma once

#include "ltkv/config.hpp"
#include "ltkv/layout.hpp"
#include "ltkv/spaces.hpp"

#include <atomic>
#include <cstdint>
#include <string>

namespace ltkv {

// Fixed-size tree nodes: LIFO stack of free node addresses in trie_free space,
// otherwise bump allocation at the trie tail. Caller holds the trie space lock.
class TrieAllocator {
public:
    TrieAllocator(SpaceManager& spaces, const NodeLayout& layout) : sm_(spaces), l_(layout) {}

    // Returns a node with empty masks and the given parent.
    std::uint64_t alloc(WriteSet& ws, std::uint64_t parent);
    void free(WriteSet& ws, std::uint64_t node);

    std::uint64_t free_depth() const { return sm_.tail(SpaceId::trie_free) / 8; }
    // Node slots carved out of trie space so far, used or free.
    std::uint64_t slots_allocated() const;
    std::uint64_t in_use() const { return slots_allocated() - free_depth(); }
    // Address of the first slot in trie space.
    std::uint64_t first_slot() const { return header::kSize; }

    std::uint64_t recycled() const { return recycled_.load(std::memory_order_relaxed); }

private:
    SpaceManager& sm_;
    const NodeLayout& l_;
    std::atomic<std::uint64_t> recycled_{0};
};

struct DataWalkReport {
    bool ok = true;
    std::string problem;
    std::uint64_t envelopes = 0;
    std::uint64_t in_use = 0;
    std::uint64_t in_use_bytes = 0; // envelope sizes, overhead included
    std::uint64_t holes = 0;
    std::uint64_t hole_bytes = 0;
    std::uint64_t adjacent_holes = 0;
    std::uint64_t descriptors = 0;
};

// Variable-size envelopes in data space with an unsorted hole-descriptor
// array in data_free space, next-fit from a persisted cursor, and coalescing
// on free. Caller holds the data space lock.
class DataAllocator {
public:
    DataAllocator(SpaceManager& spaces, std::uint64_t cursor, std::uint64_t scan_limit)
        : sm_(spaces), cursor_(cursor), scan_limit_(scan_limit) {}

    // Allocates an envelope whose body holds at least `body` bytes. Returns the
    // envelope address.
    std::uint64_t alloc(WriteSet& ws, std::uint64_t body);
    // Throws corruption on a double free.
    void free(WriteSet& ws, std::uint64_t addr);

    std::uint64_t envelope_size(std::uint64_t addr);
    std::uint64_t body_capacity(std::uint64_t addr) { return envelope_size(addr) - envelope::kOverhead; }
    static std::uint64_t max_body(std::uint64_t region_size) { return region_size - envelope::kOverhead; }

    std::uint64_t descriptor_count() const { return sm_.tail(SpaceId::data_free) / 16; }
    std::uint64_t cursor() const { return cursor_; }
    void set_scan_limit(std::uint64_t limit) { scan_limit_ = limit; }

    std::uint64_t allocations() const { return allocations_.load(std::memory_order_relaxed); }
    std::uint64_t recycled() const { return recycled_.load(std::memory_order_relaxed); }

    // Walks every envelope; checks header/footer agreement, descriptor
    // back-references, and that no two holes touch inside a region.
    DataWalkReport walk();

private:
    struct Desc {
        std::uint64_t addr;
        std::uint64_t size;
    };
    Desc read_desc(std::uint64_t i);
    void write_desc(WriteSet& ws, std::uint64_t i, const Desc& d);
    std::uint64_t push_desc(WriteSet& ws, const Desc& d);
    void retire_desc(WriteSet& ws, std::uint64_t i);
    void write_envelope(WriteSet& ws, std::uint64_t addr, std::uint64_t size, bool free, std::uint64_t desc);
    std::uint64_t read_header(std::uint64_t addr) { return sm_.read_u64(SpaceId::data, addr); }
    void set_cursor(WriteSet& ws, std::uint64_t c);

    SpaceManager& sm_;
    std::uint64_t cursor_;
    std::uint64_t scan_limit_;
    std::atomic<std::uint64_t> allocations_{0};
    std::atomic<std::uint64_t> recycled_{0};
};

} // namespace ltkv
