#pragma once

#include "ltkv/address.hpp"
#include "ltkv/node_lock.hpp"

#include <array>
#include <bit>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace ltkv {

static_assert(std::endian::native == std::endian::little, "on-disk integers are little-endian");

enum class SpaceId : std::uint8_t { trie = 0, trie_free = 1, data = 2, data_free = 3 };
inline constexpr std::size_t kSpaceCount = 4;

const char* space_name(SpaceId id);
inline std::size_t index_of(SpaceId id) { return static_cast<std::size_t>(id); }

// Reserved header page: the first 4096 bytes of trie space.
namespace header {
inline constexpr std::uint64_t kMagic = 0x3152444856544b4cull; // "LKTVHDR1"
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint64_t kMagicOff = 0;
inline constexpr std::uint64_t kVersionOff = 8;
inline constexpr std::uint64_t kBranchingOff = 12;
inline constexpr std::uint64_t kSluggishOff = 16;
inline constexpr std::uint64_t kRegionBitsOff = 20;
inline constexpr std::uint64_t kChunkSizeOff = 24;
inline constexpr std::uint64_t kHashKindOff = 28;
inline constexpr std::uint64_t kSeedOff = 32;
inline constexpr std::uint64_t kChecksumOff = 64; // crc32c of bytes [0, 64)
inline constexpr std::uint64_t kRootOff = 72;
inline constexpr std::uint64_t kCursorOff = 80;
inline constexpr std::uint64_t kTailsOff = 88; // 4 x u64, indexed by SpaceId
inline constexpr std::uint64_t kSize = kPageSize;
} // namespace header

// The 1 GiB segment files backing one logical space: <dir>/<space>-<n>.seg.
class SegmentFiles {
public:
    SegmentFiles(std::string dir, SpaceId space);
    ~SegmentFiles();
    SegmentFiles(const SegmentFiles&) = delete;
    SegmentFiles& operator=(const SegmentFiles&) = delete;

    SpaceId space() const { return space_; }

    // File descriptor for a segment, creating the file on first use.
    int fd(std::uint64_t segment);

    // Grows the files so that every byte in [0, end) is backed. Never shrinks.
    void ensure_size(std::uint64_t end, std::uint64_t granularity);

    // pread/pwrite at a space offset; ranges must not cross a segment. Bytes
    // past end-of-file read as zero.
    void read(std::uint64_t offset, void* buf, std::size_t len);
    void write(std::uint64_t offset, const void* buf, std::size_t len);
    void sync();

    std::uint64_t read_calls() const { return reads_.load(std::memory_order_relaxed); }
    std::uint64_t write_calls() const { return writes_.load(std::memory_order_relaxed); }

private:
    std::string path_for(std::uint64_t segment) const;

    std::string dir_;
    SpaceId space_;
    std::mutex mutex_;
    std::mutex grow_mutex_;
    std::vector<int> fds_;
    std::atomic<std::uint64_t> sized_end_{0};
    std::atomic<std::uint64_t> reads_{0};
    std::atomic<std::uint64_t> writes_{0};
};

class SegmentSet {
public:
    explicit SegmentSet(const std::string& dir);
    SegmentFiles& operator[](SpaceId id) { return *files_[index_of(id)]; }

private:
    std::array<std::unique_ptr<SegmentFiles>, kSpaceCount> files_;
};

struct Region {
    static constexpr std::uint64_t kMapped = std::uint64_t{1} << 62;
    static constexpr std::uint64_t kBusy = std::uint64_t{1} << 63;
    static constexpr std::uint64_t kPinMask = (std::uint64_t{1} << 62) - 1;

    SpaceId space{};
    std::uint64_t index = 0;
    // low bits: pin count; kMapped / kBusy flags
    std::atomic<std::uint64_t> state{0};
    std::atomic<std::uint8_t*> base{nullptr};
    std::atomic<std::uint64_t> lru{0};
    std::atomic<bool> dirty{false};
    std::unique_ptr<NodeLockTable> locks; // trie space only; reset on unmap
};

// A pinned, mapped region. Object bytes stay valid and resident while held.
class Pin {
public:
    Pin() = default;
    Pin(Region* region, std::uint8_t* base, unsigned region_bits)
        : region_(region), base_(base), mask_((std::uint64_t{1} << region_bits) - 1) {}
    Pin(Pin&& other) noexcept { *this = std::move(other); }
    Pin& operator=(Pin&& other) noexcept;
    Pin(const Pin&) = delete;
    Pin& operator=(const Pin&) = delete;
    ~Pin() { release(); }

    void release();
    explicit operator bool() const { return region_ != nullptr; }
    Region* region() const { return region_; }

    // Pointer to the byte at a space offset inside this region.
    std::uint8_t* at(std::uint64_t space_offset) const { return base_ + (space_offset & mask_); }

private:
    Region* region_ = nullptr;
    std::uint8_t* base_ = nullptr;
    std::uint64_t mask_ = 0;
};

// Low-level writes buffered by one store operation or batch: the unit handed
// to the disk pipeline. Holds pins on every region it wrote until released.
class WriteSet {
public:
    struct Entry {
        SpaceId space;
        std::uint64_t offset;
        std::uint32_t length;
        std::uint32_t data_offset; // into bytes()
    };

    void record(SpaceId space, std::uint64_t offset, const void* src, std::size_t len);
    void hold(Pin&& pin);

    const std::vector<Entry>& entries() const { return entries_; }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    bool empty() const { return entries_.empty(); }
    std::size_t payload_bytes() const { return bytes_.size(); }

    void release_pins();
    void clear();

    // Moves the captured writes out, keeping the pins.
    void take(std::vector<Entry>& entries, std::vector<std::uint8_t>& bytes);

private:
    std::vector<Entry> entries_;
    std::vector<std::uint8_t> bytes_;
    std::vector<Pin> pins_;
};

// The four logical spaces as region-granular, privately mapped views of the
// segment files, bounded by a memory budget with LRU eviction.
class SpaceManager {
public:
    struct Options {
        unsigned region_bits = 24;
        std::uint64_t memory_budget = ~std::uint64_t{0};
        std::size_t trie_node_size = 0; // fixes the lock-slot layout of trie regions
    };

    SpaceManager(SegmentSet& files, const Options& options, const std::array<std::uint64_t, kSpaceCount>& tails);
    ~SpaceManager();
    SpaceManager(const SpaceManager&) = delete;
    SpaceManager& operator=(const SpaceManager&) = delete;

    // Maps (if needed) and pins the region holding [offset, offset + len).
    // Throws corruption if the range crosses a region or passes the tail, and
    // budget_exhausted if a region must be evicted but all are pinned.
    Pin pin(SpaceId space, std::uint64_t offset, std::uint64_t len);

    // Applies bytes to the mapped image and captures them in `ws`.
    void write(WriteSet& ws, SpaceId space, std::uint64_t offset, const void* src, std::size_t len);
    void write_u64(WriteSet& ws, SpaceId space, std::uint64_t offset, std::uint64_t value);
    std::uint64_t read_u64(SpaceId space, std::uint64_t offset);

    std::uint64_t tail(SpaceId space) const { return tails_[index_of(space)].load(std::memory_order_acquire); }
    // Moves the tail (growing files as needed) and records it in the header.
    // Caller holds the space's tail lock.
    void set_tail(WriteSet& ws, SpaceId space, std::uint64_t new_tail);
    // Appends `bytes` zeroed bytes; returns the old tail.
    std::uint64_t extend(WriteSet& ws, SpaceId space, std::uint64_t bytes);

    // Lock slot table for the trie region a pin refers to.
    NodeLockTable& lock_table(const Pin& pin) const { return *pin.region()->locks; }
    std::size_t lock_slot_index(std::uint64_t trie_offset) const;

    // Called (with no internal lock held by the caller's thread other than the
    // region table) before a dirty region is unmapped; must make every
    // submitted write visible in the segment files.
    void set_flush_hook(std::function<void()> hook);
    void set_memory_budget(std::uint64_t regions);

    unsigned region_bits() const { return region_bits_; }
    std::uint64_t region_size() const { return std::uint64_t{1} << region_bits_; }
    std::size_t resident_regions() const { return mapped_count_.load(std::memory_order_relaxed); }
    std::uint64_t evictions() const { return evictions_.load(std::memory_order_relaxed); }
    bool is_resident(SpaceId space, std::uint64_t offset) const;

    SegmentSet& files() { return files_; }

    // Unmaps everything; requires no outstanding pins.
    void unmap_all();

private:
    static constexpr std::size_t kDirChunkBits = 12;
    static constexpr std::size_t kDirChunk = std::size_t{1} << kDirChunkBits;
    static constexpr std::size_t kDirChunks = 4096;

    Region* find_region(SpaceId space, std::uint64_t index) const;
    Region* get_region_locked(SpaceId space, std::uint64_t index);
    Pin pin_slow(SpaceId space, std::uint64_t index);
    void map_locked(Region* r);
    void unmap_region_locked(Region* r);
    void evict_one_locked();

    SegmentFiles& files_for(SpaceId space) { return files_[space]; }

    SegmentSet& files_;
    unsigned region_bits_;
    std::size_t trie_node_size_;
    std::uint64_t memory_budget_;

    std::array<std::atomic<std::uint64_t>, kSpaceCount> tails_;
    std::array<std::unique_ptr<std::atomic<std::atomic<Region*>*>[]>, kSpaceCount> dir_;

    mutable std::mutex mutex_;
    std::vector<Region*> mapped_;
    std::function<void()> flush_hook_;
    std::atomic<std::size_t> mapped_count_{0};
    std::atomic<std::uint64_t> evictions_{0};
    std::atomic<std::uint64_t> clock_{0};
};

inline std::uint64_t load_u64(const std::uint8_t* p) {
    std::uint64_t v;
    std::memcpy(&v, p, sizeof v);
    return v;
}
inline std::uint32_t load_u32(const std::uint8_t* p) {
    std::uint32_t v;
    std::memcpy(&v, p, sizeof v);
    return v;
}
inline void store_u64(std::uint8_t* p, std::uint64_t v) { std::memcpy(p, &v, sizeof v); }
inline void store_u32(std::uint8_t* p, std::uint32_t v) { std::memcpy(p, &v, sizeof v); }

} // namespace ltkv
