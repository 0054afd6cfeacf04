#include "ltkv/spaces.hpp"

#include "ltkv/error.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>

namespace ltkv {

const char* space_name(SpaceId id) {
    switch (id) {
    case SpaceId::trie: return "trie";
    case SpaceId::trie_free: return "trie_free";
    case SpaceId::data: return "data";
    case SpaceId::data_free: return "data_free";
    }
    return "unknown";
}

// ---------------------------------------------------------------- SegmentFiles

SegmentFiles::SegmentFiles(std::string dir, SpaceId space) : dir_(std::move(dir)), space_(space) {
    // Pick up whatever segments already exist so sized_end_ reflects disk.
    std::uint64_t end = 0;
    for (std::uint64_t seg = 0;; ++seg) {
        struct stat st {};
        if (::stat(path_for(seg).c_str(), &st) != 0)
            break;
        end = seg * kSegmentSize + static_cast<std::uint64_t>(st.st_size);
    }
    sized_end_.store(end, std::memory_order_relaxed);
}

SegmentFiles::~SegmentFiles() {
    for (int fd : fds_)
        if (fd >= 0)
            ::close(fd);
}

std::string SegmentFiles::path_for(std::uint64_t segment) const {
    return dir_ + "/" + space_name(space_) + "-" + std::to_string(segment) + ".seg";
}

int SegmentFiles::fd(std::uint64_t segment) {
    std::lock_guard lock(mutex_);
    if (segment >= fds_.size())
        fds_.resize(segment + 1, -1);
    if (fds_[segment] < 0) {
        const std::string path = path_for(segment);
        int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd < 0)
            throw_errno("open " + path);
        fds_[segment] = fd;
    }
    return fds_[segment];
}

void SegmentFiles::ensure_size(std::uint64_t end, std::uint64_t granularity) {
    if (end <= sized_end_.load(std::memory_order_acquire))
        return;
    const std::uint64_t target = (end + granularity - 1) / granularity * granularity;
    std::lock_guard lock(grow_mutex_);
    std::uint64_t have = sized_end_.load(std::memory_order_acquire);
    if (target <= have)
        return;
    for (std::uint64_t seg = have / kSegmentSize; seg * kSegmentSize < target; ++seg) {
        const std::uint64_t seg_end = std::min(target - seg * kSegmentSize, kSegmentSize);
        const int f = fd(seg);
        struct stat st {};
        if (::fstat(f, &st) != 0)
            throw_errno("fstat segment");
        if (static_cast<std::uint64_t>(st.st_size) < seg_end && ::ftruncate(f, static_cast<off_t>(seg_end)) != 0)
            throw_errno("grow segment");
    }
    sized_end_.store(target, std::memory_order_release);
}

void SegmentFiles::read(std::uint64_t offset, void* buf, std::size_t len) {
    reads_.fetch_add(1, std::memory_order_relaxed);
    const int f = fd(offset / kSegmentSize);
    auto* out = static_cast<std::uint8_t*>(buf);
    std::uint64_t pos = offset % kSegmentSize;
    while (len > 0) {
        const ssize_t n = ::pread(f, out, len, static_cast<off_t>(pos));
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw_errno("read segment");
        }
        if (n == 0) {
            std::memset(out, 0, len);
            return;
        }
        out += n;
        pos += static_cast<std::uint64_t>(n);
        len -= static_cast<std::size_t>(n);
    }
}

void SegmentFiles::write(std::uint64_t offset, const void* buf, std::size_t len) {
    writes_.fetch_add(1, std::memory_order_relaxed);
    const int f = fd(offset / kSegmentSize);
    const auto* in = static_cast<const std::uint8_t*>(buf);
    std::uint64_t pos = offset % kSegmentSize;
    while (len > 0) {
        const ssize_t n = ::pwrite(f, in, len, static_cast<off_t>(pos));
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw_errno("write segment");
        }
        in += n;
        pos += static_cast<std::uint64_t>(n);
        len -= static_cast<std::size_t>(n);
    }
}

void SegmentFiles::sync() {
    std::vector<int> fds;
    {
        std::lock_guard lock(mutex_);
        fds = fds_;
    }
    for (int f : fds)
        if (f >= 0 && ::fdatasync(f) != 0)
            throw_errno("sync segment");
}

SegmentSet::SegmentSet(const std::string& dir) {
    for (std::size_t i = 0; i < kSpaceCount; ++i)
        files_[i] = std::make_unique<SegmentFiles>(dir, static_cast<SpaceId>(i));
}

// ------------------------------------------------------------------------- Pin

Pin& Pin::operator=(Pin&& other) noexcept {
    if (this != &other) {
        release();
        region_ = other.region_;
        base_ = other.base_;
        mask_ = other.mask_;
        other.region_ = nullptr;
        other.base_ = nullptr;
    }
    return *this;
}

void Pin::release() {
    if (region_) {
        region_->state.fetch_sub(1, std::memory_order_release);
        region_ = nullptr;
        base_ = nullptr;
    }
}

// -------------------------------------------------------------------- WriteSet

void WriteSet::record(SpaceId space, std::uint64_t offset, const void* src, std::size_t len) {
    if (len == 0)
        return;
    const auto* p = static_cast<const std::uint8_t*>(src);
    if (!entries_.empty()) {
        Entry& last = entries_.back();
        // Extend the previous write when this one continues it byte for byte.
        if (last.space == space && last.offset + last.length == offset &&
            last.data_offset + last.length == bytes_.size() && std::uint64_t{last.length} + len < (1u << 30)) {
            bytes_.insert(bytes_.end(), p, p + len);
            last.length += static_cast<std::uint32_t>(len);
            return;
        }
    }
    entries_.push_back(Entry{space, offset, static_cast<std::uint32_t>(len), static_cast<std::uint32_t>(bytes_.size())});
    bytes_.insert(bytes_.end(), p, p + len);
}

void WriteSet::hold(Pin&& pin) {
    for (const Pin& held : pins_)
        if (held.region() == pin.region())
            return; // `pin` releases its extra reference on scope exit
    pins_.push_back(std::move(pin));
}

void WriteSet::release_pins() { pins_.clear(); }

void WriteSet::clear() {
    entries_.clear();
    bytes_.clear();
    pins_.clear();
}

void WriteSet::take(std::vector<Entry>& entries, std::vector<std::uint8_t>& bytes) {
    entries = std::move(entries_);
    bytes = std::move(bytes_);
    entries_.clear();
    bytes_.clear();
}

// ---------------------------------------------------------------- SpaceManager

SpaceManager::SpaceManager(SegmentSet& files, const Options& options,
                           const std::array<std::uint64_t, kSpaceCount>& tails)
    : files_(files),
      region_bits_(options.region_bits),
      trie_node_size_(options.trie_node_size),
      memory_budget_(options.memory_budget) {
    for (std::size_t i = 0; i < kSpaceCount; ++i) {
        tails_[i].store(tails[i], std::memory_order_relaxed);
        dir_[i].reset(new std::atomic<std::atomic<Region*>*>[kDirChunks]);
        for (std::size_t c = 0; c < kDirChunks; ++c)
            dir_[i][c].store(nullptr, std::memory_order_relaxed);
        files_[static_cast<SpaceId>(i)].ensure_size(tails[i], region_size());
    }
}

SpaceManager::~SpaceManager() {
    unmap_all();
    for (std::size_t i = 0; i < kSpaceCount; ++i) {
        for (std::size_t c = 0; c < kDirChunks; ++c) {
            std::atomic<Region*>* chunk = dir_[i][c].load(std::memory_order_relaxed);
            if (!chunk)
                continue;
            for (std::size_t j = 0; j < kDirChunk; ++j)
                delete chunk[j].load(std::memory_order_relaxed);
            delete[] chunk;
        }
    }
}

void SpaceManager::unmap_all() {
    std::lock_guard lock(mutex_);
    for (Region* r : mapped_) {
        if (r->state.load(std::memory_order_acquire) & Region::kMapped) {
            r->state.fetch_and(~Region::kMapped, std::memory_order_acq_rel);
            unmap_region_locked(r);
        }
    }
    mapped_.clear();
    mapped_count_.store(0, std::memory_order_relaxed);
}

Region* SpaceManager::find_region(SpaceId space, std::uint64_t index) const {
    const std::size_t c = index >> kDirChunkBits;
    if (c >= kDirChunks)
        return nullptr;
    std::atomic<Region*>* chunk = dir_[index_of(space)][c].load(std::memory_order_acquire);
    if (!chunk)
        return nullptr;
    return chunk[index & (kDirChunk - 1)].load(std::memory_order_acquire);
}

Region* SpaceManager::get_region_locked(SpaceId space, std::uint64_t index) {
    const std::size_t c = index >> kDirChunkBits;
    if (c >= kDirChunks)
        throw Error(ErrorCode::out_of_range, "region index beyond directory");
    auto& slot = dir_[index_of(space)][c];
    std::atomic<Region*>* chunk = slot.load(std::memory_order_acquire);
    if (!chunk) {
        chunk = new std::atomic<Region*>[kDirChunk];
        for (std::size_t j = 0; j < kDirChunk; ++j)
            chunk[j].store(nullptr, std::memory_order_relaxed);
        slot.store(chunk, std::memory_order_release);
    }
    auto& entry = chunk[index & (kDirChunk - 1)];
    Region* r = entry.load(std::memory_order_acquire);
    if (!r) {
        r = new Region;
        r->space = space;
        r->index = index;
        entry.store(r, std::memory_order_release);
    }
    return r;
}

Pin SpaceManager::pin(SpaceId space, std::uint64_t offset, std::uint64_t len) {
    const std::uint64_t index = offset >> region_bits_;
    if (len == 0)
        len = 1;
    if (((offset + len - 1) >> region_bits_) != index)
        throw Error(ErrorCode::corruption, std::string("object crosses a region boundary in ") + space_name(space));
    if (offset + len > tail(space))
        throw Error(ErrorCode::corruption, std::string("address beyond the tail of ") + space_name(space) +
                                               " space: " + std::to_string(offset));
    if (Region* r = find_region(space, index)) {
        const std::uint64_t s = r->state.fetch_add(1, std::memory_order_acquire);
        if ((s & Region::kMapped) && !(s & Region::kBusy)) {
            r->lru.store(clock_.fetch_add(1, std::memory_order_relaxed), std::memory_order_relaxed);
            return Pin(r, r->base.load(std::memory_order_acquire), region_bits_);
        }
        r->state.fetch_sub(1, std::memory_order_release);
    }
    return pin_slow(space, index);
}

Pin SpaceManager::pin_slow(SpaceId space, std::uint64_t index) {
    std::lock_guard lock(mutex_);
    Region* r = get_region_locked(space, index);
    if (!(r->state.load(std::memory_order_acquire) & Region::kMapped)) {
        while (mapped_count_.load(std::memory_order_relaxed) >= memory_budget_)
            evict_one_locked();
        map_locked(r);
    }
    r->state.fetch_add(1, std::memory_order_acquire);
    r->lru.store(clock_.fetch_add(1, std::memory_order_relaxed), std::memory_order_relaxed);
    return Pin(r, r->base.load(std::memory_order_acquire), region_bits_);
}

void SpaceManager::map_locked(Region* r) {
    const std::uint64_t start = r->index << region_bits_;
    SegmentFiles& f = files_for(r->space);
    f.ensure_size(start + region_size(), region_size());
    void* p = ::mmap(nullptr, region_size(), PROT_READ | PROT_WRITE, MAP_PRIVATE, f.fd(start / kSegmentSize),
                     static_cast<off_t>(start % kSegmentSize));
    if (p == MAP_FAILED)
        throw_errno("mmap region");
    if (r->space == SpaceId::trie && trie_node_size_ > 0) {
        const std::uint64_t usable = region_size() - (r->index == 0 ? header::kSize : 0);
        r->locks = std::make_unique<NodeLockTable>(usable / trie_node_size_);
    }
    r->dirty.store(false, std::memory_order_relaxed);
    r->base.store(static_cast<std::uint8_t*>(p), std::memory_order_release);
    r->state.fetch_or(Region::kMapped, std::memory_order_release);
    mapped_.push_back(r);
    mapped_count_.fetch_add(1, std::memory_order_relaxed);
}

void SpaceManager::unmap_region_locked(Region* r) {
    ::munmap(r->base.load(std::memory_order_relaxed), region_size());
    r->base.store(nullptr, std::memory_order_relaxed);
    r->locks.reset();
}

void SpaceManager::evict_one_locked() {
    for (;;) {
        Region* victim = nullptr;
        std::uint64_t best = ~std::uint64_t{0};
        for (Region* r : mapped_) {
            if (r->state.load(std::memory_order_acquire) != Region::kMapped)
                continue; // pinned or in transition
            const std::uint64_t stamp = r->lru.load(std::memory_order_relaxed);
            if (stamp < best) {
                best = stamp;
                victim = r;
            }
        }
        if (!victim)
            throw Error(ErrorCode::budget_exhausted, "memory budget exhausted: every mapped region is pinned");
        std::uint64_t expected = Region::kMapped;
        if (!victim->state.compare_exchange_strong(expected, Region::kBusy, std::memory_order_acq_rel))
            continue; // pinned concurrently; pick again
        if (victim->dirty.load(std::memory_order_acquire) && flush_hook_)
            flush_hook_();
        unmap_region_locked(victim);
        victim->state.fetch_and(~Region::kBusy, std::memory_order_release);
        mapped_.erase(std::find(mapped_.begin(), mapped_.end(), victim));
        mapped_count_.fetch_sub(1, std::memory_order_relaxed);
        evictions_.fetch_add(1, std::memory_order_relaxed);
        return;
    }
}

bool SpaceManager::is_resident(SpaceId space, std::uint64_t offset) const {
    const Region* r = find_region(space, offset >> region_bits_);
    return r && (r->state.load(std::memory_order_acquire) & Region::kMapped);
}

void SpaceManager::write(WriteSet& ws, SpaceId space, std::uint64_t offset, const void* src, std::size_t len) {
    if (len == 0)
        return;
    Pin p = pin(space, offset, len);
    std::memcpy(p.at(offset), src, len);
    p.region()->dirty.store(true, std::memory_order_release);
    ws.record(space, offset, src, len);
    ws.hold(std::move(p));
}

void SpaceManager::write_u64(WriteSet& ws, SpaceId space, std::uint64_t offset, std::uint64_t value) {
    Pin p = pin(space, offset, 8);
    // Word-sized slots are read concurrently by lock-free descents.
    std::atomic_ref<std::uint64_t>(*reinterpret_cast<std::uint64_t*>(p.at(offset)))
        .store(value, std::memory_order_relaxed);
    p.region()->dirty.store(true, std::memory_order_release);
    ws.record(space, offset, &value, 8);
    ws.hold(std::move(p));
}

std::uint64_t SpaceManager::read_u64(SpaceId space, std::uint64_t offset) {
    Pin p = pin(space, offset, 8);
    return std::atomic_ref<std::uint64_t>(*reinterpret_cast<std::uint64_t*>(p.at(offset)))
        .load(std::memory_order_relaxed);
}

void SpaceManager::set_tail(WriteSet& ws, SpaceId space, std::uint64_t new_tail) {
    files_for(space).ensure_size(new_tail, region_size());
    tails_[index_of(space)].store(new_tail, std::memory_order_release);
    write_u64(ws, SpaceId::trie, header::kTailsOff + 8 * index_of(space), new_tail);
}

std::uint64_t SpaceManager::extend(WriteSet& ws, SpaceId space, std::uint64_t bytes) {
    const std::uint64_t old = tail(space);
    set_tail(ws, space, old + bytes);
    return old;
}

std::size_t SpaceManager::lock_slot_index(std::uint64_t trie_offset) const {
    std::uint64_t in_region = trie_offset & (region_size() - 1);
    if ((trie_offset >> region_bits_) == 0)
        in_region -= header::kSize;
    return in_region / trie_node_size_;
}

void SpaceManager::set_flush_hook(std::function<void()> hook) {
    std::lock_guard lock(mutex_);
    flush_hook_ = std::move(hook);
}

void SpaceManager::set_memory_budget(std::uint64_t regions) {
    std::lock_guard lock(mutex_);
    memory_budget_ = regions;
}

} // namespace ltkv
