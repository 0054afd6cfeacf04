#pragma once

#include "ltkv/config.hpp"
#include "ltkv/spaces.hpp"
#include "ltkv/wal.hpp"

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace ltkv {

// 4 KiB block images of the segment files, built from file reads (never from
// the mapped images) plus applied writes.
class BlockCache {
public:
    explicit BlockCache(SegmentSet& files) : files_(files) {}

    void apply(SpaceId space, std::uint64_t offset, const std::uint8_t* data, std::size_t len);
    // Writes every cached block back to its segment file and empties the cache.
    void flush();

    std::size_t bytes() const { return blocks_.size() * kPageSize; }
    std::size_t blocks() const { return blocks_.size(); }
    std::uint64_t block_reads() const { return reads_; }
    std::uint64_t block_writes() const { return writes_; }

private:
    using Block = std::array<std::uint8_t, kPageSize>;
    static std::uint64_t key(SpaceId space, std::uint64_t block) {
        return (std::uint64_t(space) << 56) | block;
    }

    SegmentSet& files_;
    std::unordered_map<std::uint64_t, std::unique_ptr<Block>> blocks_;
    std::uint64_t reads_ = 0;
    std::uint64_t writes_ = 0;
};

struct DiskCounters {
    std::uint64_t records = 0;
    std::uint64_t wal_bytes = 0;
    std::uint64_t wal_writes = 0;
    std::uint64_t block_reads = 0;
    std::uint64_t block_writes = 0;
    std::uint64_t checkpoints = 0;
    std::uint64_t unpruned_wal_bytes = 0;
};

// Single consumer of a bounded channel of write sets. Writes each batch of
// records to the log, resolves tickets once the log write is durable, then
// folds the writes into block images that reach the segment files on flush.
class DiskWorker {
public:
    struct Options {
        std::size_t chunk_size = 32 * 1024;
        Durability durability = Durability::fsync;
        std::uint64_t checkpoint_wal_bytes = 64ull << 20;
        std::uint64_t block_cache_bytes = 64ull << 20;
        std::uint64_t crash_at_wal_byte = 0;
        std::size_t queue_capacity = 1024;
    };

    DiskWorker(const std::string& dir, SegmentSet& files, const Options& options, std::uint64_t next_seq);
    ~DiskWorker();
    DiskWorker(const DiskWorker&) = delete;
    DiskWorker& operator=(const DiskWorker&) = delete;

    // Hands the captured writes to the worker. Returns a ticket; 0 for an
    // empty set. Throws rejected after shutdown began.
    std::uint64_t submit(WriteSet& ws);
    // Blocks until the ticket's record is durable in the log.
    void wait(std::uint64_t ticket);
    bool resolved(std::uint64_t ticket) const { return durable_.load(std::memory_order_acquire) >= ticket; }

    // Every write submitted so far is in the segment files (page cache).
    void flush();
    // flush, then make the segment files durable and empty the log.
    void checkpoint();
    // checkpoint and stop the worker.
    void close();
    // Stop after writing the log only: cached blocks are dropped, the log is
    // left unpruned, as if the process died after the last acknowledgment.
    void crash();

    DiskCounters counters() const;
    std::uint64_t last_seq() const { return durable_.load(std::memory_order_acquire); }

private:
    enum class Kind { write, flush, checkpoint, close, crash };
    struct Job {
        Kind kind = Kind::write;
        std::uint64_t seq = 0;
        std::vector<WriteSet::Entry> entries;
        std::vector<std::uint8_t> bytes;
        std::uint64_t barrier = 0;
    };

    void run();
    void do_checkpoint();
    std::uint64_t enqueue(Job&& job);
    void wait_barrier(std::uint64_t id);
    void check_failed() const;

    std::string dir_;
    SegmentSet& files_;
    Options opt_;
    wal::LogFile log_;
    wal::ChunkWriter framer_;
    BlockCache cache_;

    mutable std::mutex mu_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::condition_variable barrier_done_;
    std::deque<Job> queue_;
    std::uint64_t next_seq_;
    std::uint64_t next_barrier_ = 1;
    std::uint64_t done_barrier_ = 0;
    bool stopping_ = false;
    bool stopped_ = false;
    std::string failure_;

    std::atomic<std::uint64_t> durable_;
    std::atomic<bool> failed_{false};

    DiskCounters counters_;
    std::thread thread_;
};

struct RecoveryReport {
    wal::ScanEnd end = wal::ScanEnd::clean;
    std::uint64_t records = 0;
    std::uint64_t log_bytes = 0;
    std::uint64_t next_seq = 1;
    std::string detail;
};

// Replays the log into the segment files and empties it. Throws corruption
// when valid records follow a damaged region.
RecoveryReport recover(const std::string& dir, SegmentSet& files, std::size_t chunk_size, bool sync);

} // namespace ltkv
