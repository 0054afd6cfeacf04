#include "ltkv/disk.hpp"

#include "ltkv/error.hpp"

#include <algorithm>

namespace ltkv {

// ---------------------------------------------------------------- BlockCache

void BlockCache::apply(SpaceId space, std::uint64_t offset, const std::uint8_t* data, std::size_t len) {
    while (len > 0) {
        const std::uint64_t block = offset / kPageSize;
        const std::size_t in_block = offset % kPageSize;
        const std::size_t n = std::min<std::size_t>(len, kPageSize - in_block);
        auto& slot = blocks_[key(space, block)];
        if (!slot) {
            slot = std::make_unique<Block>();
            files_[space].read(block * kPageSize, slot->data(), kPageSize);
            ++reads_;
        }
        std::memcpy(slot->data() + in_block, data, n);
        offset += n;
        data += n;
        len -= n;
    }
}

void BlockCache::flush() {
    std::vector<std::uint64_t> keys;
    keys.reserve(blocks_.size());
    for (const auto& kv : blocks_)
        keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    std::vector<std::uint8_t> run;
    std::size_t i = 0;
    while (i < keys.size()) {
        // Coalesce consecutive blocks of one segment into a single write.
        std::size_t j = i + 1;
        const std::uint64_t first = keys[i] & ((std::uint64_t{1} << 56) - 1);
        const std::uint64_t blocks_per_segment = kSegmentSize / kPageSize;
        while (j < keys.size() && keys[j] == keys[j - 1] + 1 &&
               (keys[j] & ((std::uint64_t{1} << 56) - 1)) / blocks_per_segment == first / blocks_per_segment)
            ++j;
        const auto space = static_cast<SpaceId>(keys[i] >> 56);
        run.resize((j - i) * kPageSize);
        for (std::size_t k = i; k < j; ++k)
            std::memcpy(run.data() + (k - i) * kPageSize, blocks_[keys[k]]->data(), kPageSize);
        files_[space].write(first * kPageSize, run.data(), run.size());
        writes_ += j - i;
        i = j;
    }
    blocks_.clear();
}

// ---------------------------------------------------------------- DiskWorker

DiskWorker::DiskWorker(const std::string& dir, SegmentSet& files, const Options& options, std::uint64_t next_seq)
    : dir_(dir),
      files_(files),
      opt_(options),
      log_(dir, options.crash_at_wal_byte),
      framer_(options.chunk_size, log_.size()),
      cache_(files),
      next_seq_(next_seq),
      durable_(next_seq - 1) {
    thread_ = std::thread([this] { run(); });
}

DiskWorker::~DiskWorker() {
    {
        std::lock_guard lock(mu_);
        if (!stopping_) {
            stopping_ = true;
            Job j;
            j.kind = Kind::crash;
            queue_.push_back(std::move(j));
        }
    }
    not_empty_.notify_all();
    if (thread_.joinable())
        thread_.join();
}

void DiskWorker::check_failed() const {
    if (failed_.load(std::memory_order_acquire)) {
        std::lock_guard lock(mu_);
        throw Error(ErrorCode::io_error, "disk worker failed: " + failure_);
    }
}

std::uint64_t DiskWorker::enqueue(Job&& job) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return queue_.size() < opt_.queue_capacity || stopping_ || failed_; });
    if (stopping_)
        throw Error(ErrorCode::rejected, "store is shutting down");
    if (failed_)
        throw Error(ErrorCode::io_error, "disk worker failed: " + failure_);
    std::uint64_t id;
    if (job.kind == Kind::write) {
        job.seq = id = next_seq_++;
    } else {
        job.barrier = id = next_barrier_++;
        if (job.kind == Kind::close || job.kind == Kind::crash)
            stopping_ = true;
    }
    queue_.push_back(std::move(job));
    lock.unlock();
    not_empty_.notify_one();
    return id;
}

std::uint64_t DiskWorker::submit(WriteSet& ws) {
    if (ws.empty())
        return 0;
    Job j;
    ws.take(j.entries, j.bytes);
    return enqueue(std::move(j));
}

void DiskWorker::wait(std::uint64_t ticket) {
    for (;;) {
        const std::uint64_t d = durable_.load(std::memory_order_acquire);
        if (d >= ticket)
            return;
        check_failed();
        durable_.wait(d, std::memory_order_acquire);
    }
}

void DiskWorker::wait_barrier(std::uint64_t id) {
    std::unique_lock lock(mu_);
    barrier_done_.wait(lock, [&] { return done_barrier_ >= id || failed_ || stopped_; });
    if (failed_)
        throw Error(ErrorCode::io_error, "disk worker failed: " + failure_);
}

void DiskWorker::flush() {
    Job j;
    j.kind = Kind::flush;
    wait_barrier(enqueue(std::move(j)));
}

void DiskWorker::checkpoint() {
    Job j;
    j.kind = Kind::checkpoint;
    wait_barrier(enqueue(std::move(j)));
}

void DiskWorker::close() {
    {
        std::lock_guard lock(mu_);
        if (stopping_)
            return;
    }
    Job j;
    j.kind = Kind::close;
    const std::uint64_t id = enqueue(std::move(j));
    wait_barrier(id);
    if (thread_.joinable())
        thread_.join();
}

void DiskWorker::crash() {
    {
        std::lock_guard lock(mu_);
        if (stopping_)
            return;
    }
    Job j;
    j.kind = Kind::crash;
    enqueue(std::move(j));
    if (thread_.joinable())
        thread_.join();
}

DiskCounters DiskWorker::counters() const {
    std::lock_guard lock(mu_);
    DiskCounters c = counters_;
    return c;
}

void DiskWorker::do_checkpoint() {
    cache_.flush();
    const bool sync = opt_.durability == Durability::fsync;
    if (sync)
        for (std::size_t i = 0; i < kSpaceCount; ++i)
            files_[static_cast<SpaceId>(i)].sync();
    log_.reset(durable_.load(std::memory_order_relaxed) + 1, sync);
    framer_ = wal::ChunkWriter(opt_.chunk_size, 0);
    std::lock_guard lock(mu_);
    ++counters_.checkpoints;
    counters_.unpruned_wal_bytes = 0;
    counters_.block_reads = cache_.block_reads();
    counters_.block_writes = cache_.block_writes();
}

void DiskWorker::run() {
    std::deque<Job> jobs;
    std::vector<std::uint8_t> record;
    std::vector<std::uint8_t> framed;
    bool running = true;
    while (running) {
        {
            std::unique_lock lock(mu_);
            not_empty_.wait(lock, [&] { return !queue_.empty(); });
            jobs.swap(queue_);
        }
        not_full_.notify_all();
        try {
            // One log write for everything that queued up.
            framed.clear();
            std::uint64_t last = 0;
            std::uint64_t nrec = 0;
            for (const Job& j : jobs) {
                if (j.kind != Kind::write)
                    continue;
                record.clear();
                wal::encode_record(record, j.seq, j.entries, j.bytes);
                framer_.frame(record.data(), record.size(), framed);
                last = j.seq;
                ++nrec;
            }
            if (!framed.empty()) {
                log_.append(framed);
                if (opt_.durability == Durability::fsync)
                    log_.sync();
                durable_.store(last, std::memory_order_release);
                durable_.notify_all();
                std::lock_guard lock(mu_);
                counters_.records += nrec;
                counters_.wal_bytes += framed.size();
                counters_.unpruned_wal_bytes += framed.size();
                ++counters_.wal_writes;
            }
            std::uint64_t finished_barrier = 0;
            for (Job& j : jobs) {
                switch (j.kind) {
                case Kind::write:
                    for (const auto& e : j.entries)
                        cache_.apply(e.space, e.offset, j.bytes.data() + e.data_offset, e.length);
                    break;
                case Kind::flush:
                    cache_.flush();
                    finished_barrier = j.barrier;
                    break;
                case Kind::checkpoint:
                    do_checkpoint();
                    finished_barrier = j.barrier;
                    break;
                case Kind::close:
                    do_checkpoint();
                    finished_barrier = j.barrier;
                    running = false;
                    break;
                case Kind::crash:
                    finished_barrier = j.barrier;
                    running = false;
                    break;
                }
                if (!running)
                    break;
            }
            jobs.clear();
            if (running) {
                std::uint64_t unpruned;
                {
                    std::lock_guard lock(mu_);
                    unpruned = counters_.unpruned_wal_bytes;
                    counters_.block_reads = cache_.block_reads();
                    counters_.block_writes = cache_.block_writes();
                }
                if (unpruned >= opt_.checkpoint_wal_bytes)
                    do_checkpoint();
                else if (cache_.bytes() >= opt_.block_cache_bytes)
                    cache_.flush();
            }
            if (finished_barrier) {
                std::lock_guard lock(mu_);
                done_barrier_ = finished_barrier;
            }
            barrier_done_.notify_all();
        } catch (const std::exception& e) {
            {
                std::lock_guard lock(mu_);
                failure_ = e.what();
                stopping_ = true;
            }
            failed_.store(true, std::memory_order_release);
            durable_.notify_all();
            barrier_done_.notify_all();
            not_full_.notify_all();
            running = false;
        }
    }
    std::lock_guard lock(mu_);
    stopped_ = true;
    barrier_done_.notify_all();
}

// ---------------------------------------------------------------- recovery

RecoveryReport recover(const std::string& dir, SegmentSet& files, std::size_t chunk_size, bool sync) {
    RecoveryReport rep;
    wal::Meta meta;
    if (!wal::read_meta(dir, meta))
        meta = wal::Meta{};
    const auto log = wal::read_file(wal::log_path(dir));
    rep.log_bytes = log.size();
    BlockCache cache(files);
    const wal::ScanResult scan = wal::scan_log(log, meta.head_offset, meta.head_seq, chunk_size,
                                               [&](const wal::Record& rec) {
                                                   for (const auto& s : rec.subs)
                                                       cache.apply(s.space, s.offset, s.data, s.len);
                                               });
    rep.end = scan.end;
    rep.records = scan.records;
    rep.next_seq = scan.next_seq;
    rep.detail = scan.detail;
    if (scan.end == wal::ScanEnd::corruption)
        throw Error(ErrorCode::corruption, "write-ahead log is damaged: " + scan.detail);
    cache.flush();
    if (sync)
        for (std::size_t i = 0; i < kSpaceCount; ++i)
            files[static_cast<SpaceId>(i)].sync();
    if (!log.empty() || meta.head_offset != 0 || rep.records > 0) {
        wal::LogFile f(dir, 0);
        f.reset(rep.next_seq, sync);
    }
    return rep;
}

} // namespace ltkv
