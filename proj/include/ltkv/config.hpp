#pragma once

#include <cstdint>
#include <limits>

namespace ltkv {

enum class HashKind : std::uint32_t {
    keyed_blake2b = 1,
    // Digest = key bytes, zero padded / truncated to 32 bytes. Lets tests place
    // keys at chosen trie positions; never use it for real data.
    raw_prefix = 2,
};

enum class Durability : std::uint32_t {
    // Acknowledge after the WAL write reaches stable storage (fdatasync).
    fsync = 0,
    // Acknowledge after the WAL write reaches the kernel. Survives process
    // crashes, not power loss.
    process = 1,
};

inline constexpr std::uint64_t kUnlimited = std::numeric_limits<std::uint64_t>::max();

struct StoreConfig {
    // Persisted in the reserved header; fixed at creation.
    std::uint32_t branching_factor = 256;
    std::uint32_t sluggishness = 16;
    std::uint32_t region_size_bits = 24;
    std::uint32_t wal_chunk_size = 32 * 1024;
    HashKind hash = HashKind::keyed_blake2b;

    // Runtime knobs; a reopen may override them.
    std::uint64_t memory_budget = kUnlimited; // max mapped regions across all spaces
    std::uint64_t scan_limit = 100;           // next-fit steps; kUnlimited scans everything
    Durability durability = Durability::fsync;
    std::uint64_t checkpoint_wal_bytes = 64ull << 20;
    std::uint64_t block_cache_bytes = 64ull << 20;
    // Test hook: the WAL writer tears its write at this log byte and _exit()s.
    std::uint64_t crash_at_wal_byte = 0;

    // Throws Error(invalid_config).
    void validate() const;

    std::uint64_t region_size() const { return std::uint64_t{1} << region_size_bits; }
};

// Copies the runtime knobs of `from` into `into`, leaving persisted fields alone.
void apply_runtime_knobs(StoreConfig& into, const StoreConfig& from);

} // namespace ltkv
