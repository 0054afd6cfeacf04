#include "ltkv/config.hpp"

#include "ltkv/error.hpp"

#include <string>

namespace ltkv {

void StoreConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_config, msg); };
    const auto b = branching_factor;
    if (b != 64 && b != 128 && b != 256)
        fail("branching factor must be one of 64, 128, 256 (got " + std::to_string(b) + ")");
    if (sluggishness < 1)
        fail("sluggishness must be >= 1");
    if (region_size_bits < 16 || region_size_bits > 24)
        fail("region size bits must be in [16, 24]");
    if (wal_chunk_size < 512 || wal_chunk_size > 65536 || wal_chunk_size % 512 != 0)
        fail("wal chunk size must be a multiple of 512 in [512, 65536]");
    if (hash != HashKind::keyed_blake2b && hash != HashKind::raw_prefix)
        fail("unknown hash kind");
    if (memory_budget < 1)
        fail("memory budget must allow at least one region");
    if (scan_limit < 1)
        fail("scan limit must be >= 1");
    if (durability != Durability::fsync && durability != Durability::process)
        fail("unknown durability mode");
    if (block_cache_bytes < 4096)
        fail("block cache must hold at least one block");
}

void apply_runtime_knobs(StoreConfig& into, const StoreConfig& from) {
    into.memory_budget = from.memory_budget;
    into.scan_limit = from.scan_limit;
    into.durability = from.durability;
    into.checkpoint_wal_bytes = from.checkpoint_wal_bytes;
    into.block_cache_bytes = from.block_cache_bytes;
    into.crash_at_wal_byte = from.crash_at_wal_byte;
}

} // namespace ltkv
