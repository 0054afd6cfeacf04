#pragma once

#include <cstddef>
#include <cstdint>

namespace ltkv {

// CRC-32C (Castagnoli), reflected, init and final xor 0xFFFFFFFF.
std::uint32_t crc32c(const void* data, std::size_t len, std::uint32_t seed = 0);

} // namespace ltkv
