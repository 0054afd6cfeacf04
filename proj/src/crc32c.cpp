#include "ltkv/crc32c.hpp"

#include <boost/crc.hpp>

namespace ltkv {

std::uint32_t crc32c(const void* data, std::size_t len, std::uint32_t seed) {
    // Continue from `seed` by undoing the previous final xor.
    boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc(seed ^ 0xFFFFFFFF);
    crc.process_bytes(data, len);
    return crc.checksum();
}

} // namespace ltkv
