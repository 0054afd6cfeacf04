#include "ltkv/address.hpp"

#include "ltkv/error.hpp"

namespace ltkv {

LogicalAddress LogicalAddress::pack(const AddressParts& parts, unsigned region_bits) {
    if (region_bits < kPageBits || region_bits > kSegmentBits)
        throw Error(ErrorCode::out_of_range, "region bits out of range");
    const std::uint64_t page_count = std::uint64_t{1} << (region_bits - kPageBits);
    const std::uint64_t region_count = std::uint64_t{1} << (kSegmentBits - region_bits);
    if (parts.offset >= kPageSize || parts.page >= page_count || parts.region >= region_count ||
        parts.segment >= (std::uint64_t{1} << kSegmentIndexBits))
        throw Error(ErrorCode::out_of_range, "address field exceeds its width");
    const std::uint64_t raw = (parts.segment << kSegmentBits) | (parts.region << region_bits) |
                              (parts.page << kPageBits) | parts.offset;
    if (raw == kNullRaw)
        throw Error(ErrorCode::out_of_range, "tuple packs to the null address");
    return LogicalAddress{raw};
}

AddressParts LogicalAddress::unpack(unsigned region_bits) const {
    AddressParts p;
    p.offset = raw_ & (kPageSize - 1);
    p.page = (raw_ >> kPageBits) & ((std::uint64_t{1} << (region_bits - kPageBits)) - 1);
    p.region = (raw_ >> region_bits) & ((std::uint64_t{1} << (kSegmentBits - region_bits)) - 1);
    p.segment = raw_ >> kSegmentBits;
    return p;
}

} // namespace ltkv
