#pragma once

#include <cstdint>
#include <limits>

namespace ltkv {

inline constexpr std::uint64_t kPageBits = 12;
inline constexpr std::uint64_t kPageSize = std::uint64_t{1} << kPageBits;
// Every segment file is 1 GiB.
inline constexpr std::uint64_t kSegmentBits = 30;
inline constexpr std::uint64_t kSegmentSize = std::uint64_t{1} << kSegmentBits;
inline constexpr std::uint64_t kSegmentIndexBits = 64 - kSegmentBits;

struct AddressParts {
    std::uint64_t segment = 0;
    std::uint64_t region = 0; // region within segment
    std::uint64_t page = 0;   // page within region
    std::uint64_t offset = 0; // byte within page

    friend bool operator==(const AddressParts&, const AddressParts&) = default;
};

// 64-bit address into one logical space:
//   [segment : 34][region : 30-k][page : k-12][offset : 12]
// The packed value is also the linear byte offset within the space.
class LogicalAddress {
public:
    static constexpr std::uint64_t kNullRaw = std::numeric_limits<std::uint64_t>::max();

    constexpr LogicalAddress() = default;
    constexpr explicit LogicalAddress(std::uint64_t raw) : raw_(raw) {}

    static constexpr LogicalAddress null() { return LogicalAddress{}; }

    // Throws out_of_range when a field exceeds its width or the tuple packs to null.
    static LogicalAddress pack(const AddressParts& parts, unsigned region_bits);
    AddressParts unpack(unsigned region_bits) const;

    constexpr std::uint64_t raw() const { return raw_; }
    constexpr bool is_null() const { return raw_ == kNullRaw; }

    friend constexpr bool operator==(LogicalAddress, LogicalAddress) = default;

private:
    std::uint64_t raw_ = kNullRaw;
};

inline constexpr std::uint64_t kNullAddress = LogicalAddress::kNullRaw;

} // namespace ltkv
