#include "ltkv/address.hpp"
#include "ltkv/error.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ltkv;

TEST(Address, RoundTripRandomAllRegionSizes) {
    std::mt19937_64 rng(1);
    for (unsigned k = 16; k <= 24; ++k) {
        for (int i = 0; i < 20000; ++i) {
            AddressParts p;
            p.segment = rng() & ((std::uint64_t{1} << 34) - 1);
            p.region = rng() & ((std::uint64_t{1} << (30 - k)) - 1);
            p.page = rng() & ((std::uint64_t{1} << (k - 12)) - 1);
            p.offset = rng() & 4095;
            if (p.segment == (std::uint64_t{1} << 34) - 1)
                continue;
            const auto a = LogicalAddress::pack(p, k);
            ASSERT_EQ(a.unpack(k), p);
            ASSERT_FALSE(a.is_null());
        }
    }
}

TEST(Address, PackedValueIsLinearOffset) {
    AddressParts p{2, 3, 5, 7};
    const unsigned k = 20;
    EXPECT_EQ(LogicalAddress::pack(p, k).raw(), 2 * kSegmentSize + (3ull << k) + 5 * 4096 + 7);
}

TEST(Address, FieldOverflowRejected) {
    EXPECT_THROW(LogicalAddress::pack({0, 0, 0, 4096}, 24), Error);
    EXPECT_THROW(LogicalAddress::pack({0, 0, 16, 0}, 16), Error);
    EXPECT_THROW(LogicalAddress::pack({0, 64, 0, 0}, 24), Error);
    EXPECT_THROW(LogicalAddress::pack({0, 0, 0, 0}, 31), Error);
    // all-ones is the null sentinel
    const std::uint64_t seg_max = (std::uint64_t{1} << 34) - 1;
    EXPECT_THROW(LogicalAddress::pack({seg_max, 63, 4095, 4095}, 24), Error);
    EXPECT_TRUE(LogicalAddress::null().is_null());
}
