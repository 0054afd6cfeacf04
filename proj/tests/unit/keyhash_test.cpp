#include "ltkv/error.hpp"
#include "ltkv/keyhash.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

using namespace ltkv;

namespace {

HashSeed seed_of(std::uint8_t v) {
    HashSeed s;
    s.bytes.fill(v);
    return s;
}

// Reads bits [depth*w, depth*w + w) of the digest one bit at a time.
unsigned bit_slice(const KeyHash& h, unsigned depth, unsigned w) {
    unsigned v = 0;
    for (unsigned i = 0; i < w; ++i) {
        const unsigned bit = depth * w + i;
        v = (v << 1) | ((h.bytes[bit / 8] >> (7 - bit % 8)) & 1u);
    }
    return v;
}

KeyHash random_digest(std::mt19937_64& rng) {
    KeyHash h;
    for (auto& b : h.bytes)
        b = static_cast<std::uint8_t>(rng());
    return h;
}

} // namespace

TEST(KeyHash, Deterministic) {
    const auto s = seed_of(7);
    EXPECT_EQ(hash_key("hello", s), hash_key("hello", s));
    EXPECT_NE(hash_key("hello", s), hash_key("hellp", s));
    EXPECT_NE(hash_key("hello", s), hash_key("hello", seed_of(8)));
}

TEST(KeyHash, FixedWidthForAnyKeyLength) {
    const auto s = seed_of(1);
    const std::string big(100000, 'x');
    EXPECT_EQ(hash_key(big, s).bytes.size(), 32u);
    EXPECT_NE(hash_key(big, s), hash_key(big.substr(1), s));
}

TEST(KeyHash, EmptyKeyRejected) {
    try {
        hash_key("", seed_of(1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    }
}

TEST(KeyHash, RandomSeedsDiffer) { EXPECT_NE(HashSeed::random(), HashSeed::random()); }

TEST(KeyHash, FirstCharacterChiSquare) {
    const auto s = seed_of(3);
    std::vector<std::uint64_t> hist(256);
    const int n = 1000000;
    for (int i = 0; i < n; ++i)
        ++hist[char_at(hash_key(std::to_string(i), s), 0, 256)];
    double chi = 0;
    const double expected = n / 256.0;
    for (auto c : hist)
        chi += (c - expected) * (c - expected) / expected;
    // chi-square, 255 degrees of freedom, alpha = 0.01
    EXPECT_LT(chi, 310.457);
}

TEST(KeyHash, ByteCharactersFollowDigest) {
    KeyHash h;
    h.bytes[0] = 0x42;
    h.bytes[1] = 0xa1;
    h.bytes[2] = 0x02;
    EXPECT_EQ(char_at(h, 0, 256), 0x42u);
    EXPECT_EQ(char_at(h, 1, 256), 0xa1u);
    EXPECT_EQ(char_at(h, 2, 256), 0x02u);

    // A raw-prefix digest carries the key bytes themselves.
    const KeyHash r = hash_key(std::string("\x42\xa1\x02zz", 5), HashSeed{}, HashKind::raw_prefix);
    EXPECT_EQ(char_at(r, 0, 256), 0x42u);
    EXPECT_EQ(char_at(r, 2, 256), 0x02u);
}

TEST(KeyHash, SlicingMatchesBitOracle) {
    std::mt19937_64 rng(11);
    for (unsigned b : {64u, 128u, 256u}) {
        const unsigned w = char_bits(b);
        for (int t = 0; t < 2000; ++t) {
            const KeyHash h = random_digest(rng);
            for (unsigned d = 0; d < max_depth(b); ++d) {
                const unsigned c = char_at(h, d, b);
                ASSERT_LT(c, b);
                ASSERT_EQ(c, bit_slice(h, d, w)) << "b=" << b << " depth=" << d;
            }
        }
    }
}

TEST(KeyHash, CharactersReconstructDigestBits) {
    std::mt19937_64 rng(5);
    const KeyHash h = random_digest(rng);
    const unsigned w = char_bits(64);
    // 42 six-bit characters cover the first 252 bits.
    std::vector<int> bits;
    for (unsigned d = 0; d < max_depth(64); ++d)
        for (int i = static_cast<int>(w) - 1; i >= 0; --i)
            bits.push_back((char_at(h, d, 64) >> i) & 1);
    for (std::size_t i = 0; i < bits.size(); ++i)
        ASSERT_EQ(bits[i], (h.bytes[i / 8] >> (7 - i % 8)) & 1) << i;
}

TEST(KeyHash, DepthBeyondDigestIsOutOfRange) {
    KeyHash h;
    EXPECT_THROW(char_at(h, 32, 256), Error);
    EXPECT_THROW(char_at(h, 42, 64), Error);
    EXPECT_NO_THROW(char_at(h, 41, 64));
    EXPECT_EQ(max_depth(128), 36u);
}

TEST(KeyHash, SharedPrefixProbability) {
    // P(two random digests share their first h characters) = b^-h.
    std::mt19937_64 rng(99);
    const int trials = 1000000;
    const unsigned b = 64;
    for (unsigned h : {1u, 2u}) {
        int hits = 0;
        for (int t = 0; t < trials; ++t) {
            const KeyHash x = random_digest(rng), y = random_digest(rng);
            bool same = true;
            for (unsigned d = 0; d < h && same; ++d)
                same = char_at(x, d, b) == char_at(y, d, b);
            hits += same;
        }
        const double p = std::pow(double(b), -double(h));
        const double se = std::sqrt(p * (1 - p) / trials);
        EXPECT_NEAR(double(hits) / trials, p, 3 * se) << "h=" << h;
    }
}
