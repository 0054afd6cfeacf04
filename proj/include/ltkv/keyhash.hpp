#pragma once

#include "ltkv/config.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <string_view>

namespace ltkv {

inline constexpr std::size_t kHashBytes = 32;
inline constexpr unsigned kHashBits = kHashBytes * 8;

struct KeyHash {
    std::array<std::uint8_t, kHashBytes> bytes{};

    friend bool operator==(const KeyHash&, const KeyHash&) = default;
    friend auto operator<=>(const KeyHash&, const KeyHash&) = default;
};

struct HashSeed {
    std::array<std::uint8_t, kHashBytes> bytes{};

    static HashSeed random();
    friend bool operator==(const HashSeed&, const HashSeed&) = default;
};

// Deterministic 256-bit digest of `key` under `seed`. Throws invalid_argument
// for an empty key.
KeyHash hash_key(std::string_view key, const HashSeed& seed, HashKind kind = HashKind::keyed_blake2b);

// Bits per trie character for branching factor b (a power of two).
constexpr unsigned char_bits(unsigned b) {
    unsigned w = 0;
    while ((1u << w) < b)
        ++w;
    return w;
}

// Number of whole characters a digest holds at branching factor b.
constexpr unsigned max_depth(unsigned b) { return kHashBits / char_bits(b); }

// The depth-th log2(b)-bit group of the digest, most significant bit first in
// byte order. Throws out_of_range when depth >= max_depth(b).
unsigned char_at(const KeyHash& h, unsigned depth, unsigned b);

// Unchecked variant for the hot path; requires depth < max_depth(b).
inline unsigned char_at_unchecked(const KeyHash& h, unsigned depth, unsigned bits) {
    if (bits == 8)
        return h.bytes[depth];
    const unsigned bit = depth * bits;
    const unsigned byte = bit >> 3;
    unsigned window = unsigned(h.bytes[byte]) << 8;
    if (byte + 1 < kHashBytes)
        window |= h.bytes[byte + 1];
    const unsigned shift = 16 - (bit & 7) - bits;
    return (window >> shift) & ((1u << bits) - 1);
}

} // namespace ltkv
