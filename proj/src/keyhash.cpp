#include "ltkv/keyhash.hpp"

#include "ltkv/error.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstring>
#include <mutex>
#include <string>

namespace ltkv {

namespace {

void init_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0)
            throw Error(ErrorCode::io_error, "libsodium initialization failed");
    });
}

} // namespace

HashSeed HashSeed::random() {
    init_sodium();
    HashSeed seed;
    randombytes_buf(seed.bytes.data(), seed.bytes.size());
    return seed;
}

KeyHash hash_key(std::string_view key, const HashSeed& seed, HashKind kind) {
    if (key.empty())
        throw Error(ErrorCode::invalid_argument, "key must not be empty");
    KeyHash h;
    if (kind == HashKind::raw_prefix) {
        std::memcpy(h.bytes.data(), key.data(), std::min(key.size(), kHashBytes));
        return h;
    }
    init_sodium();
    // Keyed BLAKE2b; crypto_generichash never fails for these sizes.
    crypto_generichash(h.bytes.data(), h.bytes.size(),
                       reinterpret_cast<const unsigned char*>(key.data()), key.size(),
                       seed.bytes.data(), seed.bytes.size());
    return h;
}

unsigned char_at(const KeyHash& h, unsigned depth, unsigned b) {
    const unsigned bits = char_bits(b);
    if (b < 2 || (1u << bits) != b || bits > 8)
        throw Error(ErrorCode::invalid_argument, "branching factor must be a power of two <= 256");
    if (depth >= max_depth(b))
        throw Error(ErrorCode::out_of_range,
                    "character depth " + std::to_string(depth) + " exceeds digest width");
    return char_at_unchecked(h, depth, bits);
}

} // namespace ltkv
