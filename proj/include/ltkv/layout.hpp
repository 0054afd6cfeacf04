#pragma once

#include "ltkv/keyhash.hpp"
#include "ltkv/spaces.hpp"

#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>

namespace ltkv {

// Tree node:
//   parent   u64                @0
//   lock     8 bytes (volatile) @8
//   chd_mask b bits             @16
//   data_mask b bits            @16 + b/8
//   children b x u64            @16 + b/4
struct NodeLayout {
    unsigned b = 256;
    unsigned bits = 8;
    std::size_t mask_bytes = 32;
    std::size_t size = 2128;

    static NodeLayout for_branching(unsigned b) {
        NodeLayout l;
        l.b = b;
        l.bits = char_bits(b);
        l.mask_bytes = b / 8;
        l.size = 16 + 2 * l.mask_bytes + 8 * std::size_t{b};
        return l;
    }

    static constexpr std::size_t kParentOff = 0;
    static constexpr std::size_t kLockOff = 8;
    static constexpr std::size_t kChdOff = 16;
    std::size_t data_off() const { return kChdOff + mask_bytes; }
    std::size_t child_off(unsigned c) const { return kChdOff + 2 * mask_bytes + 8 * std::size_t{c}; }
    std::size_t mask_words() const { return mask_bytes / 8; }
};

// Data envelope: [header u64][body][footer u64]. The header's low 32 bits hold
// the envelope size; bit 63 marks a hole, bits 32..62 its descriptor index.
namespace envelope {
inline constexpr std::uint64_t kOverhead = 16;
inline constexpr std::uint64_t kAlign = 16;
inline constexpr std::uint64_t kFreeBit = std::uint64_t{1} << 63;
inline constexpr std::uint64_t kMinSplit = kOverhead + 16;

inline std::uint64_t make_header(std::uint64_t size, bool free, std::uint64_t desc = 0) {
    return (size & 0xFFFFFFFFu) | (free ? kFreeBit | ((desc & 0x7FFFFFFFu) << 32) : 0);
}
inline std::uint64_t size_of(std::uint64_t header) { return header & 0xFFFFFFFFu; }
inline bool is_free(std::uint64_t header) { return header & kFreeBit; }
inline std::uint64_t desc_of(std::uint64_t header) { return (header >> 32) & 0x7FFFFFFFu; }
inline std::uint64_t round_up(std::uint64_t n) { return (n + kAlign - 1) / kAlign * kAlign; }
} // namespace envelope

// Record body, stored right after the envelope header.
namespace record {
inline constexpr std::size_t kHkeyOff = 0;
inline constexpr std::size_t kKeySizeOff = 32;
inline constexpr std::size_t kValSizeOff = 36;
inline constexpr std::size_t kNextOff = 40;
inline constexpr std::size_t kHeaderSize = 48;
} // namespace record

inline std::uint64_t atomic_load_u64(const std::uint8_t* p) {
    return std::atomic_ref<std::uint64_t>(*reinterpret_cast<std::uint64_t*>(const_cast<std::uint8_t*>(p)))
        .load(std::memory_order_relaxed);
}

// A pinned view of one tree node.
class NodeRef {
public:
    NodeRef() = default;
    NodeRef(Pin pin, std::uint64_t addr, const NodeLayout* layout)
        : pin_(std::move(pin)), addr_(addr), l_(layout), p_(pin_.at(addr)) {}

    explicit operator bool() const { return p_ != nullptr; }
    std::uint64_t addr() const { return addr_; }
    const Pin& pin() const { return pin_; }
    std::uint8_t* raw() const { return p_; }

    std::uint64_t parent() const { return atomic_load_u64(p_ + NodeLayout::kParentOff); }
    std::uint64_t mask_word(std::size_t mask_off, unsigned w) const { return atomic_load_u64(p_ + mask_off + 8 * w); }
    bool has(unsigned c) const { return (mask_word(NodeLayout::kChdOff, c / 64) >> (c % 64)) & 1; }
    bool is_data(unsigned c) const { return (mask_word(l_->data_off(), c / 64) >> (c % 64)) & 1; }
    std::uint64_t child(unsigned c) const { return atomic_load_u64(p_ + l_->child_off(c)); }
    unsigned child_count() const {
        unsigned n = 0;
        for (unsigned w = 0; w < l_->mask_words(); ++w)
            n += std::popcount(mask_word(NodeLayout::kChdOff, w));
        return n;
    }
    void* lock_slot() const { return p_ + NodeLayout::kLockOff; }

private:
    Pin pin_;
    std::uint64_t addr_ = kNullAddress;
    const NodeLayout* l_ = nullptr;
    std::uint8_t* p_ = nullptr;
};

} // namespace ltkv
