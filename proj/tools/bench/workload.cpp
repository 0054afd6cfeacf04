#include "workload.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ltkv::bench {

void make_key(std::uint64_t seed, std::uint64_t i, std::string& out) {
    static const char* hex = "0123456789abcdef";
    out.resize(kKeySize);
    std::uint64_t x = splitmix64(seed ^ splitmix64(i));
    std::uint64_t y = splitmix64(x ^ i);
    for (std::size_t j = 0; j < 16; ++j) {
        out[j] = hex[(x >> (4 * j)) & 15];
        out[16 + j] = hex[(y >> (4 * j)) & 15];
    }
}

std::string make_key(std::uint64_t seed, std::uint64_t i) {
    std::string k;
    make_key(seed, i, k);
    return k;
}

void make_value(std::uint64_t seed, std::uint64_t key, std::uint64_t version, std::size_t len, std::string& out) {
    out.resize(len);
    std::uint64_t x = splitmix64(seed * 31 + splitmix64(key) + version * 0x632be59bd9b4e019ull);
    for (std::size_t j = 0; j < len; j += 8) {
        x = splitmix64(x);
        const std::size_t m = std::min<std::size_t>(8, len - j);
        for (std::size_t b = 0; b < m; ++b)
            out[j + b] = static_cast<char>('!' + ((x >> (8 * b)) & 0xff) % 94);
    }
}

std::string make_value(std::uint64_t seed, std::uint64_t key, std::uint64_t version, std::size_t len) {
    std::string v;
    make_value(seed, key, version, len, v);
    return v;
}

ValueSize ValueSize::parse(const std::string& text) {
    ValueSize v;
    if (text == "choice") {
        v.kind = Kind::choice;
    } else if (text == "zipf") {
        v.kind = Kind::zipf;
    } else {
        std::size_t pos = 0;
        unsigned long n = 0;
        try {
            n = std::stoul(text, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != text.size() || n == 0 || n > (1u << 30))
            throw std::invalid_argument("value size must be a byte count, 'choice' or 'zipf'");
        v.bytes = static_cast<std::uint32_t>(n);
    }
    return v;
}

std::string ValueSize::describe() const {
    switch (kind) {
    case Kind::choice:
        return "choice{128,256,1024}";
    case Kind::zipf:
        return "zipf[128,256]";
    default:
        return std::to_string(bytes);
    }
}

std::uint32_t ValueSize::sample(Rng& rng) const {
    static const std::uint32_t choices[] = {128, 256, 1024};
    static const Zipfian sizes(129, 0.99);
    switch (kind) {
    case Kind::choice:
        return choices[rng.below(3)];
    case Kind::zipf:
        return 127 + static_cast<std::uint32_t>(sizes.sample(rng));
    default:
        return bytes;
    }
}

std::optional<WorkloadSpec> WorkloadSpec::letter(char c) {
    WorkloadSpec s;
    s.lookup = s.insert = s.update = s.remove = 0;
    switch (c) {
    case 'M':
    case 'A':
        s.lookup = 50;
        s.update = 50;
        break;
    case 'B':
        s.lookup = 95;
        s.update = 5;
        break;
    case 'I':
        s.insert = 100;
        break;
    case 'D':
        s.remove = 100;
        break;
    case 'U':
        s.update = 100;
        break;
    case 'R':
        s.lookup = 100;
        break;
    default:
        return std::nullopt;
    }
    return s;
}

void WorkloadSpec::validate() const {
    if (lookup + insert + update + remove != 100)
        throw std::invalid_argument("op mix percentages must sum to 100");
    if (dist == KeyDist::zipfian && !(theta > 0.0))
        throw std::invalid_argument("zipfian exponent must be positive");
    if (threads == 0)
        throw std::invalid_argument("thread count must be positive");
    if ((lookup + update + remove) > 0 && keys == 0)
        throw std::invalid_argument("lookups, updates and deletes need a populated key range");
    if (partition && keys < threads)
        throw std::invalid_argument("fewer keys than threads with partitioning");
}

std::uint64_t WorkloadSpec::ops_for_thread(unsigned t) const {
    return ops / threads + (t < ops % threads ? 1 : 0);
}

OpStream::OpStream(const WorkloadSpec& spec, unsigned thread)
    : spec_(spec), thread_(thread), rng_(splitmix64(spec.stream_seed) ^ splitmix64(thread + 1)) {
    if (spec.partition) {
        lo_ = spec.keys * thread / spec.threads;
        hi_ = spec.keys * (thread + 1) / spec.threads;
    } else {
        lo_ = 0;
        hi_ = spec.keys;
    }
    if (spec.dist == KeyDist::zipfian && hi_ > lo_)
        zipf_.emplace(hi_ - lo_, spec.theta);
}

std::uint64_t OpStream::pick() {
    if (hi_ == lo_)
        return lo_;
    if (zipf_)
        return lo_ + zipf_->sample(rng_) - 1;
    return lo_ + rng_.below(hi_ - lo_);
}

Op OpStream::next() {
    const std::uint64_t r = rng_.below(100);
    Op op{};
    if (r < spec_.lookup) {
        op.kind = OpKind::lookup;
        op.key = pick();
    } else if (r < spec_.lookup + spec_.insert) {
        // Fresh keys above the populated range, interleaved across threads.
        op.kind = OpKind::insert;
        op.key = spec_.keys + thread_ + std::uint64_t{spec_.threads} * inserted_++;
    } else if (r < spec_.lookup + spec_.insert + spec_.update) {
        op.kind = OpKind::update;
        op.key = pick();
    } else {
        op.kind = OpKind::remove;
        op.key = pick();
    }
    if (op.kind == OpKind::insert || op.kind == OpKind::update)
        op.value_len = spec_.value.sample(rng_);
    return op;
}

double rank_frequency_slope(const std::vector<std::uint64_t>& counts, std::uint64_t min_count) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (std::size_t r = 0; r < counts.size(); ++r) {
        if (counts[r] < min_count)
            break;
        const double x = std::log(static_cast<double>(r + 1));
        const double y = std::log(static_cast<double>(counts[r]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m < 2)
        return 0.0;
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

} // namespace ltkv::bench
