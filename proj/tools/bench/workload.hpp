#pragma once

#include "rng.hpp"
#include "zipf.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ltkv::bench {

inline constexpr std::size_t kKeySize = 32;
inline constexpr std::uint32_t kDefaultValueSize = 128;

// Key i of a seeded key universe: 32 lowercase hex characters.
std::string make_key(std::uint64_t seed, std::uint64_t i);
void make_key(std::uint64_t seed, std::uint64_t i, std::string& out);
// Printable filler, a pure function of (seed, key, version, len).
void make_value(std::uint64_t seed, std::uint64_t key, std::uint64_t version, std::size_t len, std::string& out);
std::string make_value(std::uint64_t seed, std::uint64_t key, std::uint64_t version, std::size_t len);

struct ValueSize {
    enum class Kind { fixed, choice, zipf };
    Kind kind = Kind::fixed;
    std::uint32_t bytes = kDefaultValueSize;

    // "128", "choice" (uniform over 128/256/1024) or "zipf" (zipfian over 128..256).
    static ValueSize parse(const std::string& text);
    std::string describe() const;
    std::uint32_t sample(Rng& rng) const;
};

enum class KeyDist { uniform, zipfian };

struct WorkloadSpec {
    unsigned lookup = 50;
    unsigned insert = 0;
    unsigned update = 50;
    unsigned remove = 0;
    KeyDist dist = KeyDist::uniform;
    double theta = 0.99;
    std::uint64_t keys = 100000; // populated key range [0, keys)
    std::uint64_t ops = 100000;  // total across threads
    ValueSize value;
    unsigned threads = 1;
    bool partition = false; // thread t only touches its slice of [0, keys)
    std::uint64_t seed = 1;  // key universe seed, shared with populate
    std::uint64_t stream_seed = 7;

    // M: 50% lookups + 50% updates; I/D/U/R: pure insert/delete/update/lookup;
    // A and B follow the classic read/update splits (50/50, 95/5).
    static std::optional<WorkloadSpec> letter(char c);
    // Throws std::invalid_argument.
    void validate() const;
    std::uint64_t ops_for_thread(unsigned t) const;
};

enum class OpKind : std::uint8_t { lookup, insert, update, remove };

struct Op {
    OpKind kind;
    std::uint64_t key;
    std::uint32_t value_len;
};

// The op sequence of one bench thread; same spec and thread give the same
// sequence.
class OpStream {
public:
    OpStream(const WorkloadSpec& spec, unsigned thread);
    Op next();
    std::uint64_t lo() const { return lo_; }
    std::uint64_t hi() const { return hi_; }

private:
    std::uint64_t pick();

    const WorkloadSpec& spec_;
    unsigned thread_;
    Rng rng_;
    std::uint64_t lo_, hi_;
    std::optional<Zipfian> zipf_;
    std::uint64_t inserted_ = 0;
};

// Rank-frequency regression: least-squares slope of log(count) against
// log(rank) over ranks 1..max_rank with at least min_count hits.
double rank_frequency_slope(const std::vector<std::uint64_t>& counts_by_rank, std::uint64_t min_count);

} // namespace ltkv::bench
