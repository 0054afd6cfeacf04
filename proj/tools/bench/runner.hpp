#pragma once

#include "db.hpp"
#include "workload.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ltkv::bench {

struct PopulateResult {
    std::uint64_t inserted = 0;
    std::uint64_t updated = 0;
    double seconds = 0;
};

// Puts keys [0, n) of the seeded universe with version-0 values, in batches.
PopulateResult populate(Db& db, std::uint64_t n, const ValueSize& value, std::uint64_t seed, std::size_t batch = 256);

struct BenchReport {
    unsigned threads = 0;
    std::vector<std::uint64_t> ops_per_thread;
    std::uint64_t lookups = 0, hits = 0, inserts = 0, updates = 0, removes = 0;
    double seconds = 0;
    double ops_per_sec = 0;
    double p50_us = 0, p90_us = 0, p99_us = 0, p999_us = 0, max_us = 0;
    std::uint64_t disk_before = 0, disk_after = 0;

    double disk_amplification() const { return disk_before ? double(disk_after) / double(disk_before) : 0.0; }
    std::uint64_t total_ops() const;
};

// Runs the spec with one client thread per spec.threads against db.
BenchReport run_bench(Db& db, const WorkloadSpec& spec, bool record_latency = true);
void print_report(std::ostream& out, const WorkloadSpec& spec, const BenchReport& r);

struct SweepSpec {
    unsigned branching = 128;
    std::vector<unsigned> sluggishness{1, 2, 4, 8, 16};
    std::uint64_t max_n = 1000000;
    unsigned points_per_decade = 10;
    std::uint32_t region_bits = 24;
    std::uint64_t seed = 1;
    std::string work_dir; // scratch stores go here and are removed afterwards
};

struct SweepRow {
    unsigned b = 0, s = 0;
    std::uint64_t n = 0;
    double avg_path_length = 0;
    double utilization = 0;
    std::uint64_t tree_node_bytes = 0;
    std::uint64_t metadata_bytes = 0;
    std::uint64_t node_count = 0;
    std::uint64_t max_chain_distinct = 0;
};

// n values for the sweep: points_per_decade per power of ten, from 10 up to
// max_n, always including every exact power of ten.
std::vector<std::uint64_t> sweep_points(std::uint64_t max_n, unsigned points_per_decade);
std::vector<SweepRow> run_sweep(const SweepSpec& spec, std::ostream* progress = nullptr);

extern const char* const kSweepCsvHeader;
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

void print_stats(std::ostream& out, const ltkv_stats& st);

} // namespace ltkv::bench
