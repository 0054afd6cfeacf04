#include "bench/crash.hpp"
#include "bench/db.hpp"
#include "bench/runner.hpp"
#include "bench/workload.hpp"
#include "bench/zipf.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace ltkv::bench;

namespace {

ltkv_config config() {
    ltkv_config c;
    ltkv_config_default(&c);
    c.branching_factor = 64;
    c.sluggishness = 4;
    c.region_size_bits = 20;
    c.durability = LTKV_DURABILITY_PROCESS;
    return c;
}

} // namespace

TEST(Rng, BelowStaysInRange) {
    Rng r(1);
    for (int i = 0; i < 100000; ++i) {
        ASSERT_LT(r.below(7), 7u);
        const double u = r.unit();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Zipf, MatchesExactPmf) {
    constexpr std::uint64_t n = 50;
    constexpr double theta = 0.99;
    Zipfian z(n, theta);
    Rng r(11);
    std::vector<double> counts(n + 1, 0);
    constexpr int draws = 1000000;
    for (int i = 0; i < draws; ++i)
        counts[z.sample(r)] += 1;
    double norm = 0;
    for (std::uint64_t k = 1; k <= n; ++k)
        norm += std::pow(double(k), -theta);
    double chi2 = 0;
    for (std::uint64_t k = 1; k <= n; ++k) {
        const double e = draws * std::pow(double(k), -theta) / norm;
        chi2 += (counts[k] - e) * (counts[k] - e) / e;
    }
    EXPECT_LT(chi2, 85.35); // chi-square, 49 df, p = 0.001
    EXPECT_EQ(counts[0], 0);
}

TEST(Zipf, RankFrequencySlope) {
    Zipfian z(10000, 0.99);
    Rng r(3);
    std::vector<std::uint64_t> counts(10001, 0);
    for (int i = 0; i < 1000000; ++i)
        ++counts[z.sample(r)];
    std::vector<std::uint64_t> by_rank(counts.begin() + 1, counts.end());
    const double slope = rank_frequency_slope(by_rank, 20);
    EXPECT_NEAR(slope, -0.99, 0.99 * 0.05);
}

TEST(Zipf, RejectsBadParameters) {
    EXPECT_THROW(Zipfian(0, 0.99), std::invalid_argument);
    EXPECT_THROW(Zipfian(10, 0), std::invalid_argument);
}

TEST(Workload, KeysAreDeterministicHex) {
    EXPECT_EQ(make_key(1, 5), make_key(1, 5));
    EXPECT_NE(make_key(1, 5), make_key(2, 5));
    const auto k = make_key(9, 123);
    EXPECT_EQ(k.size(), kKeySize);
    EXPECT_EQ(k.find_first_not_of("0123456789abcdef"), std::string::npos);
    std::set<std::string> seen;
    for (int i = 0; i < 10000; ++i)
        seen.insert(make_key(4, i));
    EXPECT_EQ(seen.size(), 10000u);
}

TEST(Workload, ValuesArePrintableAndVersioned) {
    const auto v = make_value(1, 2, 3, 200);
    EXPECT_EQ(v.size(), 200u);
    for (char c : v)
        EXPECT_TRUE(c >= 0x20 && c < 0x7f);
    EXPECT_EQ(v, make_value(1, 2, 3, 200));
    EXPECT_NE(v, make_value(1, 2, 4, 200));
}

TEST(Workload, ValueSizeParsing) {
    Rng r(1);
    EXPECT_EQ(ValueSize::parse("64").sample(r), 64u);
    const auto choice = ValueSize::parse("choice");
    std::set<std::uint32_t> sizes;
    for (int i = 0; i < 1000; ++i)
        sizes.insert(choice.sample(r));
    EXPECT_EQ(sizes, (std::set<std::uint32_t>{128, 256, 1024}));
    const auto zipf = ValueSize::parse("zipf");
    for (int i = 0; i < 1000; ++i) {
        const auto s = zipf.sample(r);
        ASSERT_GE(s, 128u);
        ASSERT_LE(s, 256u);
    }
    EXPECT_THROW(ValueSize::parse("big"), std::invalid_argument);
}

TEST(Workload, StreamsAreDeterministicAndPartitioned) {
    WorkloadSpec spec;
    spec.threads = 4;
    spec.partition = true;
    spec.keys = 1000;
    OpStream a(spec, 2), b(spec, 2);
    for (int i = 0; i < 1000; ++i) {
        const Op x = a.next(), y = b.next();
        ASSERT_EQ(x.key, y.key);
        ASSERT_EQ(int(x.kind), int(y.kind));
        ASSERT_GE(x.key, a.lo());
        ASSERT_LT(x.key, a.hi());
    }
    EXPECT_EQ(a.lo(), 500u);
    EXPECT_EQ(a.hi(), 750u);
    std::uint64_t total = 0;
    spec.ops = 10;
    for (unsigned t = 0; t < 4; ++t)
        total += spec.ops_for_thread(t);
    EXPECT_EQ(total, 10u);
}

TEST(Workload, PresetsAndValidation) {
    const auto m = WorkloadSpec::letter('M');
    ASSERT_TRUE(m);
    EXPECT_EQ(m->lookup, 50u);
    EXPECT_EQ(m->update, 50u);
    EXPECT_FALSE(WorkloadSpec::letter('Z'));
    WorkloadSpec bad;
    bad.lookup = 60;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Runner, SweepPoints) {
    const auto p = sweep_points(1000, 10);
    EXPECT_EQ(p.front(), 10u);
    EXPECT_EQ(p.back(), 1000u);
    for (std::uint64_t pow10 : {10u, 100u, 1000u})
        EXPECT_TRUE(std::find(p.begin(), p.end(), pow10) != p.end());
    EXPECT_TRUE(std::is_sorted(p.begin(), p.end()));
    EXPECT_EQ(std::adjacent_find(p.begin(), p.end()), p.end());
}

TEST(Runner, PopulateTwiceReportsUpdates) {
    testutil::TempDir d;
    auto db = Db::create(d.sub("s"), config());
    const auto first = populate(db, 1000, ValueSize{}, 1);
    EXPECT_EQ(first.inserted, 1000u);
    const auto second = populate(db, 1000, ValueSize{}, 1);
    EXPECT_EQ(second.inserted, 0u);
    EXPECT_EQ(second.updated, 1000u);
    EXPECT_EQ(db.stats().records, 1000u);
}

TEST(Runner, BenchCountsOps) {
    testutil::TempDir d;
    auto db = Db::create(d.sub("s"), config());
    populate(db, 1000, ValueSize{}, 1);
    WorkloadSpec spec;
    spec.keys = 1000;
    spec.ops = 5000;
    spec.threads = 2;
    const auto r = run_bench(db, spec);
    EXPECT_EQ(r.total_ops(), 5000u);
    EXPECT_EQ(r.lookups, r.hits); // only populated keys are looked up
    EXPECT_GT(r.ops_per_sec, 0);
    std::ostringstream out;
    print_report(out, spec, r);
    EXPECT_NE(out.str().find("ops/s"), std::string::npos);
}

TEST(Runner, EmptyStoreStats) {
    testutil::TempDir d;
    auto db = Db::create(d.sub("s"), config());
    const auto s = db.stats();
    EXPECT_EQ(s.records, 0u);
    EXPECT_EQ(s.avg_path_length, 0.0);
    EXPECT_EQ(s.nodes, 1u);
    EXPECT_EQ(s.conserved, 1);
}

TEST(Runner, SmallSweepCsv) {
    testutil::TempDir d;
    SweepSpec spec;
    spec.branching = 64;
    spec.sluggishness = {1, 4};
    spec.max_n = 1000;
    spec.points_per_decade = 2;
    spec.region_bits = 20;
    spec.work_dir = d.path();
    const auto rows = run_sweep(spec);
    EXPECT_EQ(rows.size(), 2 * sweep_points(1000, 2).size());
    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), kSweepCsvHeader);
    for (const auto& r : rows)
        EXPECT_LE(r.max_chain_distinct, r.s);
}

TEST(Crash, RSquared) {
    EXPECT_NEAR(r_squared({1, 2, 3, 4}, {2, 4, 6, 8}), 1.0, 1e-12);
    EXPECT_LT(r_squared({1, 2, 3, 4}, {1, -1, 1, -1}), 0.5);
}

TEST(Crash, ScriptIsDeterministic) {
    CrashSpec spec;
    spec.ops = 1000;
    const auto a = make_script(spec), b = make_script(spec);
    ASSERT_EQ(a.size(), b.size());
    std::size_t batches = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].subs.size(), b[i].subs.size());
        batches += a[i].subs.size() > 1;
    }
    EXPECT_GT(batches, 50u);
    EXPECT_LT(batches, 150u);
}

TEST(Crash, SmallMatrixPasses) {
    testutil::TempDir d;
    CrashSpec spec;
    spec.ops = 2000;
    spec.points = 6;
    spec.keys = 300;
    spec.config = config();
    const auto m = run_crash_matrix(d.sub("s"), spec);
    EXPECT_EQ(m.points.size(), 6u);
    for (const auto& p : m.points)
        EXPECT_TRUE(p.ok) << p.index << " " << kill_mode_name(p.mode) << ": " << p.detail;
}
