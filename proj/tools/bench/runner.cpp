#include "runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

namespace ltkv::bench {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

PopulateResult populate(Db& db, std::uint64_t n, const ValueSize& value, std::uint64_t seed, std::size_t batch) {
    PopulateResult res;
    const auto t0 = Clock::now();
    Rng rng(splitmix64(seed) ^ 0x5eed);
    Batch b;
    std::string key, val;
    auto flush = [&] {
        if (b.size() == 0)
            return;
        for (std::uint8_t e : db.write(b))
            (e ? res.updated : res.inserted)++;
        b.clear();
    };
    for (std::uint64_t i = 0; i < n; ++i) {
        make_key(seed, i, key);
        make_value(seed, i, 0, value.sample(rng), val);
        b.put(key, val);
        if (b.size() >= batch)
            flush();
    }
    flush();
    res.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return res;
}

std::uint64_t BenchReport::total_ops() const {
    std::uint64_t s = 0;
    for (auto n : ops_per_thread)
        s += n;
    return s;
}

namespace {

struct ThreadResult {
    std::uint64_t ops = 0, lookups = 0, hits = 0, inserts = 0, updates = 0, removes = 0;
    std::vector<float> lat_us;
};

double percentile(const std::vector<float>& sorted, double q) {
    if (sorted.empty())
        return 0.0;
    const std::size_t i = std::min(sorted.size() - 1, static_cast<std::size_t>(q * sorted.size()));
    return sorted[i];
}

} // namespace

BenchReport run_bench(Db& db, const WorkloadSpec& spec, bool record_latency) {
    spec.validate();
    BenchReport rep;
    rep.threads = spec.threads;
    rep.disk_before = db.stats().disk_usage;

    std::vector<ThreadResult> results(spec.threads);
    std::atomic<unsigned> ready{0};
    std::atomic<bool> go{false};
    std::vector<std::thread> threads;
    std::exception_ptr error;
    std::mutex error_mu;

    auto body = [&](unsigned t) {
        ThreadResult& r = results[t];
        OpStream stream(spec, t);
        const std::uint64_t n = spec.ops_for_thread(t);
        if (record_latency)
            r.lat_us.reserve(n);
        std::string key, val;
        ready.fetch_add(1);
        while (!go.load(std::memory_order_acquire))
            std::this_thread::yield();
        try {
            for (std::uint64_t i = 0; i < n; ++i) {
                const Op op = stream.next();
                make_key(spec.seed, op.key, key);
                const auto start = record_latency ? Clock::now() : Clock::time_point{};
                switch (op.kind) {
                case OpKind::lookup:
                    ++r.lookups;
                    if (db.get(key))
                        ++r.hits;
                    break;
                case OpKind::insert:
                case OpKind::update:
                    make_value(spec.seed, op.key, i + 1 + (std::uint64_t{t} << 40), op.value_len, val);
                    db.put(key, val);
                    ++(op.kind == OpKind::insert ? r.inserts : r.updates);
                    break;
                case OpKind::remove:
                    db.del(key);
                    ++r.removes;
                    break;
                }
                if (record_latency)
                    r.lat_us.push_back(
                        std::chrono::duration<float, std::micro>(Clock::now() - start).count());
                ++r.ops;
            }
        } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error)
                error = std::current_exception();
        }
    };

    for (unsigned t = 0; t < spec.threads; ++t)
        threads.emplace_back(body, t);
    while (ready.load() < spec.threads)
        std::this_thread::yield();
    const auto t0 = Clock::now();
    go.store(true, std::memory_order_release);
    for (auto& th : threads)
        th.join();
    rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (error)
        std::rethrow_exception(error);

    std::vector<float> lat;
    for (auto& r : results) {
        rep.ops_per_thread.push_back(r.ops);
        rep.lookups += r.lookups;
        rep.hits += r.hits;
        rep.inserts += r.inserts;
        rep.updates += r.updates;
        rep.removes += r.removes;
        lat.insert(lat.end(), r.lat_us.begin(), r.lat_us.end());
    }
    rep.ops_per_sec = rep.seconds > 0 ? rep.total_ops() / rep.seconds : 0.0;
    std::sort(lat.begin(), lat.end());
    rep.p50_us = percentile(lat, 0.50);
    rep.p90_us = percentile(lat, 0.90);
    rep.p99_us = percentile(lat, 0.99);
    rep.p999_us = percentile(lat, 0.999);
    rep.max_us = lat.empty() ? 0.0 : lat.back();
    rep.disk_after = db.stats().disk_usage;
    return rep;
}

void print_report(std::ostream& out, const WorkloadSpec& spec, const BenchReport& r) {
    out << "mix            lookup " << spec.lookup << "% insert " << spec.insert << "% update " << spec.update
        << "% delete " << spec.remove << "%\n";
    out << "distribution   " << (spec.dist == KeyDist::zipfian ? "zipfian(" + std::to_string(spec.theta) + ")" : "uniform")
        << ", keys " << spec.keys << ", value " << spec.value.describe() << "\n";
    out << "threads        " << r.threads << (spec.partition ? " (partitioned)" : "") << ", ops/thread";
    for (auto n : r.ops_per_thread)
        out << ' ' << n;
    out << "\n";
    out << std::fixed << std::setprecision(3);
    out << "elapsed        " << r.seconds << " s\n";
    out << std::setprecision(0) << "throughput     " << r.ops_per_sec << " ops/s\n";
    out << std::setprecision(2) << "latency us     p50 " << r.p50_us << "  p90 " << r.p90_us << "  p99 " << r.p99_us
        << "  p99.9 " << r.p999_us << "  max " << r.max_us << "\n";
    if (r.lookups)
        out << "lookups        " << r.lookups << " (" << r.hits << " hits)\n";
    out << "disk           " << r.disk_before << " -> " << r.disk_after << " bytes (amp " << std::setprecision(3)
        << r.disk_amplification() << ")\n";
    out.unsetf(std::ios::floatfield);
}

std::vector<std::uint64_t> sweep_points(std::uint64_t max_n, unsigned ppd) {
    std::vector<std::uint64_t> pts;
    if (ppd == 0)
        ppd = 1;
    for (unsigned k = ppd;; ++k) {
        const auto n = static_cast<std::uint64_t>(std::llround(std::pow(10.0, double(k) / ppd)));
        if (n > max_n)
            break;
        if (pts.empty() || n != pts.back())
            pts.push_back(n);
    }
    if (pts.empty() || pts.back() != max_n)
        pts.push_back(max_n);
    return pts;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, std::ostream* progress) {
    std::vector<SweepRow> rows;
    const auto points = sweep_points(spec.max_n, spec.points_per_decade);
    const fs::path base = spec.work_dir.empty() ? fs::temp_directory_path() : fs::path(spec.work_dir);
    for (unsigned s : spec.sluggishness) {
        const fs::path dir = base / ("sweep-b" + std::to_string(spec.branching) + "-s" + std::to_string(s));
        fs::remove_all(dir);
        ltkv_config cfg;
        ltkv_config_default(&cfg);
        cfg.branching_factor = spec.branching;
        cfg.sluggishness = s;
        cfg.region_size_bits = spec.region_bits;
        cfg.durability = LTKV_DURABILITY_PROCESS;
        {
            Db db = Db::create(dir.string(), cfg);
            Batch b;
            std::string key, val;
            std::uint64_t have = 0;
            for (std::uint64_t n : points) {
                for (; have < n; ++have) {
                    make_key(spec.seed, have, key);
                    make_value(spec.seed, have, 0, kDefaultValueSize, val);
                    b.put(key, val);
                    if (b.size() >= 512) {
                        db.write(b);
                        b.clear();
                    }
                }
                if (b.size()) {
                    db.write(b);
                    b.clear();
                }
                const ltkv_stats st = db.stats();
                SweepRow row;
                row.b = spec.branching;
                row.s = s;
                row.n = n;
                row.avg_path_length = st.avg_path_length;
                row.utilization = st.utilization;
                row.tree_node_bytes = st.tree_node_bytes;
                row.metadata_bytes = st.metadata_bytes;
                row.node_count = st.nodes;
                row.max_chain_distinct = st.max_chain_distinct;
                rows.push_back(row);
            }
            db.close();
        }
        fs::remove_all(dir);
        if (progress)
            *progress << "sweep b=" << spec.branching << " s=" << s << " done\n";
    }
    return rows;
}

const char* const kSweepCsvHeader =
    "b,s,n,avg_path_length,utilization,tree_node_bytes,metadata_bytes,node_count,max_chain_distinct";

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << kSweepCsvHeader << "\n";
    for (const auto& r : rows)
        out << r.b << ',' << r.s << ',' << r.n << ',' << std::setprecision(6) << r.avg_path_length << ','
            << r.utilization << ',' << r.tree_node_bytes << ',' << r.metadata_bytes << ',' << r.node_count << ','
            << r.max_chain_distinct << "\n";
}

void print_stats(std::ostream& out, const ltkv_stats& st) {
    auto line = [&](const char* name, auto v) { out << std::left << std::setw(22) << name << v << "\n"; };
    line("branching_factor", st.branching_factor);
    line("sluggishness", st.sluggishness);
    line("records", st.records);
    line("tree_nodes", st.nodes);
    line("free_nodes", st.free_nodes);
    line("avg_path_length", st.avg_path_length);
    line("max_path_length", st.max_path_length);
    line("utilization", st.utilization);
    line("max_chain_distinct", st.max_chain_distinct);
    line("tree_node_bytes", st.tree_node_bytes);
    line("metadata_bytes", st.metadata_bytes);
    line("user_bytes", st.user_bytes);
    line("overhead_bytes", st.overhead_bytes);
    line("hole_bytes", st.hole_bytes);
    line("holes", st.holes);
    line("adjacent_holes", st.adjacent_holes);
    line("data_tail", st.tails[2]);
    line("disk_usage", st.disk_usage);
    line("recycled_ratio", st.recycled_ratio);
    line("conserved", st.conserved ? "yes" : "no");
    line("violations", st.violations);
}

} // namespace ltkv::bench
