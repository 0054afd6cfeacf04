// ltkv: administration, benchmarking, tree statistics and crash testing.
#include "bench/crash.hpp"
#include "bench/db.hpp"
#include "bench/runner.hpp"
#include "bench/workload.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

using namespace ltkv::bench;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct ConfigFlags {
    std::uint32_t branching = 256;
    std::uint32_t sluggishness = 16;
    std::uint32_t region_bits = 24;
    std::uint32_t chunk = 32 * 1024;
    std::string hash = "blake2b";
    std::string durability = "fsync";
    std::uint64_t memory_budget = 0;
    std::uint64_t scan_limit = 100;
    std::uint64_t checkpoint_bytes = 64ull << 20;
    std::uint64_t block_cache_bytes = 64ull << 20;

    void add_creation(CLI::App* cmd) {
        cmd->add_option("-b,--branching", branching, "branching factor (64, 128, 256)");
        cmd->add_option("-s,--sluggishness", sluggishness, "max distinct hashes per leaf chain");
        cmd->add_option("--region-bits", region_bits, "log2 of the region size (16..24)");
        cmd->add_option("--chunk", chunk, "WAL chunk size in bytes");
        cmd->add_option("--hash", hash, "blake2b or raw (test only)")->check(CLI::IsMember({"blake2b", "raw"}));
    }
    void add_runtime(CLI::App* cmd) {
        cmd->add_option("--durability", durability, "fsync or process")->check(CLI::IsMember({"fsync", "process"}));
        cmd->add_option("--memory-budget", memory_budget, "max mapped regions, 0 = unlimited");
        cmd->add_option("--scan-limit", scan_limit, "next-fit scan steps, 0 = unlimited");
        cmd->add_option("--checkpoint-bytes", checkpoint_bytes, "unpruned WAL bytes that trigger a checkpoint");
        cmd->add_option("--block-cache-bytes", block_cache_bytes, "write-back cache size in bytes");
    }
    ltkv_config build() const {
        ltkv_config c;
        ltkv_config_default(&c);
        c.branching_factor = branching;
        c.sluggishness = sluggishness;
        c.region_size_bits = region_bits;
        c.wal_chunk_size = chunk;
        c.hash_kind = hash == "raw" ? LTKV_HASH_RAW_PREFIX : LTKV_HASH_KEYED_BLAKE2B;
        c.durability = durability == "process" ? LTKV_DURABILITY_PROCESS : LTKV_DURABILITY_FSYNC;
        c.memory_budget = memory_budget ? memory_budget : LTKV_UNLIMITED;
        c.scan_limit = scan_limit ? scan_limit : LTKV_UNLIMITED;
        c.checkpoint_wal_bytes = checkpoint_bytes;
        c.block_cache_bytes = block_cache_bytes;
        return c;
    }
};

std::vector<unsigned> parse_list(const std::string& s) {
    std::vector<unsigned> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t end = s.find(',', pos);
        if (end == std::string::npos)
            end = s.size();
        out.push_back(static_cast<unsigned>(std::stoul(s.substr(pos, end - pos))));
        pos = end + 1;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ltkv embedded key-value store tool"};
    app.require_subcommand(1);
    ConfigFlags flags;
    std::string dir;

    auto* create = app.add_subcommand("create", "create an empty store");
    create->add_option("dir", dir)->required();
    flags.add_creation(create);
    flags.add_runtime(create);

    std::uint64_t pop_n = 0, pop_seed = 1;
    std::size_t pop_batch = 256;
    std::string pop_value = "128";
    auto* pop = app.add_subcommand("populate", "insert n deterministic items, creating the store if needed");
    pop->add_option("dir", dir)->required();
    pop->add_option("-n,--count", pop_n, "number of items")->required();
    pop->add_option("--value-size", pop_value, "byte count, 'choice' or 'zipf'");
    pop->add_option("--seed", pop_seed, "key universe seed");
    pop->add_option("--batch", pop_batch, "puts per batch")->check(CLI::PositiveNumber);
    flags.add_creation(pop);
    flags.add_runtime(pop);

    std::string key, value;
    auto* get = app.add_subcommand("get", "print the value of a key");
    get->add_option("dir", dir)->required();
    get->add_option("key", key)->required();
    auto* put = app.add_subcommand("put", "store a value");
    put->add_option("dir", dir)->required();
    put->add_option("key", key)->required();
    put->add_option("value", value)->required();
    auto* del = app.add_subcommand("del", "delete a key");
    del->add_option("dir", dir)->required();
    del->add_option("key", key)->required();
    for (auto* c : {get, put, del})
        flags.add_runtime(c);

    WorkloadSpec spec;
    std::string workload, dist = "uniform", bench_value = "128";
    std::uint64_t bench_populate = 0;
    bool no_latency = false;
    auto* bench = app.add_subcommand("bench", "run a workload and report throughput and latency");
    bench->add_option("dir", dir)->required();
    bench->add_option("-w,--workload", workload, "preset: M, A, B, I, D, U, R");
    bench->add_option("--lookup", spec.lookup, "lookup percent");
    bench->add_option("--insert", spec.insert, "insert percent");
    bench->add_option("--update", spec.update, "update percent");
    bench->add_option("--delete", spec.remove, "delete percent");
    bench->add_option("--dist", dist, "uniform or zipfian")->check(CLI::IsMember({"uniform", "zipfian"}));
    bench->add_option("--theta", spec.theta, "zipfian exponent");
    bench->add_option("--keys", spec.keys, "populated key range");
    bench->add_option("--ops", spec.ops, "total ops across threads");
    bench->add_option("--threads", spec.threads, "client threads");
    bench->add_flag("--partition", spec.partition, "give each thread a disjoint key slice");
    bench->add_option("--value-size", bench_value, "byte count, 'choice' or 'zipf'");
    bench->add_option("--seed", spec.seed, "key universe seed");
    bench->add_option("--stream-seed", spec.stream_seed, "op stream seed");
    bench->add_option("--populate", bench_populate, "populate this many keys first");
    bench->add_flag("--no-latency", no_latency, "skip per-op timing");
    flags.add_creation(bench);
    flags.add_runtime(bench);

    bool sweep = false, json = false;
    SweepSpec sw;
    std::string s_list = "1,2,4,8,16", csv_path;
    auto* stats = app.add_subcommand("stats", "walk the trie and report its statistics");
    stats->add_option("dir", dir, "store directory (sweep mode: scratch directory)");
    stats->add_flag("--sweep", sweep, "grow fresh stores and emit a CSV across n and s");
    stats->add_option("--sweep-b", sw.branching, "sweep branching factor");
    stats->add_option("--sweep-s", s_list, "comma separated sluggishness values");
    stats->add_option("--max-n", sw.max_n, "largest n in the sweep");
    stats->add_option("--points-per-decade", sw.points_per_decade, "sweep resolution");
    stats->add_option("--csv", csv_path, "CSV output file (default stdout)");
    stats->add_flag("--json", json, "print JSON instead of text");
    flags.add_runtime(stats);

    CrashSpec cs;
    std::string sizes = "1,2,4,8";
    unsigned runs = 3;
    bool skip_recovery = false, verbose = false;
    auto* crash = app.add_subcommand("crashtest", "crash a child at random points and verify every recovery");
    crash->add_option("dir", dir, "scratch directory (must not exist)")->required();
    crash->add_option("--ops", cs.ops, "script steps");
    crash->add_option("--points", cs.points, "crash points")->check(CLI::PositiveNumber);
    crash->add_option("--keys", cs.keys, "script key space");
    crash->add_option("--seed", cs.seed, "script seed");
    crash->add_option("--recovery-sizes", sizes, "unpruned log sizes in MiB for the timing fit");
    crash->add_option("--runs", runs, "timed opens per log size");
    crash->add_flag("--skip-recovery-timing", skip_recovery);
    crash->add_flag("-v,--verbose", verbose, "print every crash point");
    flags.add_creation(crash);
    flags.add_runtime(crash);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kOk : kUsage;
    }

    try {
        ltkv_config cfg = flags.build();
        if (*create) {
            Db::create(dir, cfg).close();
            return kOk;
        }
        if (*pop) {
            Db db = Db::open_or_create(dir, cfg);
            const auto r = populate(db, pop_n, ValueSize::parse(pop_value), pop_seed, pop_batch);
            db.close();
            std::cout << "inserted " << r.inserted << " updated " << r.updated << " in " << r.seconds << " s\n";
            return kOk;
        }
        if (*get) {
            Db db = Db::open(dir, &cfg);
            auto v = db.get(key);
            if (!v) {
                std::cerr << "not found\n";
                return kFailure;
            }
            std::cout << *v << "\n";
            return kOk;
        }
        if (*put) {
            Db db = Db::open(dir, &cfg);
            std::cout << (db.put(key, value) ? "updated" : "inserted") << "\n";
            return kOk;
        }
        if (*del) {
            Db db = Db::open(dir, &cfg);
            if (!db.del(key)) {
                std::cerr << "not found\n";
                return kFailure;
            }
            std::cout << "deleted\n";
            return kOk;
        }
        if (*bench) {
            if (!workload.empty()) {
                auto preset = WorkloadSpec::letter(workload[0]);
                if (!preset || workload.size() != 1) {
                    std::cerr << "unknown workload " << workload << "\n";
                    return kUsage;
                }
                spec.lookup = preset->lookup;
                spec.insert = preset->insert;
                spec.update = preset->update;
                spec.remove = preset->remove;
            }
            spec.dist = dist == "zipfian" ? KeyDist::zipfian : KeyDist::uniform;
            try {
                spec.value = ValueSize::parse(bench_value);
                spec.validate();
            } catch (const std::invalid_argument& e) {
                std::cerr << e.what() << "\n";
                return kUsage;
            }
            Db db = Db::open_or_create(dir, cfg);
            if (bench_populate) {
                const auto r = populate(db, bench_populate, spec.value, spec.seed);
                std::cout << "populated " << r.inserted + r.updated << " in " << r.seconds << " s\n";
            }
            const auto rep = run_bench(db, spec, !no_latency);
            print_report(std::cout, spec, rep);
            db.close();
            return kOk;
        }
        if (*stats) {
            if (sweep) {
                sw.sluggishness = parse_list(s_list);
                sw.work_dir = dir;
                const auto rows = run_sweep(sw, &std::cerr);
                if (csv_path.empty()) {
                    write_sweep_csv(std::cout, rows);
                } else {
                    std::ofstream out(csv_path);
                    write_sweep_csv(out, rows);
                }
                return kOk;
            }
            if (dir.empty()) {
                std::cerr << "stats needs a store directory\n";
                return kUsage;
            }
            Db db = Db::open(dir, &cfg);
            const ltkv_stats st = db.stats();
            if (json) {
                nlohmann::json j;
                j["records"] = st.records;
                j["nodes"] = st.nodes;
                j["free_nodes"] = st.free_nodes;
                j["branching_factor"] = st.branching_factor;
                j["sluggishness"] = st.sluggishness;
                j["avg_path_length"] = st.avg_path_length;
                j["max_path_length"] = st.max_path_length;
                j["utilization"] = st.utilization;
                j["max_chain_distinct"] = st.max_chain_distinct;
                j["tree_node_bytes"] = st.tree_node_bytes;
                j["metadata_bytes"] = st.metadata_bytes;
                j["user_bytes"] = st.user_bytes;
                j["overhead_bytes"] = st.overhead_bytes;
                j["hole_bytes"] = st.hole_bytes;
                j["holes"] = st.holes;
                j["adjacent_holes"] = st.adjacent_holes;
                j["tails"] = {st.tails[0], st.tails[1], st.tails[2], st.tails[3]};
                j["disk_usage"] = st.disk_usage;
                j["recycled_ratio"] = st.recycled_ratio;
                j["conserved"] = st.conserved == 1;
                j["violations"] = st.violations;
                std::cout << j.dump(2) << "\n";
            }
            else
                print_stats(std::cout, st);
            return st.conserved && st.violations == 0 ? kOk : kFailure;
        }
        if (*crash) {
            if (std::filesystem::exists(dir)) {
                std::cerr << dir << " already exists\n";
                return kUsage;
            }
            cs.config = cfg;
            const auto m = run_crash_matrix(dir, cs, verbose ? &std::cout : nullptr);
            std::cout << "crash points " << m.passed() << "/" << cs.points << " passed, " << m.steps_completed << "/"
                      << cs.ops << " steps\n";
            for (const auto& p : m.points)
                if (!p.ok)
                    std::cout << "point " << p.index << " (" << kill_mode_name(p.mode) << ") failed: " << p.detail
                              << "\n";
            bool ok = m.passed() == cs.points;
            if (!skip_recovery) {
                std::vector<std::uint64_t> targets;
                for (unsigned mib : parse_list(sizes))
                    targets.push_back(std::uint64_t{mib} << 20);
                const auto samples = measure_recovery(dir + ".recovery", targets, runs);
                std::filesystem::remove_all(dir + ".recovery");
                std::vector<double> x, y;
                for (const auto& s : samples) {
                    std::cout << "recovery " << s.log_bytes << " log bytes, " << s.records << " records: "
                              << s.seconds * 1e3 << " ms\n";
                    x.push_back(double(s.log_bytes));
                    y.push_back(s.seconds);
                }
                const double r2 = r_squared(x, y);
                std::cout << "recovery time linear fit R^2 " << r2 << "\n";
                ok = ok && r2 >= 0.95;
            }
            std::filesystem::remove_all(dir);
            return ok ? kOk : kFailure;
        }
    } catch (const ltkv::bench::StoreError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}
