#pragma once

#include "db.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace ltkv::bench {

// One script step: a single put/delete, or a batch of them applied atomically.
struct ScriptOp {
    struct Sub {
        bool put;
        std::uint32_t key;
        std::uint32_t value_len;
    };
    std::vector<Sub> subs;
};

struct CrashSpec {
    std::uint64_t ops = 100000;
    unsigned points = 100;
    std::uint32_t keys = 10000;
    double batch_fraction = 0.1; // share of steps that are 2..8 op batches
    unsigned put_percent = 70;
    std::uint64_t seed = 42;
    ltkv_config config{}; // creation and runtime settings for the store
};

enum class KillMode { torn_wal, exit_after_ack, sigkill };
const char* kill_mode_name(KillMode m);

struct CrashPoint {
    unsigned index = 0;
    KillMode mode = KillMode::torn_wal;
    std::uint64_t start = 0;      // first script step the child ran
    std::int64_t last_acked = -1; // last step the journal shows acknowledged
    std::uint64_t resumed_at = 0; // step the next child starts from
    int status = 0;               // waitpid status of the child
    bool in_flight_applied = false;
    double recovery_seconds = 0;
    std::uint64_t recovered_log_bytes = 0;
    bool ok = false;
    std::string detail;
};

struct CrashMatrix {
    std::vector<CrashPoint> points;
    std::uint64_t steps_completed = 0;
    unsigned passed() const;
    bool all_passed() const { return passed() == points.size(); }
};

using Model = std::unordered_map<std::string, std::string>;

std::vector<ScriptOp> make_script(const CrashSpec& spec);
std::string script_key(const CrashSpec& spec, std::uint32_t k);
std::string script_value(const CrashSpec& spec, std::uint64_t step, std::size_t sub, std::uint32_t len);
void apply_step(Model& m, const CrashSpec& spec, const std::vector<ScriptOp>& script, std::uint64_t step);
Model snapshot(Db& db);

// Forks children that run the script against dir and crash them at random
// points; after each crash the parent reopens the store and checks it equals
// the model after the last acknowledged step, or after the step in flight.
// dir must not hold a store yet. No other threads may be running.
CrashMatrix run_crash_matrix(const std::string& dir, const CrashSpec& spec, std::ostream* progress = nullptr);

struct RecoverySample {
    std::uint64_t target_bytes = 0;
    std::uint64_t log_bytes = 0;
    std::uint64_t records = 0;
    double seconds = 0; // best of the runs
};

// Builds a crashed store per target log size under work_dir, then times the
// recovering open of a fresh copy `runs` times.
std::vector<RecoverySample> measure_recovery(const std::string& work_dir, const std::vector<std::uint64_t>& targets,
                                             unsigned runs, std::uint64_t seed = 5);

// Coefficient of determination of the least-squares line through (x, y).
double r_squared(const std::vector<double>& x, const std::vector<double>& y);

} // namespace ltkv::bench
