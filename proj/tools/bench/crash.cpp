#include "crash.hpp"

#include "rng.hpp"
#include "workload.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>

namespace ltkv::bench {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kExitAfterAckCode = 87;
constexpr int kTornCode = 86; // the store's injected-crash exit status
constexpr int kChildErrorCode = 3;

struct JournalEntry {
    std::uint64_t step;
    std::uint64_t wal_bytes;
};

std::vector<JournalEntry> read_journal(const std::string& path) {
    std::vector<JournalEntry> out;
    const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0)
        return out;
    JournalEntry e;
    while (::read(fd, &e, sizeof e) == static_cast<ssize_t>(sizeof e))
        out.push_back(e);
    ::close(fd);
    return out;
}

std::uint64_t journal_entries(const std::string& path) {
    struct stat st {};
    if (::stat(path.c_str(), &st) != 0)
        return 0;
    return static_cast<std::uint64_t>(st.st_size) / sizeof(JournalEntry);
}

void run_step(Db& db, const CrashSpec& spec, const ScriptOp& op, std::uint64_t step) {
    if (op.subs.size() == 1) {
        const auto& s = op.subs[0];
        if (s.put)
            db.put(script_key(spec, s.key), script_value(spec, step, 0, s.value_len));
        else
            db.del(script_key(spec, s.key));
        return;
    }
    Batch b;
    for (std::size_t i = 0; i < op.subs.size(); ++i) {
        const auto& s = op.subs[i];
        if (s.put)
            b.put(script_key(spec, s.key), script_value(spec, step, i, s.value_len));
        else
            b.del(script_key(spec, s.key));
    }
    db.write(b);
}

[[noreturn]] void child_main(const std::string& dir, const CrashSpec& spec, const std::vector<ScriptOp>& script,
                             std::uint64_t start, std::int64_t exit_after, std::uint64_t crash_at,
                             const std::string& journal) {
    try {
        ltkv_config rt = spec.config;
        rt.crash_at_wal_byte = crash_at;
        Db db = Db::open(dir, &rt);
        const int jfd = ::open(journal.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_APPEND | O_CLOEXEC, 0644);
        if (jfd < 0)
            ::_exit(kChildErrorCode);
        for (std::uint64_t step = start; step < script.size(); ++step) {
            run_step(db, spec, script[step], step);
            const JournalEntry e{step, db.counters().wal_bytes};
            if (::write(jfd, &e, sizeof e) != static_cast<ssize_t>(sizeof e))
                ::_exit(kChildErrorCode);
            if (static_cast<std::int64_t>(step) == exit_after)
                ::_exit(kExitAfterAckCode);
        }
        db.close();
        ::_exit(0);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "crash child: %s\n", e.what());
    } catch (...) {
    }
    ::_exit(kChildErrorCode);
}

std::string describe_status(int status) {
    if (WIFEXITED(status))
        return "exit " + std::to_string(WEXITSTATUS(status));
    if (WIFSIGNALED(status))
        return "signal " + std::to_string(WTERMSIG(status));
    return "status " + std::to_string(status);
}

bool expected_status(KillMode mode, int status) {
    if (WIFEXITED(status) && WEXITSTATUS(status) == 0)
        return true; // ran off the end of the script
    switch (mode) {
    case KillMode::torn_wal:
        return WIFEXITED(status) && WEXITSTATUS(status) == kTornCode;
    case KillMode::exit_after_ack:
        return WIFEXITED(status) && WEXITSTATUS(status) == kExitAfterAckCode;
    case KillMode::sigkill:
        return WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL;
    }
    return false;
}

} // namespace

const char* kill_mode_name(KillMode m) {
    switch (m) {
    case KillMode::torn_wal:
        return "torn-wal";
    case KillMode::exit_after_ack:
        return "exit-after-ack";
    case KillMode::sigkill:
        return "sigkill";
    }
    return "?";
}

unsigned CrashMatrix::passed() const {
    return static_cast<unsigned>(std::count_if(points.begin(), points.end(), [](const CrashPoint& p) { return p.ok; }));
}

std::string script_key(const CrashSpec& spec, std::uint32_t k) { return make_key(spec.seed, k); }

std::string script_value(const CrashSpec& spec, std::uint64_t step, std::size_t sub, std::uint32_t len) {
    // Values are unique per write so a stale version can never pass for the current one.
    std::string v = std::to_string(step) + "." + std::to_string(sub) + ":";
    std::string fill;
    make_value(spec.seed, step, sub, len, fill);
    return v + fill;
}

std::vector<ScriptOp> make_script(const CrashSpec& spec) {
    Rng rng(splitmix64(spec.seed) ^ 0xc4a5);
    std::vector<ScriptOp> script(spec.ops);
    for (auto& op : script) {
        const std::size_t n = rng.unit() < spec.batch_fraction ? rng.between(2, 8) : 1;
        for (std::size_t i = 0; i < n; ++i) {
            ScriptOp::Sub s;
            s.put = rng.below(100) < spec.put_percent;
            s.key = static_cast<std::uint32_t>(rng.below(spec.keys));
            s.value_len = static_cast<std::uint32_t>(rng.between(1, 200));
            op.subs.push_back(s);
        }
    }
    return script;
}

void apply_step(Model& m, const CrashSpec& spec, const std::vector<ScriptOp>& script, std::uint64_t step) {
    const auto& op = script[step];
    for (std::size_t i = 0; i < op.subs.size(); ++i) {
        const auto& s = op.subs[i];
        if (s.put)
            m[script_key(spec, s.key)] = script_value(spec, step, i, s.value_len);
        else
            m.erase(script_key(spec, s.key));
    }
}

Model snapshot(Db& db) {
    Model m;
    db.scan([&](std::string_view k, std::string_view v) { m.emplace(std::string(k), std::string(v)); });
    return m;
}

CrashMatrix run_crash_matrix(const std::string& dir, const CrashSpec& spec, std::ostream* progress) {
    CrashMatrix matrix;
    const std::string journal = dir + ".acks";
    {
        Db db = Db::create(dir, spec.config);
        db.close();
    }
    const auto script = make_script(spec);
    Rng rng(splitmix64(spec.seed) ^ 0xdeadull);
    Model model;
    std::uint64_t cursor = 0;
    double bytes_per_step = 300.0;
    static const KillMode modes[] = {KillMode::torn_wal, KillMode::sigkill, KillMode::exit_after_ack};

    for (unsigned p = 0; p < spec.points; ++p) {
        CrashPoint pt;
        pt.index = p;
        pt.mode = modes[p % 3];
        pt.start = cursor;
        const std::uint64_t remaining = script.size() - cursor;
        const std::uint64_t budget = std::max<std::uint64_t>(1, 2 * remaining / (spec.points - p));
        const std::uint64_t span = rng.between(1, budget);
        const std::uint64_t crash_at =
            pt.mode == KillMode::torn_wal
                ? rng.between(1, static_cast<std::uint64_t>(std::ceil(bytes_per_step * double(span))))
                : 0;
        const std::int64_t exit_after =
            pt.mode == KillMode::exit_after_ack ? static_cast<std::int64_t>(cursor + span - 1) : -1;

        ::unlink(journal.c_str());
        const pid_t pid = ::fork();
        if (pid < 0)
            throw std::runtime_error("fork failed");
        if (pid == 0)
            child_main(dir, spec, script, cursor, exit_after, crash_at, journal);

        int status = 0;
        if (pt.mode == KillMode::sigkill) {
            for (;;) {
                const pid_t r = ::waitpid(pid, &status, WNOHANG);
                if (r == pid)
                    break;
                if (journal_entries(journal) >= span) {
                    ::kill(pid, SIGKILL);
                    ::waitpid(pid, &status, 0);
                    break;
                }
                ::usleep(100);
            }
        } else {
            ::waitpid(pid, &status, 0);
        }
        pt.status = status;

        const auto acks = read_journal(journal);
        bool journal_ok = true;
        for (std::size_t i = 0; i < acks.size(); ++i)
            journal_ok = journal_ok && acks[i].step == cursor + i;
        pt.last_acked = acks.empty() ? static_cast<std::int64_t>(cursor) - 1 : static_cast<std::int64_t>(acks.back().step);
        if (!acks.empty() && acks.back().wal_bytes > 0)
            bytes_per_step = 0.5 * bytes_per_step + 0.5 * double(acks.back().wal_bytes) / double(acks.size());

        if (!expected_status(pt.mode, status) || !journal_ok) {
            pt.detail = "unexpected child " + describe_status(status) + (journal_ok ? "" : ", bad journal");
            matrix.points.push_back(pt);
            break;
        }

        for (std::int64_t s = static_cast<std::int64_t>(cursor); s <= pt.last_acked; ++s)
            apply_step(model, spec, script, static_cast<std::uint64_t>(s));

        try {
            const auto t0 = Clock::now();
            Db db = Db::open(dir, &spec.config);
            pt.recovery_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
            const ltkv_counters c = db.counters();
            pt.recovered_log_bytes = c.recovered_log_bytes;
            const Model got = snapshot(db);
            const std::uint64_t next = static_cast<std::uint64_t>(pt.last_acked + 1);
            if (got == model) {
                pt.ok = true;
                pt.resumed_at = next;
            } else if (next < script.size()) {
                Model with = model;
                apply_step(with, spec, script, next);
                if (got == with) {
                    pt.ok = true;
                    pt.in_flight_applied = true;
                    pt.resumed_at = next + 1;
                    model = std::move(with);
                }
            }
            if (!pt.ok) {
                std::size_t missing = 0, wrong = 0, extra = 0;
                for (const auto& [k, v] : model) {
                    auto it = got.find(k);
                    if (it == got.end())
                        ++missing;
                    else if (it->second != v)
                        ++wrong;
                }
                for (const auto& kv : got)
                    extra += model.count(kv.first) ? 0 : 1;
                pt.detail = "state matches neither step " + std::to_string(pt.last_acked) + " nor the next: " +
                            std::to_string(missing) + " missing, " + std::to_string(wrong) + " wrong, " +
                            std::to_string(extra) + " extra";
            }
            db.close();
        } catch (const std::exception& e) {
            pt.detail = std::string("reopen failed: ") + e.what();
        }
        if (progress)
            *progress << "point " << p << " " << kill_mode_name(pt.mode) << " steps " << pt.start << ".."
                      << pt.last_acked << (pt.in_flight_applied ? " (+in-flight)" : "") << " -> "
                      << (pt.ok ? "ok" : "FAIL " + pt.detail) << "\n";
        matrix.points.push_back(pt);
        if (!pt.ok)
            break;
        cursor = pt.resumed_at;
    }
    matrix.steps_completed = cursor;
    ::unlink(journal.c_str());
    return matrix;
}

std::vector<RecoverySample> measure_recovery(const std::string& work_dir, const std::vector<std::uint64_t>& targets,
                                             unsigned runs, std::uint64_t seed) {
    std::vector<RecoverySample> out;
    const fs::path base(work_dir);
    fs::create_directories(base);
    for (std::uint64_t target : targets) {
        const fs::path src = base / ("recovery-" + std::to_string(target));
        const fs::path copy = base / "recovery-copy";
        fs::remove_all(src);
        ltkv_config cfg;
        ltkv_config_default(&cfg);
        cfg.durability = LTKV_DURABILITY_PROCESS;
        cfg.checkpoint_wal_bytes = LTKV_UNLIMITED;
        cfg.block_cache_bytes = LTKV_UNLIMITED;
        {
            Db db = Db::create(src.string(), cfg);
            std::string key, val;
            for (std::uint64_t i = 0; db.counters().wal_bytes < target; ++i) {
                make_key(seed, i, key);
                make_value(seed, i, 0, kDefaultValueSize, val);
                db.put(key, val);
            }
            db.crash();
        }
        RecoverySample s;
        s.target_bytes = target;
        s.seconds = 1e30;
        for (unsigned r = 0; r < runs; ++r) {
            fs::remove_all(copy);
            fs::copy(src, copy, fs::copy_options::recursive);
            const auto t0 = Clock::now();
            Db db = Db::open(copy.string(), &cfg);
            const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
            const ltkv_counters c = db.counters();
            s.log_bytes = c.recovered_log_bytes;
            s.records = c.recovered_records;
            s.seconds = std::min(s.seconds, secs);
            db.close();
        }
        fs::remove_all(copy);
        fs::remove_all(src);
        out.push_back(s);
    }
    return out;
}

double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n)
        return 0.0;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0)
        return 0.0;
    return (sxy * sxy) / (sxx * syy);
}

} // namespace ltkv::bench
