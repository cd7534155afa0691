// Acceptance gate: every release-blocking property, one verdict line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "asapsim/harness.hpp"

using namespace asapsim;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& what) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << ": " << what << std::endl;
    if (!ok) ++failures;
}

using Clock = std::chrono::steady_clock;

double secs(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

// Deterministic spread of generator parameters for the seeded-workload
// criteria: all five kinds, 1-3 threads, varying region/store/pool sizes.
WorkloadSpec seeded_spec(std::uint64_t i) {
    WorkloadSpec s;
    switch (i % 5) {
        case 0: s.kind = WorkloadKind::Swap; break;
        case 1: s.kind = WorkloadKind::Counter; break;
        case 2: s.kind = WorkloadKind::Hashmap; break;
        case 3: s.kind = WorkloadKind::Queue; break;
        default: s.kind = WorkloadKind::ProducerConsumer; break;
    }
    s.seed = 1000 + i;
    s.regions = 4 + static_cast<std::uint32_t>(i % 13);
    s.stores_per_region = 1 + static_cast<std::uint32_t>(i % 4);
    s.threads = s.kind == WorkloadKind::ProducerConsumer
                    ? 2 + static_cast<std::uint32_t>(i % 2)
                    : 1 + static_cast<std::uint32_t>(i % 3);
    s.line_pool = 6 + static_cast<std::uint32_t>(i % 5) * 3;
    return s;
}

const std::vector<std::string> kPersistentSchemes = {"sw", "hwundo", "hwredo", "asap"};

}  // namespace

int main() {
    MachineConfig cfg;  // defaults all the way down

    // ----- 1: exhaustive crash consistency on the bundled small traces -----
    {
        auto t0 = Clock::now();
        bool ok = true;
        std::string note;
        std::uint64_t points = 0;
        for (const Benchmark& b : crash_suite()) {
            Trace tr = make_workload(b.spec);
            if (tr.thread_count() > 3 || tr.region_count() > 8 || tr.stored_lines().size() > 8) {
                ok = false;
                note = b.name + " exceeds the small-trace bounds";
                break;
            }
            for (const std::string& s : kPersistentSchemes) {
                CrashVerdict v = crash_sweep(tr, s, cfg, 0, 1, /*all_cycles=*/true);
                points += v.images;
                if (!v.consistent() || v.family_size == 0) {
                    ok = false;
                    note = b.name + "/" + s +
                           (v.failures.empty() ? " skipped family enumeration"
                                               : ": " + v.failures.front());
                }
            }
            if (!ok) break;
        }
        double dt = secs(t0);
        if (dt >= 300) ok = false;
        report(1, ok,
               "exhaustive crash recovery, every cycle, every scheme (" + std::to_string(points) +
                   " crash points, " + fmt(dt) + "s)" + (note.empty() ? "" : " " + note));
    }

    // ----- 2: asap commit-order invariant + fully asynchronous region ends -----
    // ----- 3: write-ahead invariant on every one of those runs' logs -----
    {
        auto t0 = Clock::now();
        std::uint64_t order_bad = 0, stall_bad = 0, wal_bad = 0, runs = 0;
        std::string first;
        for (std::uint64_t i = 0; i < 1000; ++i) {
            Trace tr = generate(seeded_spec(i));
            RunResult res = run_trace(tr, "asap", cfg);
            ++runs;
            auto order = check_commit_order(res);
            order_bad += order.size();
            if (!order.empty() && first.empty()) first = order.front();
            for (const auto& per_thread : res.regions)
                for (const RegionRecord& r : per_thread)
                    if (r.end_stall != 0) ++stall_bad;
            wal_bad += check_wal(res.ops, LogDiscipline::Undo).size();
        }
        // The WAL property must hold for the logging baselines too.
        for (std::uint64_t i = 0; i < 150; ++i) {
            Trace tr = generate(seeded_spec(i * 7));
            for (const char* s : {"sw", "hwundo", "hwredo"}) {
                auto sch = make_scheme(s);
                RunResult res = run_trace(tr, s, cfg);
                wal_bad += check_wal(res.ops, sch->log_discipline()).size();
                ++runs;
            }
        }
        double dt = secs(t0);
        bool ok2 = order_bad == 0 && stall_bad == 0 && dt < 300;
        report(2, ok2,
               "1000 seeded asap runs: commit-order violations " + std::to_string(order_bad) +
                   ", regions with end stall " + std::to_string(stall_bad) + " (" + fmt(dt) +
                   "s)" + (first.empty() ? "" : " first: " + first));
        report(3, wal_bad == 0,
               "write-ahead invariant across " + std::to_string(runs) +
                   " runs: violations " + std::to_string(wal_bad));
    }

    // ----- 4-8 ride on the default suite under the default config -----
    auto suite = default_suite();
    std::map<std::string, std::map<std::string, Metrics>> m;  // benchmark -> scheme -> metrics
    std::map<std::string, Trace> traces;
    auto t_suite = Clock::now();
    for (const Benchmark& b : suite) {
        traces[b.name] = make_workload(b.spec);
        for (const std::string& s : scheme_names())
            m[b.name][s] = run_trace(traces[b.name], s, cfg).metrics;
    }
    double suite_secs = secs(t_suite);

    {
        std::vector<double> ratio;
        for (const Benchmark& b : suite)
            ratio.push_back(static_cast<double>(m[b.name]["hwundo"].total_cycles) /
                            static_cast<double>(m[b.name]["asap"].total_cycles));
        double g = geomean(ratio);
        bool ok = g >= 1.2 && suite_secs < 120;
        report(4, ok,
               "geomean cycles(hwundo)/cycles(asap) = " + fmt(g) + " (threshold 1.2, suite " +
                   fmt(suite_secs) + "s)");
    }

    {
        std::vector<double> ratio;
        for (const Benchmark& b : suite)
            ratio.push_back(static_cast<double>(m[b.name]["np"].total_cycles) /
                            static_cast<double>(m[b.name]["asap"].total_cycles));
        double g = geomean(ratio);
        report(5, g >= 0.85, "geomean cycles(np)/cycles(asap) = " + fmt(g) + " (threshold 0.85)");
    }

    {
        std::vector<double> ratio;
        for (const Benchmark& b : suite)
            ratio.push_back(static_cast<double>(m[b.name]["asap"].pm_writes_logdatacommit()) /
                            static_cast<double>(m[b.name]["hwundo"].pm_writes_logdatacommit()));
        double g = geomean(ratio);
        bool mono = true;
        std::string which;
        for (const Benchmark& b : suite) {
            MachineConfig off = cfg;
            off.opt_lpo_drop = off.opt_dpo_coalesce = off.opt_dpo_drop = false;
            std::uint64_t base = run_trace(traces[b.name], "asap", off).metrics.pm_writes_total();
            for (int opt = 0; opt < 3; ++opt) {
                MachineConfig one = off;
                if (opt == 0) one.opt_lpo_drop = true;
                if (opt == 1) one.opt_dpo_coalesce = true;
                if (opt == 2) one.opt_dpo_drop = true;
                std::uint64_t with = run_trace(traces[b.name], "asap", one).metrics.pm_writes_total();
                if (with > base) {
                    mono = false;
                    which = b.name + " opt " + std::to_string(opt) + ": " + std::to_string(with) +
                            " > " + std::to_string(base);
                }
            }
        }
        bool ok = g <= 0.7 && mono;
        report(6, ok,
               "geomean traffic asap/hwundo = " + fmt(g) +
                   " (threshold 0.7); per-optimization write counts monotone: " +
                   (mono ? "yes" : "NO " + which));
    }

    {
        bool ok = true;
        std::string detail;
        for (const Benchmark& b : suite) {
            std::map<std::string, std::map<Cycle, Cycle>> cyc;
            for (const char* s : {"hwundo", "asap"})
                for (Cycle lat : {Cycle{150}, Cycle{1200}}) {
                    MachineConfig c2 = cfg;
                    c2.pm_write_latency = lat;
                    cyc[s][lat] = run_trace(traces[b.name], s, c2).metrics.total_cycles;
                }
            double a = static_cast<double>(cyc["asap"][1200]) / cyc["asap"][150];
            double h = static_cast<double>(cyc["hwundo"][1200]) / cyc["hwundo"][150];
            detail += (detail.empty() ? "" : ", ") + b.name + " " + fmt(a) + "<" + fmt(h);
            if (!(a < h)) ok = false;
        }
        report(7, ok, "slowdown at 8x write latency, asap < hwundo per benchmark: " + detail);
    }

    {
        bool ok = true;
        std::string bad;
        for (const Benchmark& b : suite) {
            auto c = [&](const char* s) { return m[b.name][s].total_cycles; };
            if (!(c("np") <= c("asap") && c("asap") <= c("hwundo") && c("hwundo") <= c("sw") &&
                  c("hwredo") <= c("hwundo"))) {
                ok = false;
                bad += " " + b.name;
            }
        }
        report(8, ok,
               std::string("np <= asap <= hwundo <= sw and hwredo <= hwundo on every benchmark") +
                   (bad.empty() ? "" : "; violated on:" + bad));
    }

    // ----- 9: byte-identical CSV from repeated commands -----
    {
        auto run_all = [&]() {
            std::ostringstream out;
            std::vector<std::pair<std::string, Trace>> benches;
            for (const Benchmark& b : suite) benches.emplace_back(b.name, traces[b.name]);
            cmd_run("asap", traces["swap"], "swap", cfg, out);
            cmd_compare(benches, scheme_names(), cfg, out);
            cmd_sweep(benches, {"hwundo", "asap"}, {150, 300, 600, 1200}, cfg, out);
            std::ostringstream summary;
            CrashTestMode mode;
            mode.exhaustive = false;
            mode.samples = 64;
            mode.seed = 9;
            std::vector<std::pair<std::string, Trace>> small;
            for (const Benchmark& b : crash_suite()) small.emplace_back(b.name, make_workload(b.spec));
            cmd_crashtest(small, kPersistentSchemes, mode, cfg, out, summary);
            out << summary.str();
            return out.str();
        };
        std::string a = run_all(), b = run_all();
        report(9, a == b,
               "repeated run/compare/sweep/crashtest emit byte-identical output (" +
                   std::to_string(a.size()) + " bytes)");
    }

    std::cout << (failures == 0 ? "ALL CRITERIA PASS" : "FAILURES: " + std::to_string(failures))
              << std::endl;
    return failures;
}
