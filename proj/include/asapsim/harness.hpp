#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "asapsim/asap.hpp"
#include "asapsim/config.hpp"
#include "asapsim/crashcheck.hpp"
#include "asapsim/machine.hpp"
#include "asapsim/trace.hpp"

// Benchmark suites, CSV emission, and the command implementations behind the
// asapsim tool. Everything here is a deterministic function of
// (trace, scheme, config): rerunning a command reproduces identical bytes.

namespace asapsim {

struct Benchmark {
    std::string name;
    WorkloadSpec spec;
};

// The bundled write-heavy suite. Sizing notes:
//   - region counts keep every run far inside the log ring, so commit
//     latency rather than backpressure is what gets measured;
//   - line pools are small enough that regions re-store recently written
//     lines while their data persists are still in flight, which is the
//     regime where coalescing and dropping pay off;
//   - swap and producer_consumer keep stores-per-region low because their
//     stores can land on one line, and piling post-image log writes onto a
//     single bank measures queueing, not the logging discipline;
//   - three threads make each thread's line partition stride coprime to the
//     four banks, so per-thread traffic spreads over all of them.
inline std::vector<Benchmark> default_suite() {
    auto spec = [](WorkloadKind k, std::uint32_t regions, std::uint32_t stores,
                   std::uint32_t threads, std::uint32_t pool, std::uint64_t seed) {
        WorkloadSpec s;
        s.kind = k;
        s.regions = regions;
        s.stores_per_region = stores;
        s.threads = threads;
        s.line_pool = pool;
        s.seed = seed;
        return s;
    };
    return {
        {"swap", spec(WorkloadKind::Swap, 64, 2, 3, 12, 101)},
        {"counter", spec(WorkloadKind::Counter, 64, 2, 3, 12, 202)},
        {"hashmap", spec(WorkloadKind::Hashmap, 64, 2, 3, 12, 303)},
        {"queue", spec(WorkloadKind::Queue, 64, 4, 3, 12, 404)},
        {"producer_consumer", spec(WorkloadKind::ProducerConsumer, 48, 1, 3, 12, 505)},
    };
}

// Small instances of the same generators, sized for exhaustive crash sweeps
// (every per-thread region-prefix combination gets enumerated by the oracle).
inline std::vector<Benchmark> crash_suite() {
    auto spec = [](WorkloadKind k, std::uint32_t regions, std::uint32_t stores,
                   std::uint32_t threads, std::uint32_t pool, std::uint64_t seed) {
        WorkloadSpec s;
        s.kind = k;
        s.regions = regions;
        s.stores_per_region = stores;
        s.threads = threads;
        s.line_pool = pool;
        s.seed = seed;
        return s;
    };
    return {
        {"swap2x1", spec(WorkloadKind::Swap, 2, 2, 1, 4, 11)},
        {"swap2x2", spec(WorkloadKind::Swap, 2, 2, 2, 6, 12)},
        {"counter3x2", spec(WorkloadKind::Counter, 3, 2, 2, 6, 13)},
        {"hashmap2x2", spec(WorkloadKind::Hashmap, 2, 3, 2, 8, 14)},
        {"queue3x1", spec(WorkloadKind::Queue, 3, 3, 1, 6, 15)},
        {"queue2x2", spec(WorkloadKind::Queue, 2, 2, 2, 8, 16)},
        {"pc2x2", spec(WorkloadKind::ProducerConsumer, 2, 2, 2, 6, 17)},
        {"pc2x3", spec(WorkloadKind::ProducerConsumer, 2, 1, 3, 6, 18)},
    };
}

// ---------------------------------------------------------------------------
// CSV plumbing

inline constexpr const char* kCsvHeader =
    "scheme,benchmark,cycles,stall_persist,stall_lock,stall_logfull,"
    "pm_log,pm_data,pm_commit,pm_evict,regions,speedup_vs_sw,traffic_vs_hwundo";

// Extra column appended by cmd_compare: the traffic ratio with
// eviction writes counted too (the headline ratio excludes them).
inline constexpr const char* kCompareExtraColumn = "traffic_vs_hwundo_incl_evict";

inline std::string format_ratio(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline double geomean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += std::log(x);
    return std::exp(s / static_cast<double>(xs.size()));
}

struct Row {
    std::string scheme;
    std::string benchmark;
    Metrics m;
    bool has_metrics = true;  // geomean rows leave the absolute columns blank
    std::optional<double> speedup_vs_sw;
    std::optional<double> traffic_vs_hwundo;       // log + data + commit writes
    std::optional<double> traffic_vs_hwundo_incl;  // plus eviction writes
};

inline std::string csv_row(const Row& r, bool with_incl_column) {
    std::ostringstream out;
    out << r.scheme << ',' << r.benchmark << ',';
    if (r.has_metrics) {
        out << r.m.total_cycles << ',' << r.m.stall_persist << ',' << r.m.stall_lock << ','
            << r.m.stall_logfull << ',' << r.m.pm_log << ',' << r.m.pm_data << ','
            << r.m.pm_commit << ',' << r.m.pm_evict << ',' << r.m.regions_committed << ',';
    } else {
        out << ",,,,,,,,,";
    }
    if (r.speedup_vs_sw) out << format_ratio(*r.speedup_vs_sw);
    out << ',';
    if (r.traffic_vs_hwundo) out << format_ratio(*r.traffic_vs_hwundo);
    if (with_incl_column) {
        out << ',';
        if (r.traffic_vs_hwundo_incl) out << format_ratio(*r.traffic_vs_hwundo_incl);
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Trace sources

inline void validate_or_throw(const Trace& trace) {
    auto violations = validate(trace);
    if (violations.empty()) return;
    std::string msg = "trace validation failed:";
    for (const auto& v : violations)
        msg += "\n  thread " + std::to_string(v.thread) + ": " + v.message;
    throw SimError(SimError::Kind::InvalidTrace, msg);
}

inline Trace load_trace_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SimError(SimError::Kind::InvalidTrace, "cannot open trace file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    Trace t = parse_trace(ss.str());
    validate_or_throw(t);
    return t;
}

inline Trace make_workload(const WorkloadSpec& spec) {
    Trace t = generate(spec);
    validate_or_throw(t);
    return t;
}

inline RunResult run_trace(const Trace& trace, const std::string& scheme,
                           const MachineConfig& cfg) {
    auto s = make_scheme(scheme);
    Machine m(trace, *s, cfg);
    return m.run();
}

// Config resolution: built-in defaults, then the file named by
// ASAPSIM_CONFIG, then an explicit --config file, then individual flag
// overrides. Later layers win.
inline MachineConfig resolve_config(
    const std::optional<std::string>& config_file,
    const std::vector<std::pair<std::string, std::string>>& flag_overrides) {
    MachineConfig cfg;
    if (const char* env = std::getenv("ASAPSIM_CONFIG"); env && *env)
        load_config_file(cfg, env);
    if (config_file) load_config_file(cfg, *config_file);
    for (const auto& [k, v] : flag_overrides) apply_config_kv(cfg, k, v);
    cfg.check();
    return cfg;
}

// ---------------------------------------------------------------------------
// run

// One scheme, one trace, one CSV row. The ratio columns stay blank: they
// compare against reference schemes that a single run does not execute.
inline Metrics cmd_run(const std::string& scheme, const Trace& trace,
                       const std::string& benchmark, const MachineConfig& cfg,
                       std::ostream& out) {
    RunResult res = run_trace(trace, scheme, cfg);
    Row row{scheme, benchmark, res.metrics, true, std::nullopt, std::nullopt, std::nullopt};
    out << kCsvHeader << '\n' << csv_row(row, false) << '\n';
    return res.metrics;
}

// ---------------------------------------------------------------------------
// compare

struct ComparisonTable {
    std::vector<Row> rows;  // data rows then one geomean row per scheme
    // Geomeans across the benchmark list, keyed by scheme.
    std::map<std::string, double> geomean_speedup;
    std::map<std::string, double> geomean_traffic;
    std::map<std::string, double> geomean_traffic_incl;
};

inline ComparisonTable cmd_compare(const std::vector<std::pair<std::string, Trace>>& benchmarks,
                                   const std::vector<std::string>& schemes,
                                   const MachineConfig& cfg, std::ostream& out) {
    if (schemes.size() < 2)
        throw SimError(SimError::Kind::InvalidTrace, "compare needs at least two schemes");

    ComparisonTable table;
    std::map<std::string, std::vector<double>> sp, tr, tri;

    for (const auto& [bench, trace] : benchmarks) {
        std::map<std::string, Metrics> by_scheme;
        for (const std::string& s : schemes) by_scheme[s] = run_trace(trace, s, cfg).metrics;

        const Metrics* sw = by_scheme.count("sw") ? &by_scheme["sw"] : nullptr;
        const Metrics* hw = by_scheme.count("hwundo") ? &by_scheme["hwundo"] : nullptr;

        for (const std::string& s : schemes) {
            const Metrics& m = by_scheme[s];
            Row row{s, bench, m, true, std::nullopt, std::nullopt, std::nullopt};
            if (sw && m.total_cycles > 0) {
                row.speedup_vs_sw =
                    static_cast<double>(sw->total_cycles) / static_cast<double>(m.total_cycles);
                sp[s].push_back(*row.speedup_vs_sw);
            }
            if (hw && hw->pm_writes_logdatacommit() > 0) {
                row.traffic_vs_hwundo = static_cast<double>(m.pm_writes_logdatacommit()) /
                                        static_cast<double>(hw->pm_writes_logdatacommit());
                tr[s].push_back(*row.traffic_vs_hwundo);
            }
            if (hw && hw->pm_writes_total() > 0) {
                row.traffic_vs_hwundo_incl = static_cast<double>(m.pm_writes_total()) /
                                             static_cast<double>(hw->pm_writes_total());
                tri[s].push_back(*row.traffic_vs_hwundo_incl);
            }
            table.rows.push_back(std::move(row));
        }
    }

    for (const std::string& s : schemes) {
        Row g{s, "geomean", Metrics{}, false, std::nullopt, std::nullopt, std::nullopt};
        if (!sp[s].empty()) {
            g.speedup_vs_sw = geomean(sp[s]);
            table.geomean_speedup[s] = *g.speedup_vs_sw;
        }
        if (!tr[s].empty()) {
            g.traffic_vs_hwundo = geomean(tr[s]);
            table.geomean_traffic[s] = *g.traffic_vs_hwundo;
        }
        if (!tri[s].empty()) {
            g.traffic_vs_hwundo_incl = geomean(tri[s]);
            table.geomean_traffic_incl[s] = *g.traffic_vs_hwundo_incl;
        }
        table.rows.push_back(std::move(g));
    }

    out << kCsvHeader << ',' << kCompareExtraColumn << '\n';
    for (const Row& r : table.rows) out << csv_row(r, true) << '\n';
    return table;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepCell {
    std::string scheme;
    std::string benchmark;
    Cycle pm_write_latency = 0;
    Cycle cycles = 0;
    Cycle stall_persist = 0;
};

inline constexpr const char* kSweepHeader =
    "scheme,benchmark,pm_write_latency,cycles,stall_persist";

// Scales only the write latency; read latency stays put so the baseline
// work of every scheme is identical across points.
inline std::vector<SweepCell> cmd_sweep(const std::vector<std::pair<std::string, Trace>>& benchmarks,
                                        const std::vector<std::string>& schemes,
                                        std::vector<Cycle> latencies, const MachineConfig& base,
                                        std::ostream& out,
                                        const std::optional<std::string>& plot_dir = std::nullopt) {
    if (latencies.size() < 2)
        throw SimError(SimError::Kind::InvalidTrace, "sweep needs at least two latency points");
    std::sort(latencies.begin(), latencies.end());
    latencies.erase(std::unique(latencies.begin(), latencies.end()), latencies.end());

    std::vector<SweepCell> cells;
    out << kSweepHeader << '\n';
    for (const auto& [bench, trace] : benchmarks) {
        for (const std::string& s : schemes) {
            for (Cycle lat : latencies) {
                MachineConfig cfg = base;
                cfg.pm_write_latency = lat;
                Metrics m = run_trace(trace, s, cfg).metrics;
                cells.push_back(SweepCell{s, bench, lat, m.total_cycles, m.stall_persist});
                out << s << ',' << bench << ',' << lat << ',' << m.total_cycles << ','
                    << m.stall_persist << '\n';
            }
        }
    }

    if (plot_dir) {
        namespace fs = std::filesystem;
        fs::create_directories(*plot_dir);
        std::ofstream manifest(fs::path(*plot_dir) / "manifest.txt");
        manifest << "# series files: x = pm_write_latency (cycles), y = total cycles\n";
        for (const auto& [bench, trace] : benchmarks) {
            (void)trace;
            for (const std::string& s : schemes) {
                std::string fname = bench + "." + s + ".dat";
                std::ofstream series(fs::path(*plot_dir) / fname);
                for (const SweepCell& c : cells)
                    if (c.benchmark == bench && c.scheme == s)
                        series << c.pm_write_latency << ' ' << c.cycles << '\n';
                manifest << bench << ' ' << s << ' ' << fname << '\n';
            }
        }
    }
    return cells;
}

// ---------------------------------------------------------------------------
// crashtest

struct CrashTestMode {
    bool exhaustive = true;  // crash at every cycle of the run
    std::size_t samples = 0;
    std::uint64_t seed = 1;
};

struct CrashTestEntry {
    std::string scheme;
    std::string benchmark;
    bool checked = false;  // np is reported but never swept
    CrashVerdict verdict;
    std::vector<CrashPoint> points;
};

struct CrashTestReport {
    std::vector<CrashTestEntry> entries;
    bool all_consistent = true;  // over the checked entries
};

inline constexpr const char* kCrashHeader = "crash_cycle,scheme,committed_regions,verdict,detail";

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else if (c == '\n') out += "; ";
        else out += c;
    }
    out += '"';
    return out;
}

inline CrashTestReport cmd_crashtest(const std::vector<std::pair<std::string, Trace>>& benchmarks,
                                     const std::vector<std::string>& schemes,
                                     const CrashTestMode& mode, const MachineConfig& cfg,
                                     std::ostream& csv, std::ostream& summary) {
    CrashTestReport report;
    csv << kCrashHeader << '\n';
    for (const auto& [bench, trace] : benchmarks) {
        if (benchmarks.size() > 1) csv << "# benchmark " << bench << '\n';
        for (const std::string& s : schemes) {
            CrashTestEntry entry;
            entry.scheme = s;
            entry.benchmark = bench;
            if (make_scheme(s)->log_discipline() == LogDiscipline::None) {
                summary << bench << ' ' << s << ": skipped: no guarantee\n";
                report.entries.push_back(std::move(entry));
                continue;
            }
            entry.verdict = crash_sweep(trace, s, cfg, mode.exhaustive ? 0 : mode.samples,
                                        mode.seed, mode.exhaustive, &entry.points);
            entry.checked = true;
            for (const CrashPoint& p : entry.points)
                csv << p.cycle << ',' << s << ',' << p.committed_regions << ','
                    << (p.ok ? "pass" : "FAIL") << ',' << csv_escape(p.detail) << '\n';
            std::uint64_t bad = 0;
            for (const CrashPoint& p : entry.points) bad += p.ok ? 0 : 1;
            summary << bench << ' ' << s << ": " << (entry.points.size() - bad) << '/'
                    << entry.points.size() << " crash points consistent";
            if (entry.verdict.family_size > 0)
                summary << " (valid-state family " << entry.verdict.family_size << ")";
            summary << '\n';
            if (!entry.verdict.consistent()) {
                report.all_consistent = false;
                for (const std::string& f : entry.verdict.failures)
                    summary << "  " << f << '\n';
            }
            report.entries.push_back(std::move(entry));
        }
    }
    return report;
}

}  // namespace asapsim
