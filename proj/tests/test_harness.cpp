#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "asapsim/harness.hpp"

using namespace asapsim;
using Catch::Approx;

namespace {

std::vector<std::pair<std::string, Trace>> tiny_benches() {
    WorkloadSpec a;
    a.kind = WorkloadKind::Swap;
    a.regions = 6;
    a.stores_per_region = 2;
    a.threads = 2;
    a.line_pool = 8;
    a.seed = 42;
    WorkloadSpec b;
    b.kind = WorkloadKind::Counter;
    b.regions = 5;
    b.stores_per_region = 2;
    b.threads = 1;
    b.line_pool = 4;
    b.seed = 43;
    return {{"swap", make_workload(a)}, {"counter", make_workload(b)}};
}

}  // namespace

TEST_CASE("geomean is exact on powers") {
    CHECK(geomean({2.0, 8.0}) == Approx(4.0));
    CHECK(geomean({5.0}) == Approx(5.0));
    CHECK(geomean({1.0, 1.0, 1.0}) == Approx(1.0));
}

TEST_CASE("csv rows print fixed columns") {
    Row r{"asap", "swap", Metrics{}, true, std::nullopt, std::nullopt, std::nullopt};
    r.m.total_cycles = 7;
    r.m.pm_log = 3;
    r.m.regions_committed = 2;
    CHECK(csv_row(r, false) == "asap,swap,7,0,0,0,3,0,0,0,2,,");
    r.speedup_vs_sw = 1.0;
    r.traffic_vs_hwundo = 0.5;
    r.traffic_vs_hwundo_incl = 0.25;
    CHECK(csv_row(r, true) == "asap,swap,7,0,0,0,3,0,0,0,2,1.000000,0.500000,0.250000");

    Row g{"asap", "geomean", Metrics{}, false, 2.0, std::nullopt, std::nullopt};
    CHECK(csv_row(g, false) == "asap,geomean,,,,,,,,,,2.000000,");
}

TEST_CASE("run of an empty trace emits an all-zero row") {
    Trace t;
    t.streams.resize(1);
    std::ostringstream out;
    MachineConfig cfg;
    Metrics m = cmd_run("np", t, "empty", cfg, out);
    CHECK(m.total_cycles == 0);
    CHECK(m.pm_writes_total() == 0);
    CHECK(out.str() == std::string(kCsvHeader) + "\nnp,empty,0,0,0,0,0,0,0,0,0,,\n");
}

TEST_CASE("compare fills reference ratios and geomean rows") {
    MachineConfig cfg;
    std::ostringstream out;
    auto table = cmd_compare(tiny_benches(), scheme_names(), cfg, out);

    std::string header = out.str().substr(0, out.str().find('\n'));
    CHECK(header == std::string(kCsvHeader) + "," + kCompareExtraColumn);

    std::map<std::string, std::map<std::string, const Row*>> by;
    for (const Row& r : table.rows) by[r.benchmark][r.scheme] = &r;

    for (const char* bench : {"swap", "counter"}) {
        auto& rows = by[bench];
        CHECK(*rows["sw"]->speedup_vs_sw == Approx(1.0));
        CHECK(rows["asap"]->m.total_cycles <= rows["hwundo"]->m.total_cycles);
        CHECK(rows["asap"]->m.pm_log <= rows["hwundo"]->m.pm_log);
        CHECK(*rows["hwundo"]->traffic_vs_hwundo == Approx(1.0));
    }
    CHECK(table.geomean_speedup.at("sw") == Approx(1.0));
    CHECK(table.geomean_traffic.at("asap") < 1.0);
    CHECK(by["geomean"].size() == scheme_names().size());
    CHECK_FALSE(by["geomean"]["asap"]->has_metrics);

    // Byte-identical on a rerun.
    std::ostringstream again;
    cmd_compare(tiny_benches(), scheme_names(), cfg, again);
    CHECK(out.str() == again.str());
}

TEST_CASE("compare needs two schemes and references to fill ratios") {
    MachineConfig cfg;
    std::ostringstream out;
    CHECK_THROWS_AS(cmd_compare(tiny_benches(), {"asap"}, cfg, out), SimError);

    auto table = cmd_compare(tiny_benches(), {"np", "asap"}, cfg, out);
    for (const Row& r : table.rows) {
        CHECK_FALSE(r.speedup_vs_sw.has_value());
        CHECK_FALSE(r.traffic_vs_hwundo.has_value());
    }
}

TEST_CASE("sweep scales write latency only") {
    MachineConfig cfg;
    std::ostringstream out;
    auto benches = tiny_benches();
    benches.resize(1);

    CHECK_THROWS_AS(cmd_sweep(benches, {"np", "hwundo"}, {150}, cfg, out), SimError);

    std::string plot_dir = "harness_sweep_plots";
    auto cells = cmd_sweep(benches, {"np", "hwundo"}, {600, 150, 300}, cfg, out, plot_dir);
    REQUIRE(cells.size() == 6);

    std::map<std::string, std::map<Cycle, Cycle>> cyc;
    for (const SweepCell& c : cells) {
        cyc[c.scheme][c.pm_write_latency] = c.cycles;
        MachineConfig at = cfg;
        at.pm_write_latency = c.pm_write_latency;
        std::ostringstream row;
        CHECK(cmd_run(c.scheme, benches[0].second, c.benchmark, at, row).total_cycles == c.cycles);
    }
    // np never waits on persists, so write latency cannot move it.
    CHECK(cyc["np"][150] == cyc["np"][600]);
    CHECK(cyc["hwundo"][150] <= cyc["hwundo"][300]);
    CHECK(cyc["hwundo"][300] <= cyc["hwundo"][600]);

    namespace fs = std::filesystem;
    CHECK(fs::exists(fs::path(plot_dir) / "manifest.txt"));
    std::ifstream series(fs::path(plot_dir) / "swap.hwundo.dat");
    REQUIRE(series.good());
    int lines = 0;
    for (std::string l; std::getline(series, l);) ++lines;
    CHECK(lines == 3);
}

TEST_CASE("crashtest skips np, checks the rest, and is deterministic") {
    MachineConfig cfg;
    auto benches = tiny_benches();
    CrashTestMode mode;
    mode.exhaustive = false;
    mode.samples = 16;
    mode.seed = 5;

    std::ostringstream csv1, sum1;
    auto report = cmd_crashtest(benches, {"np", "asap"}, mode, cfg, csv1, sum1);
    CHECK(report.all_consistent);
    REQUIRE(report.entries.size() == 4);
    for (const CrashTestEntry& e : report.entries) {
        if (e.scheme == "np") {
            CHECK_FALSE(e.checked);
            CHECK(e.points.empty());
        } else {
            CHECK(e.checked);
            CHECK(e.verdict.consistent());
            CHECK(e.points.size() == e.verdict.images);
            for (const CrashPoint& p : e.points) CHECK(p.ok);
        }
    }
    CHECK(sum1.str().find("skipped: no guarantee") != std::string::npos);
    CHECK(csv1.str().rfind(kCrashHeader, 0) == 0);

    std::ostringstream csv2, sum2;
    cmd_crashtest(benches, {"np", "asap"}, mode, cfg, csv2, sum2);
    CHECK(csv1.str() == csv2.str());
    CHECK(sum1.str() == sum2.str());
}

TEST_CASE("exhaustive crashtest visits every cycle") {
    MachineConfig cfg;
    WorkloadSpec s;
    s.kind = WorkloadKind::Counter;
    s.regions = 2;
    s.threads = 1;
    s.line_pool = 4;
    s.seed = 9;
    std::vector<std::pair<std::string, Trace>> benches{{"counter", make_workload(s)}};
    CrashTestMode mode;  // exhaustive by default

    std::ostringstream csv, sum;
    auto report = cmd_crashtest(benches, {"asap"}, mode, cfg, csv, sum);
    REQUIRE(report.entries.size() == 1);
    const auto& pts = report.entries[0].points;
    REQUIRE_FALSE(pts.empty());
    for (std::size_t i = 0; i < pts.size(); ++i)
        CHECK(pts[i].cycle == static_cast<Cycle>(i));  // 0,1,2,... every cycle
    CHECK(report.all_consistent);
}

TEST_CASE("config resolution: flags beat file beats environment") {
    namespace fs = std::filesystem;
    std::ofstream("harness_env.cfg") << "pm_write_latency=500\npm_banks=2\n";
    std::ofstream("harness_file.cfg") << "pm_write_latency=300\n";

    CHECK(resolve_config(std::nullopt, {}).pm_write_latency == 150);

    ::setenv("ASAPSIM_CONFIG", "harness_env.cfg", 1);
    MachineConfig env_only = resolve_config(std::nullopt, {});
    CHECK(env_only.pm_write_latency == 500);
    CHECK(env_only.pm_banks == 2);

    MachineConfig with_file = resolve_config(std::string("harness_file.cfg"), {});
    CHECK(with_file.pm_write_latency == 300);
    CHECK(with_file.pm_banks == 2);

    MachineConfig with_flags =
        resolve_config(std::string("harness_file.cfg"), {{"pm_write_latency", "700"}});
    CHECK(with_flags.pm_write_latency == 700);
    ::unsetenv("ASAPSIM_CONFIG");

    CHECK_THROWS(resolve_config(std::nullopt, {{"no_such_key", "1"}}));
    fs::remove("harness_env.cfg");
    fs::remove("harness_file.cfg");
}

TEST_CASE("bundled suites are well formed") {
    auto suite = default_suite();
    REQUIRE(suite.size() == 5);
    std::set<std::string> names;
    for (const Benchmark& b : suite) {
        names.insert(b.name);
        Trace t = make_workload(b.spec);  // validates
        CHECK(t.thread_count() == b.spec.threads);
    }
    CHECK(names.size() == 5);

    for (const Benchmark& b : crash_suite()) {
        Trace t = make_workload(b.spec);
        INFO(b.name);
        CHECK(t.thread_count() <= 3);
        CHECK(t.region_count() <= 8);
        CHECK(t.stored_lines().size() <= 8);
    }
}
