#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "asapsim/harness.hpp"

using namespace asapsim;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(csv);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& sets) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const std::string& s : sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw SimError(SimError::Kind::InvalidTrace, "--set expects key=value, got: " + s);
        out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return out;
}

std::string stem_of(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

struct SourceOpts {
    std::string trace_file;
    std::string workload;
    std::string suite;
};

void add_source_flags(CLI::App* sub, SourceOpts& src, bool with_suite) {
    sub->add_option("--trace", src.trace_file, "trace file to run");
    sub->add_option("--workload", src.workload,
                    "workload spec, e.g. kind=swap,regions=8,threads=2,seed=7");
    if (with_suite)
        sub->add_option("--suite", src.suite, "bundled suite name: default or crash");
}

std::vector<std::pair<std::string, Trace>> resolve_benchmarks(const SourceOpts& src) {
    int given = (!src.trace_file.empty()) + (!src.workload.empty()) + (!src.suite.empty());
    if (given != 1)
        throw SimError(SimError::Kind::InvalidTrace,
                       "give exactly one of --trace, --workload, --suite");
    std::vector<std::pair<std::string, Trace>> out;
    if (!src.trace_file.empty()) {
        out.emplace_back(stem_of(src.trace_file), load_trace_file(src.trace_file));
    } else if (!src.workload.empty()) {
        WorkloadSpec spec = parse_workload_spec(src.workload);
        out.emplace_back(to_string(spec.kind), make_workload(spec));
    } else {
        std::vector<Benchmark> suite;
        if (src.suite == "default") suite = default_suite();
        else if (src.suite == "crash") suite = crash_suite();
        else
            throw SimError(SimError::Kind::InvalidTrace, "unknown suite: " + src.suite);
        for (const Benchmark& b : suite) out.emplace_back(b.name, make_workload(b.spec));
    }
    return out;
}

// Opens --out for writing, or falls back to stdout.
struct OutStream {
    std::ofstream file;
    std::ostream* os = &std::cout;

    explicit OutStream(const std::string& path) {
        if (path.empty()) return;
        file.open(path);
        if (!file) throw SimError(SimError::Kind::InvalidTrace, "cannot open for write: " + path);
        os = &file;
    }
    std::ostream& get() { return *os; }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic simulator of persistent-memory logging schemes"};
    app.require_subcommand(1);

    std::string config_file;
    std::vector<std::string> sets;
    auto add_config_flags = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "key=value config file");
        sub->add_option("--set", sets, "config override key=value (repeatable)");
    };

    // run
    auto* run = app.add_subcommand("run", "run one scheme on one trace, emit a CSV row");
    std::string run_scheme, run_out, run_name;
    SourceOpts run_src;
    run->add_option("--scheme", run_scheme, "scheme name")->required();
    add_source_flags(run, run_src, false);
    run->add_option("--out", run_out, "CSV output path (default stdout)");
    run->add_option("--name", run_name, "benchmark label for the CSV row");
    add_config_flags(run);

    // compare
    auto* cmp = app.add_subcommand("compare", "run several schemes, emit a comparison table");
    std::string cmp_schemes = "np,sw,hwundo,hwredo,asap", cmp_out;
    SourceOpts cmp_src;
    cmp->add_option("--schemes", cmp_schemes, "comma-separated scheme list");
    add_source_flags(cmp, cmp_src, true);
    cmp->add_option("--out", cmp_out, "CSV output path (default stdout)");
    add_config_flags(cmp);

    // sweep
    auto* swp = app.add_subcommand("sweep", "scale pm_write_latency, emit long-form CSV");
    std::string swp_schemes = "sw,hwundo,hwredo,asap", swp_out, swp_lat = "150,300,600,1200";
    std::string swp_plot;
    SourceOpts swp_src;
    swp->add_option("--schemes", swp_schemes, "comma-separated scheme list");
    swp->add_option("--latencies", swp_lat, "comma-separated pm_write_latency values");
    add_source_flags(swp, swp_src, true);
    swp->add_option("--out", swp_out, "CSV output path (default stdout)");
    swp->add_option("--plot-dir", swp_plot, "directory for two-column plot series files");
    add_config_flags(swp);

    // crashtest
    auto* crash = app.add_subcommand("crashtest", "crash-and-recover at many points, check each");
    std::string crash_schemes = "sw,hwundo,hwredo,asap", crash_out, crash_mode = "exhaustive";
    std::size_t crash_samples = 256;
    std::uint64_t crash_seed = 1;
    SourceOpts crash_src;
    crash->add_option("--schemes", crash_schemes, "comma-separated scheme list");
    crash->add_option("--mode", crash_mode, "exhaustive or sampled");
    crash->add_option("--samples", crash_samples, "crash points per run in sampled mode");
    crash->add_option("--seed", crash_seed, "sample selection seed");
    add_source_flags(crash, crash_src, true);
    crash->add_option("--out", crash_out, "verdict CSV path (default stdout)");
    add_config_flags(crash);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a workload trace file");
    std::string gen_workload, gen_out;
    gen->add_option("--workload", gen_workload, "workload spec string")->required();
    gen->add_option("--out", gen_out, "trace output path (default stdout)");
    add_config_flags(gen);

    CLI11_PARSE(app, argc, argv);

    try {
        std::optional<std::string> cfg_file;
        if (!config_file.empty()) cfg_file = config_file;
        MachineConfig cfg = resolve_config(cfg_file, parse_overrides(sets));

        if (*run) {
            auto benches = resolve_benchmarks(run_src);
            OutStream out(run_out);
            std::string name = run_name.empty() ? benches[0].first : run_name;
            cmd_run(run_scheme, benches[0].second, name, cfg, out.get());
            return 0;
        }
        if (*cmp) {
            auto benches = resolve_benchmarks(cmp_src);
            OutStream out(cmp_out);
            cmd_compare(benches, split_list(cmp_schemes), cfg, out.get());
            return 0;
        }
        if (*swp) {
            auto benches = resolve_benchmarks(swp_src);
            OutStream out(swp_out);
            std::vector<Cycle> lats;
            for (const std::string& l : split_list(swp_lat))
                lats.push_back(detail::parse_u64(l, "--latencies"));
            std::optional<std::string> plot;
            if (!swp_plot.empty()) plot = swp_plot;
            cmd_sweep(benches, split_list(swp_schemes), lats, cfg, out.get(), plot);
            return 0;
        }
        if (*crash) {
            auto benches = resolve_benchmarks(crash_src);
            CrashTestMode mode;
            if (crash_mode == "exhaustive") {
                mode.exhaustive = true;
            } else if (crash_mode == "sampled") {
                mode.exhaustive = false;
                mode.samples = crash_samples;
                mode.seed = crash_seed;
            } else {
                throw SimError(SimError::Kind::InvalidTrace, "unknown mode: " + crash_mode);
            }
            OutStream out(crash_out);
            std::ostream& summary = crash_out.empty() ? std::cerr : std::cout;
            auto report =
                cmd_crashtest(benches, split_list(crash_schemes), mode, cfg, out.get(), summary);
            return report.all_consistent ? 0 : 1;
        }
        if (*gen) {
            WorkloadSpec spec = parse_workload_spec(gen_workload);
            Trace t = make_workload(spec);
            OutStream out(gen_out);
            out.get() << render(t);
            return 0;
        }
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
