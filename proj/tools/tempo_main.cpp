// tempo — benchmark and verification harness for the simulation engines.
//
// Subcommands:
//   bench   engine x model x load x threads sweeps, CSV on stdout or --out
//   verify  deterministic cross-engine check against the sequential oracle
//
// Exit codes: 0 success, 1 usage error, 2 verification failure,
// 3 capacity or I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tempo/bench.hpp"
#include "tempo/topology.hpp"

namespace {

struct CliArgs {
    std::vector<std::string> engines;
    std::string model = "pcs";
    std::string load = "medium";
    std::string balance = "balanced";
    std::vector<int> threads;
    int samples = 20;
    double duration_s = 60.0;
    std::uint64_t events = 0;
    std::uint64_t seed = 1;
    std::string placement = "auto";
    double scale = 0.0;
    std::uint32_t channels = 512;
    std::uint32_t grain = 1;
    std::string topology_file;
    std::string out = "-";
    bool no_pin = false;
    bool corrupt_tiebreak = false;
};

void add_common_options(CLI::App* sub, CliArgs& a) {
    sub->add_option("--engine", a.engines,
                    "Engines to run: seq, conservative, optimistic (comma list)")
        ->delimiter(',');
    sub->add_option("--model", a.model, "Benchmark model: pcs or highway")
        ->capture_default_str();
    sub->add_option("--load", a.load, "Workload level: light, medium, heavy")
        ->capture_default_str();
    sub->add_option("--balance", a.balance,
                    "Density balance: balanced or unbalanced (highway only)")
        ->capture_default_str();
    sub->add_option("--threads", a.threads, "Worker thread counts (comma list)")
        ->delimiter(',');
    sub->add_option("--events", a.events,
                    "Committed-event budget; replaces the wall clock when > 0");
    sub->add_option("--seed", a.seed, "Base seed; sample k runs with seed+k")
        ->capture_default_str();
    sub->add_option("--placement", a.placement,
                    "Thread placement: clustered, circular, or auto")
        ->capture_default_str();
    sub->add_option("--scale", a.scale,
                    "Fraction of full model size in (0,1]; 0 = desk defaults")
        ->capture_default_str();
    sub->add_option("--channels", a.channels, "Cellular model: channels per cell")
        ->capture_default_str();
    sub->add_option("--grain", a.grain,
                    "Cellular model: power-scan repetitions per admission")
        ->capture_default_str();
    sub->add_option("--topology-file", a.topology_file,
                    "JSON machine-layout override (also the capacity reference)");
    sub->add_flag("--no-pin", a.no_pin, "Do not pin worker threads to cpus");
    sub->set_config("--config", "", "Read options from a key=value file");
}

tempo::Placement pick_placement(const std::string& name, const tempo::Topology& topo,
                                const std::vector<int>& threads) {
    if (name == "clustered") return tempo::Placement::clustered;
    if (name == "circular") return tempo::Placement::circular;
    if (name == "auto") {
        // Stay on one memory node while the run fits there (locality);
        // spread across nodes once it cannot (bandwidth).
        int max_t = 1;
        for (int t : threads) max_t = std::max(max_t, t);
        const auto node0 = topo.cpus_on_node(0);
        return max_t <= static_cast<int>(node0.size()) ? tempo::Placement::clustered
                                                       : tempo::Placement::circular;
    }
    throw tempo::ConfigError("unknown placement '" + name +
                             "' (expected clustered, circular, or auto)");
}

// Shared CliArgs -> SweepSpec translation. `topo` owns the loaded topology
// for the lifetime of the run (the spec holds a pointer).
tempo::SweepSpec build_spec(const CliArgs& a, std::optional<tempo::Topology>& topo) {
    tempo::SweepSpec s;
    s.engines.clear();
    for (const std::string& e : a.engines) s.engines.push_back(tempo::parse_engine(e));
    s.workload.model = tempo::parse_model(a.model);
    s.workload.load = tempo::parse_load(a.load);
    s.workload.balance = tempo::parse_balance(a.balance);
    s.workload.scale = a.scale;
    s.workload.channels = a.channels;
    s.workload.grain = a.grain;
    if (!a.threads.empty()) s.threads = a.threads;
    s.samples = a.samples;
    s.duration_s = a.duration_s;
    s.events = a.events;
    s.seed = a.seed;
    s.corrupt_tiebreak = a.corrupt_tiebreak;
    s.engine.pin_threads = !a.no_pin;
    if (!a.topology_file.empty()) {
        topo.emplace(tempo::Topology::load_file(a.topology_file));
        s.engine.topology = &*topo;
    }
    const tempo::Topology machine =
        s.engine.topology != nullptr ? *s.engine.topology : tempo::Topology::discover();
    s.engine.placement = pick_placement(a.placement, machine, s.threads);
    return s;
}

int run_bench(const CliArgs& a) {
    try {
        std::optional<tempo::Topology> topo;
        tempo::SweepSpec spec = build_spec(a, topo);
        const std::vector<tempo::BenchRow> rows = tempo::run_sweep(spec);
        if (a.out == "-") {
            tempo::emit_csv(rows, std::cout);
        } else {
            tempo::emit_csv(rows, a.out);
        }
        return 0;
    } catch (const tempo::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const tempo::CapacityIoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

int run_verify(const CliArgs& a) {
    try {
        std::optional<tempo::Topology> topo;
        tempo::SweepSpec spec = build_spec(a, topo);
        const tempo::VerifyReport rep = tempo::verify_mode(spec);
        for (const tempo::VerifyCheck& c : rep.checks) {
            std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name;
            if (!c.detail.empty() && !c.pass) std::cout << " — " << c.detail;
            std::cout << "\n";
        }
        std::cout << (rep.ok() ? "verification passed" : "verification FAILED") << " ("
                  << rep.checks.size() << " checks)\n";
        return rep.ok() ? 0 : 2;
    } catch (const tempo::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const tempo::CapacityIoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        // An engine failure mid-verification is a verification failure.
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tempo — parallel discrete-event simulation benchmark harness"};
    app.require_subcommand(1);

    CliArgs bench_args;
    bench_args.engines = {"seq"};
    CliArgs verify_args;
    // Verification defaults: both parallel engines, a modest budget, and a
    // small thread ladder.
    verify_args.engines = {"conservative", "optimistic"};
    verify_args.threads = {1, 2, 4};
    verify_args.events = 10000;

    CLI::App* bench =
        app.add_subcommand("bench", "Run engine x model x threads sweeps; emit CSV");
    add_common_options(bench, bench_args);
    bench->add_option("--samples", bench_args.samples, "Samples per configuration")
        ->capture_default_str();
    bench->add_option("--duration-s", bench_args.duration_s,
                      "Wall-clock seconds per sample (ignored when --events > 0)")
        ->capture_default_str();
    bench->add_option("--out", bench_args.out, "CSV output path ('-' = stdout)")
        ->capture_default_str();

    CLI::App* verify = app.add_subcommand(
        "verify", "Check parallel engines against the sequential oracle");
    add_common_options(verify, verify_args);
    verify->add_flag("--corrupt-tiebreak", verify_args.corrupt_tiebreak,
                     "Negative control: corrupt the window drain order")
        ->group(""); // test hook; hidden from help

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help or the usage error
        return code == 0 ? 0 : 1;
    }

    if (bench->parsed()) return run_bench(bench_args);
    return run_verify(verify_args);
}
