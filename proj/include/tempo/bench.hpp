#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tempo/engine_options.hpp"
#include "tempo/errors.hpp"
#include "tempo/metrics.hpp"

namespace tempo {

enum class EngineKind { sequential, conservative, optimistic };
enum class ModelKind { pcs, highway };
enum class LoadLevel { light, medium, heavy };
enum class BalanceKind { balanced, unbalanced };

// Canonical CLI/CSV token for each enum value ("seq", "pcs", "light", ...).
std::string_view to_token(EngineKind e);
std::string_view to_token(ModelKind m);
std::string_view to_token(LoadLevel l);
std::string_view to_token(BalanceKind b);

// Case-sensitive token parsing; unknown tokens raise ConfigError listing the
// accepted spellings.
EngineKind parse_engine(std::string_view token);
ModelKind parse_model(std::string_view token);
LoadLevel parse_load(std::string_view token);
BalanceKind parse_balance(std::string_view token);

// A benchmark workload: which model, how hard it is driven, and its size.
//
// Loads map to the models' native knobs: for the cellular model the
// steady-state busy-channel target per cell is {120, 600, 1200} scaled by
// (channels / 5000), i.e. proportional to the per-cell capacity; for the
// highway model the initial density ratio is {0.25, 1.0, 1.5} of the
// reference zone capacity. `unbalanced` (highway only) keeps the configured
// density on the first half of the ring and halves it on the second half.
//
// `scale` shrinks object counts from the full-size configurations (4096
// cells / 3000 zones); 0 selects the desk defaults (256 cells / 256 zones).
struct WorkloadConfig {
    ModelKind model = ModelKind::pcs;
    LoadLevel load = LoadLevel::medium;
    BalanceKind balance = BalanceKind::balanced;
    double scale = 0.0;           // 0 = desk defaults; else fraction of full scale
    std::uint32_t channels = 512; // cellular: channels per cell
    std::uint32_t grain = 1;      // cellular: power-scan repetitions per admission
};

// One full sweep request: engines x thread counts x samples over a workload.
// Sample k runs with seed + k so samples are independent replicas.
struct SweepSpec {
    std::vector<EngineKind> engines{EngineKind::sequential};
    WorkloadConfig workload{};
    std::vector<int> threads{1};
    int samples = 20;
    double duration_s = 60.0; // wall-clock mode (the default)
    std::uint64_t events = 0; // > 0: committed-event budget replaces the wall clock
    double warmup_frac = 0.05;
    std::uint64_t seed = 1;
    EngineOptions engine{};   // placement/topology/pinning template for every run
    // Verification negative-control hook: corrupt the window engine's
    // drain order so the report must catch and name the divergence.
    bool corrupt_tiebreak = false;
};

// One CSV row: either a sample measurement or a per-configuration summary
// (mean / standard deviation of both throughputs over the samples).
struct BenchRow {
    EngineKind engine{};
    ModelKind model{};
    LoadLevel load{};
    BalanceKind balance{};
    int threads = 1;
    int sample = 0;
    bool summary = false;
    RunMetrics metrics{}; // zeroed on summary rows
    double committed_eps_mean = 0.0;
    double committed_eps_sd = 0.0;
    double total_eps_mean = 0.0;
    double total_eps_sd = 0.0;
};

// Fixed CSV schema. Summary rows put "summary" in the sample column and fill
// only the *_mean / *_sd columns; sample rows leave those four empty. For the
// sequential and window engines the count columns (rollbacks, committed,
// processed) are byte-stable across reruns in event-budget mode; anything
// divided by wall time is not, and the speculative engine's counts depend on
// commit-round timing.
extern const char* const kCsvHeader;

// "Release, g++ 12.x" style build descriptor for the CSV metadata line.
std::string build_profile();

// Run the sweep. Rows appear engine-major, then thread count, then sample,
// with one summary row after each configuration's samples.
// Raises ConfigError for invalid specs and CapacityIoError when a thread
// count exceeds the target machine's logical CPUs (the topology override if
// one is set, the discovered machine otherwise).
std::vector<BenchRow> run_sweep(const SweepSpec& spec);

// Serialize rows (metadata line, header, one line per row).
void emit_csv(const std::vector<BenchRow>& rows, std::ostream& os);
// Same, to a file; raises CapacityIoError naming the path on failure.
void emit_csv(const std::vector<BenchRow>& rows, const std::string& path);

struct VerifyCheck {
    std::string name;
    bool pass = false;
    std::string detail; // first diverging committed key on fingerprint failures
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    [[nodiscard]] bool ok() const {
        for (const VerifyCheck& c : checks) {
            if (!c.pass) return false;
        }
        return !checks.empty();
    }
};

// Deterministic cross-engine verification. Requires an event budget
// (spec.events > 0): a sequential probe finds the window-aligned virtual-time
// horizon covering the budget, the sequential engine at that horizon becomes
// the oracle, and every requested parallel engine must reproduce its
// committed fingerprint and count at every requested thread count. On a
// fingerprint mismatch the report names the first diverging committed key.
VerifyReport verify_mode(const SweepSpec& spec);

} // namespace tempo
