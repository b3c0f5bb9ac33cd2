#include "tempo/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <utility>

#include "tempo/engine_conservative.hpp"
#include "tempo/engine_optimistic.hpp"
#include "tempo/engine_sequential.hpp"
#include "tempo/models/highway.hpp"
#include "tempo/models/pcs.hpp"

namespace tempo {

namespace {

// Full-size configurations the scale factor shrinks from, and the desk
// defaults used when no scale is given.
constexpr double kPcsFullCells = 4096.0;
constexpr double kPcsFullChannels = 5000.0;
constexpr double kHighwayFullZones = 3000.0;
constexpr std::size_t kPcsDeskCells = 256;
constexpr std::size_t kHighwayDeskZones = 256;

// Per-cell busy-channel targets at full capacity and highway density ratios,
// indexed by LoadLevel.
constexpr double kPcsBusyTargets[3] = {120.0, 600.0, 1200.0};
constexpr double kHighwayDensities[3] = {0.25, 1.0, 1.5};

PcsModel make_pcs(const WorkloadConfig& w) {
    PcsModel::Params p;
    if (w.scale > 0.0) {
        // Keep the grid square when shrinking the full-size cell count.
        const auto side =
            std::max<long long>(2, std::llround(std::sqrt(kPcsFullCells * w.scale)));
        p.cells = static_cast<std::size_t>(side * side);
    } else {
        p.cells = kPcsDeskCells;
    }
    p.channels = w.channels;
    p.target_busy =
        kPcsBusyTargets[static_cast<int>(w.load)] * w.channels / kPcsFullChannels;
    p.grain = w.grain;
    return PcsModel(p);
}

HighwayModel make_highway(const WorkloadConfig& w) {
    HighwayModel::Params p;
    p.zones = w.scale > 0.0
                  ? static_cast<std::size_t>(
                        std::max<long long>(2, std::llround(kHighwayFullZones * w.scale)))
                  : kHighwayDeskZones;
    p.occupancy = kHighwayDensities[static_cast<int>(w.load)];
    p.unbalanced = w.balance == BalanceKind::unbalanced;
    return HighwayModel(p);
}

template <class F>
decltype(auto) with_model(const WorkloadConfig& w, F&& f) {
    if (w.model == ModelKind::pcs) return f(make_pcs(w));
    return f(make_highway(w));
}

template <class M>
RunResult run_engine(EngineKind e, const M& model, std::uint64_t seed,
                     const StopCondition& stop, const EngineOptions& opt) {
    switch (e) {
    case EngineKind::sequential: return run_sequential(model, seed, stop, opt);
    case EngineKind::conservative: return run_conservative(model, seed, stop, opt);
    case EngineKind::optimistic: return run_optimistic(model, seed, stop, opt);
    }
    throw ConfigError("unknown engine kind");
}

void validate(const SweepSpec& s) {
    if (s.engines.empty()) throw ConfigError("no engines selected");
    if (s.threads.empty()) throw ConfigError("no thread counts selected");
    for (int t : s.threads) {
        if (t < 1) throw ConfigError("thread counts must be at least 1");
    }
    if (s.samples < 1) throw ConfigError("samples must be at least 1");
    if (s.events == 0 && !(s.duration_s > 0.0)) {
        throw ConfigError("wall-clock runs need a positive duration");
    }
    if (!(s.warmup_frac >= 0.0 && s.warmup_frac < 1.0)) {
        throw ConfigError("warmup fraction must lie in [0, 1)");
    }
    if (s.workload.scale < 0.0 || s.workload.scale > 1.0) {
        throw ConfigError("scale must lie in (0, 1] (0 = desk defaults)");
    }
    if (s.workload.channels == 0) throw ConfigError("channels must be at least 1");
    if (s.workload.grain == 0) throw ConfigError("grain must be at least 1");
    if (s.workload.model == ModelKind::pcs &&
        s.workload.balance == BalanceKind::unbalanced) {
        throw ConfigError("unbalanced workloads are defined for the highway model only");
    }

    // Capacity: thread counts are checked against the machine the run
    // targets — the supplied topology override, or the discovered host.
    const int cap = s.engine.topology != nullptr ? s.engine.topology->cpu_count()
                                                 : Topology::discover().cpu_count();
    for (int t : s.threads) {
        if (t > cap) {
            throw CapacityIoError("thread count " + std::to_string(t) +
                                  " oversubscribes the target machine (" +
                                  std::to_string(cap) + " logical cpus)");
        }
    }
}

StopCondition stop_for(const SweepSpec& s) {
    return s.events > 0 ? StopCondition::after_events(s.events)
                        : StopCondition::wall_clock(s.duration_s, s.warmup_frac);
}

// Mean and population standard deviation (zero for a single sample).
std::pair<double, double> mean_sd(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fmt_key(const EventKey& k) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "(ts=%.17g, dst=%u, src=%u, seq=%llu)", k.ts.value(),
                  static_cast<unsigned>(k.dst), static_cast<unsigned>(k.src),
                  static_cast<unsigned long long>(k.seq));
    return buf;
}

// First committed key where `got` departs from `want`, searching objects in
// index order. Returns an empty string when the traces are identical.
std::string first_trace_divergence(const std::vector<std::vector<EventKey>>& want,
                                   const std::vector<std::vector<EventKey>>& got) {
    const std::size_t n = std::min(want.size(), got.size());
    for (std::size_t o = 0; o < n; ++o) {
        const std::size_t len = std::min(want[o].size(), got[o].size());
        for (std::size_t i = 0; i < len; ++i) {
            if (got[o][i] != want[o][i]) {
                return "object " + std::to_string(o) + ", commit " + std::to_string(i) +
                       ": got " + fmt_key(got[o][i]) + ", expected " + fmt_key(want[o][i]);
            }
        }
        if (want[o].size() != got[o].size()) {
            return "object " + std::to_string(o) + ": committed " +
                   std::to_string(got[o].size()) + " events, expected " +
                   std::to_string(want[o].size());
        }
    }
    return {};
}

} // namespace

std::string_view to_token(EngineKind e) {
    switch (e) {
    case EngineKind::sequential: return "seq";
    case EngineKind::conservative: return "conservative";
    case EngineKind::optimistic: return "optimistic";
    }
    return "?";
}

std::string_view to_token(ModelKind m) {
    return m == ModelKind::pcs ? "pcs" : "highway";
}

std::string_view to_token(LoadLevel l) {
    switch (l) {
    case LoadLevel::light: return "light";
    case LoadLevel::medium: return "medium";
    case LoadLevel::heavy: return "heavy";
    }
    return "?";
}

std::string_view to_token(BalanceKind b) {
    return b == BalanceKind::balanced ? "balanced" : "unbalanced";
}

EngineKind parse_engine(std::string_view token) {
    if (token == "seq") return EngineKind::sequential;
    if (token == "conservative") return EngineKind::conservative;
    if (token == "optimistic") return EngineKind::optimistic;
    throw ConfigError("unknown engine '" + std::string(token) +
                      "' (expected seq, conservative, or optimistic)");
}

ModelKind parse_model(std::string_view token) {
    if (token == "pcs") return ModelKind::pcs;
    if (token == "highway") return ModelKind::highway;
    throw ConfigError("unknown model '" + std::string(token) +
                      "' (expected pcs or highway)");
}

LoadLevel parse_load(std::string_view token) {
    if (token == "light") return LoadLevel::light;
    if (token == "medium") return LoadLevel::medium;
    if (token == "heavy") return LoadLevel::heavy;
    throw ConfigError("unknown load '" + std::string(token) +
                      "' (expected light, medium, or heavy)");
}

BalanceKind parse_balance(std::string_view token) {
    if (token == "balanced") return BalanceKind::balanced;
    if (token == "unbalanced") return BalanceKind::unbalanced;
    throw ConfigError("unknown balance '" + std::string(token) +
                      "' (expected balanced or unbalanced)");
}

const char* const kCsvHeader =
    "engine,model,load,balance,threads,sample,committed_eps,total_eps,rollbacks,"
    "wall_s,committed,processed,committed_eps_mean,committed_eps_sd,total_eps_mean,"
    "total_eps_sd";

std::string build_profile() {
#ifdef NDEBUG
    std::string p = "Release";
#else
    std::string p = "Debug";
#endif
#if defined(__clang__)
    p += ", clang++ ";
#elif defined(__GNUC__)
    p += ", g++ ";
#else
    p += ", compiler ";
#endif
    p += __VERSION__;
    return p;
}

std::vector<BenchRow> run_sweep(const SweepSpec& spec) {
    validate(spec);
    const StopCondition stop = stop_for(spec);

    std::vector<BenchRow> rows;
    for (EngineKind e : spec.engines) {
        for (int t : spec.threads) {
            std::vector<double> ceps;
            std::vector<double> teps;
            for (int k = 0; k < spec.samples; ++k) {
                EngineOptions o = spec.engine;
                o.threads = t;
                // Each sample is an independent replica of the workload.
                const RunResult r = with_model(spec.workload, [&](const auto& model) {
                    return run_engine(e, model, spec.seed + static_cast<std::uint64_t>(k),
                                      stop, o);
                });
                BenchRow row;
                row.engine = e;
                row.model = spec.workload.model;
                row.load = spec.workload.load;
                row.balance = spec.workload.balance;
                row.threads = t;
                row.sample = k;
                row.metrics = r.metrics;
                rows.push_back(row);
                ceps.push_back(r.metrics.committed_eps);
                teps.push_back(r.metrics.total_eps);
            }
            BenchRow sum;
            sum.engine = e;
            sum.model = spec.workload.model;
            sum.load = spec.workload.load;
            sum.balance = spec.workload.balance;
            sum.threads = t;
            sum.summary = true;
            std::tie(sum.committed_eps_mean, sum.committed_eps_sd) = mean_sd(ceps);
            std::tie(sum.total_eps_mean, sum.total_eps_sd) = mean_sd(teps);
            rows.push_back(sum);
        }
    }
    return rows;
}

void emit_csv(const std::vector<BenchRow>& rows, std::ostream& os) {
    os << "# build=" << build_profile() << "\n";
    os << kCsvHeader << "\n";
    for (const BenchRow& r : rows) {
        os << to_token(r.engine) << ',' << to_token(r.model) << ',' << to_token(r.load)
           << ',' << to_token(r.balance) << ',' << r.threads << ',';
        if (r.summary) {
            os << "summary,,,,,,," << fmt_real(r.committed_eps_mean) << ','
               << fmt_real(r.committed_eps_sd) << ',' << fmt_real(r.total_eps_mean) << ','
               << fmt_real(r.total_eps_sd);
        } else {
            os << r.sample << ',' << fmt_real(r.metrics.committed_eps) << ','
               << fmt_real(r.metrics.total_eps) << ',' << r.metrics.rollbacks << ','
               << fmt_real(r.metrics.wall_seconds) << ',' << r.metrics.committed_events
               << ',' << r.metrics.processed_events << ",,,,";
        }
        os << '\n';
    }
}

void emit_csv(const std::vector<BenchRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f.is_open()) {
        throw CapacityIoError("cannot open CSV output file: " + path);
    }
    emit_csv(rows, f);
    f.flush();
    if (!f.good()) {
        throw CapacityIoError("failed while writing CSV output file: " + path);
    }
}

VerifyReport verify_mode(const SweepSpec& spec) {
    validate(spec);
    if (spec.events == 0) {
        throw ConfigError("verification needs a committed-event budget (--events)");
    }

    VerifyReport rep;
    auto check = [&](std::string name, bool pass, std::string detail = {}) {
        rep.checks.push_back({std::move(name), pass, std::move(detail)});
    };

    with_model(spec.workload, [&](const auto& model) {
        EngineOptions base = spec.engine;
        base.record_traces = true;
        base.threads = 1;

        // Probe: find the window-aligned horizon covering the budget. The
        // event set {ts < horizon} is schedule-independent, which is what
        // makes exact cross-engine comparison possible.
        const RunResult probe =
            run_sequential(model, spec.seed, StopCondition::after_events(spec.events));
        check("sequential probe covers the budget",
              probe.metrics.committed_events >= spec.events,
              "committed " + std::to_string(probe.metrics.committed_events) + " of " +
                  std::to_string(spec.events) + " requested");
        const double lookahead = model.lookahead();
        const double horizon =
            (std::floor(probe.max_committed_ts / lookahead) + 1.0) * lookahead;
        const StopCondition stop = StopCondition::at_horizon(horizon);

        const RunResult oracle = run_sequential(model, spec.seed, stop, base);

        for (EngineKind e : spec.engines) {
            if (e == EngineKind::sequential) continue;
            for (int t : spec.threads) {
                EngineOptions o = base;
                o.threads = t;
                o.audit = true;
                if (spec.corrupt_tiebreak && e == EngineKind::conservative) {
                    // Negative control: corrupt the drain order and disable
                    // the engine's own audit so the cross-engine comparison
                    // (not the engine) must catch the divergence.
                    o.debug_unsorted_drain = true;
                    o.audit = false;
                }
                const std::string tag =
                    std::string(to_token(e)) + " t=" + std::to_string(t);

                RunResult r;
                try {
                    r = run_engine(e, model, spec.seed, stop, o);
                } catch (const SimError& err) {
                    check(tag + ": run completes", false, err.what());
                    continue;
                } catch (const ConsistencyError& err) {
                    check(tag + ": run completes", false, err.what());
                    continue;
                }

                bool match = r.fingerprint == oracle.fingerprint &&
                             r.metrics.committed_events == oracle.metrics.committed_events;
                std::string detail;
                if (!match) {
                    detail = first_trace_divergence(oracle.traces, r.traces);
                    if (detail.empty()) {
                        detail = "committed traces identical but state digests diverge";
                    }
                    if (r.metrics.committed_events != oracle.metrics.committed_events) {
                        detail += " [committed " +
                                  std::to_string(r.metrics.committed_events) + " != " +
                                  std::to_string(oracle.metrics.committed_events) + "]";
                    }
                }
                check(tag + ": committed history matches the sequential oracle", match,
                      std::move(detail));
                check(tag + ": committed <= processed",
                      r.metrics.committed_events <= r.metrics.processed_events,
                      std::to_string(r.metrics.committed_events) + " vs " +
                          std::to_string(r.metrics.processed_events));
                if (e == EngineKind::conservative) {
                    check(tag + ": no rollbacks",
                          r.metrics.rollbacks == 0,
                          std::to_string(r.metrics.rollbacks) + " rollbacks");
                }
            }
        }
    });
    return rep;
}

} // namespace tempo
