#pragma once

#include <cstdint>
#include <vector>

#include "tempo/event.hpp"
#include "tempo/fingerprint.hpp"
#include "tempo/time.hpp"

namespace tempo {

// When a run stops.
//   events:  stop once the committed-event count reaches `events`. Sequential
//            runs stop exactly there; parallel engines stop at the next
//            window boundary / GVT round at or past the budget.
//   horizon: process exactly the events with ts < `horizon`. The event set is
//            schedule-independent, so two runs with the same seed and horizon
//            commit identical events regardless of engine or thread count.
//   wall:    run for `wall_seconds` of real time; the first `warmup_frac`
//            of the measurement window is excluded from throughput.
struct StopCondition {
    enum class Mode { events, horizon, wall };

    Mode mode = Mode::events;
    std::uint64_t events = 0;
    double horizon = 0.0;
    double wall_seconds = 0.0;
    double warmup_frac = 0.05;

    static StopCondition after_events(std::uint64_t n) {
        return StopCondition{Mode::events, n, 0.0, 0.0, 0.0};
    }
    static StopCondition at_horizon(double t) {
        return StopCondition{Mode::horizon, 0, t, 0.0, 0.0};
    }
    static StopCondition wall_clock(double seconds, double warmup_frac = 0.05) {
        return StopCondition{Mode::wall, 0, 0.0, seconds, warmup_frac};
    }
};

struct RunMetrics {
    std::uint64_t committed_events = 0; // survived to commit (never rolled back)
    std::uint64_t processed_events = 0; // dispatched, including later-undone work
    std::uint64_t rollbacks = 0;        // rollback episodes (optimistic engine only)
    double wall_seconds = 0.0;          // full run wall time
    double committed_eps = 0.0;         // committed events / s over the post-warmup window
    double total_eps = 0.0;             // processed events / s over the post-warmup window
};

struct RunResult {
    RunMetrics metrics;
    Fingerprint fingerprint;            // combined committed-state fingerprint
    double max_committed_ts = 0.0;      // largest committed event timestamp
    // Per-object committed key sequences; populated only when
    // EngineOptions::record_traces is set (verification diffs).
    std::vector<std::vector<EventKey>> traces;
    // Per-object observable vectors, filled from the final committed states
    // when the model provides an `observables(const State&)` hook.
    std::vector<std::vector<double>> observables;
};

} // namespace tempo
