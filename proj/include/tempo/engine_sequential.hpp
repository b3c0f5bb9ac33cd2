#pragma once

#include <chrono>
#include <queue>
#include <vector>

#include "tempo/engine_options.hpp"
#include "tempo/errors.hpp"
#include "tempo/event.hpp"
#include "tempo/fingerprint.hpp"
#include "tempo/metrics.hpp"
#include "tempo/model.hpp"
#include "tempo/rng.hpp"

namespace tempo {

// Reference scheduler: one thread, one binary heap, events processed in
// strict key order. Every other engine must reproduce its fingerprint for
// the same (model, seed, horizon).
template <SimulationModel M>
RunResult run_sequential(const M& model, std::uint64_t seed, const StopCondition& stop,
                         const EngineOptions& opt = {}) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    const std::size_t n = model.object_count();
    const double min_delay = opt.audit ? model.lookahead() : 0.0;

    std::vector<typename M::State> states;
    states.reserve(n);
    std::vector<RngStream> rngs;
    rngs.reserve(n);
    std::vector<std::uint64_t> seqs(n, 0);
    std::vector<std::uint64_t> traces(n, 0);
    std::vector<std::uint64_t> counts(n, 0);
    std::vector<std::vector<EventKey>> keys(opt.record_traces ? n : 0);
    for (ObjectId i = 0; i < n; ++i) {
        states.push_back(model.initial_state(i));
        rngs.emplace_back(seed, i);
    }

    auto cmp = [](const EventRecord& a, const EventRecord& b) { return b.key < a.key; };
    std::priority_queue<EventRecord, std::vector<EventRecord>, decltype(cmp)> heap(cmp);

    double now = 0.0;
    ObjectId src = 0;
    auto emit = [&](ObjectId dst, double ts, std::uint16_t kind, const Payload& p) {
        heap.push(make_emitted_event(src, seqs[src]++, dst, n, now, ts, kind, p, min_delay));
    };
    for (ObjectId i = 0; i < n; ++i) {
        src = i;
        model.initial_events(i, states[i], rngs[i], emit);
    }

    const double warmup_s = stop.wall_seconds * stop.warmup_frac;
    std::uint64_t committed = 0, warm_committed = 0;
    double warm_elapsed = 0.0;
    bool warm_done = stop.mode != StopCondition::Mode::wall;
    double max_ts = 0.0;

    while (!heap.empty()) {
        if (stop.mode == StopCondition::Mode::events && committed >= stop.events) break;
        const EventRecord ev = heap.top();
        const double ts = ev.key.ts.value();
        if (stop.mode == StopCondition::Mode::horizon && ts >= stop.horizon) break;
        if (stop.mode == StopCondition::Mode::wall) {
            const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
            if (!warm_done && elapsed >= warmup_s) {
                warm_committed = committed;
                warm_elapsed = elapsed;
                warm_done = true;
            }
            if (elapsed >= stop.wall_seconds) break;
        }
        heap.pop();

        now = ts;
        src = ev.key.dst;
        model.on_event(states[src], ev, rngs[src], emit);

        ++committed;
        ++counts[src];
        traces[src] = chain(traces[src], key_hash(ev.key));
        if (opt.record_traces) keys[src].push_back(ev.key);
        max_ts = ts;
    }

    RunResult out;
    out.metrics.committed_events = committed;
    out.metrics.processed_events = committed;
    out.metrics.rollbacks = 0;
    out.metrics.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    const double span = warm_done && warm_elapsed > 0.0
                            ? out.metrics.wall_seconds - warm_elapsed
                            : out.metrics.wall_seconds;
    const std::uint64_t base = warm_elapsed > 0.0 ? warm_committed : 0;
    if (span > 0.0) {
        out.metrics.committed_eps = static_cast<double>(committed - base) / span;
        out.metrics.total_eps = out.metrics.committed_eps;
    }
    Fingerprint fp{};
    for (ObjectId i = 0; i < n; ++i) {
        fp = combine(fp, object_commit_digest(model.state_digest(states[i]), traces[i],
                                              counts[i]));
    }
    out.fingerprint = fp;
    out.max_committed_ts = max_ts;
    if (opt.record_traces) out.traces = std::move(keys);
    if constexpr (requires(const typename M::State& s) { model.observables(s); }) {
        out.observables.reserve(n);
        for (ObjectId i = 0; i < n; ++i) out.observables.push_back(model.observables(states[i]));
    }
    return out;
}

} // namespace tempo
