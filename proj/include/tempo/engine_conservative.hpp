#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "tempo/barrier.hpp"
#include "tempo/engine_options.hpp"
#include "tempo/errors.hpp"
#include "tempo/metrics.hpp"
#include "tempo/model.hpp"
#include "tempo/object_calendar.hpp"
#include "tempo/rng.hpp"
#include "tempo/topology.hpp"

namespace tempo {

// Window-synchronized parallel scheduler.
//
// Virtual time is cut into windows of width L (the model lookahead). Every
// event emitted while processing window w lands at ts >= now + L, i.e. in a
// strictly later window, so all events of the current window are mutually
// independent across objects and can be processed in parallel, each object by
// exactly one thread. A barrier closes the window; the leader then jumps the
// clock to the window holding the minimum pending timestamp.
//
// Objects are homed to threads (first-touch initialization, per-object state,
// RNG stream and sequence counter); per window, objects are dispensed from
// per-NUMA-node atomic counters — each thread drains its own node's list
// first, then steals from the other nodes in ascending order.
//
// Determinism: each object's events are processed in key order (the calendar
// drains sorted, windows ascend), which reproduces the sequential engine's
// per-object order exactly, draw for draw and sequence number for sequence
// number. Fingerprints therefore match the sequential engine bit for bit for
// any thread count.
template <SimulationModel M>
RunResult run_conservative(const M& model, std::uint64_t seed, const StopCondition& stop,
                           const EngineOptions& opt = {}) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();

    const std::size_t n = model.object_count();
    const double width = model.lookahead();
    if (!(width > 0.0)) throw ConfigError("conservative engine needs a positive lookahead");
    const int threads = std::max(1, opt.threads);
    const double min_emit_delay = opt.audit ? width : 0.0;

    const Topology topo = opt.topology != nullptr ? *opt.topology : Topology::discover();
    const std::vector<CpuSlot> plan = plan_affinity(topo, opt.placement, threads);
    const std::vector<std::uint32_t> home = home_objects(n, static_cast<std::size_t>(threads),
                                                         opt.homing);

    // Objects grouped by the NUMA node of their owning thread.
    const int nodes = topo.node_count();
    std::vector<std::vector<ObjectId>> members(static_cast<std::size_t>(nodes));
    for (ObjectId o = 0; o < n; ++o) {
        members[static_cast<std::size_t>(plan[home[o]].node)].push_back(o);
    }

    struct alignas(64) NodePick {
        std::atomic<std::size_t> next{0};
    };
    std::vector<NodePick> picks(static_cast<std::size_t>(nodes));

    std::vector<std::optional<typename M::State>> states(n);
    std::vector<std::optional<RngStream>> rngs(n);
    std::vector<std::unique_ptr<ObjectCalendar>> calendars(n);
    std::vector<std::uint64_t> seqs(n, 0);
    std::vector<std::uint64_t> traces(n, 0);
    std::vector<std::uint64_t> counts(n, 0);
    std::vector<EventKey> last_key(opt.audit ? n : 0);
    std::vector<std::vector<EventKey>> keys(opt.record_traces ? n : 0);

    struct alignas(64) Slot {
        std::uint64_t committed = 0;
        double max_ts = 0.0;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(threads));

    struct Control {
        std::int64_t window = 0;
        bool done = false;
        bool any_window = false; // a window has been dispensed and closed
        std::uint64_t committed_total = 0;
        bool warm_done = false;
        std::uint64_t warm_committed = 0;
        double warm_elapsed = 0.0;
    } ctrl;
    std::atomic<bool> abort{false};
    std::exception_ptr first_error;
    std::mutex error_mu;

    auto fail = [&](std::exception_ptr e) {
        std::lock_guard lk(error_mu);
        if (!first_error) first_error = e;
        abort.store(true, std::memory_order_relaxed);
    };

    SenseBarrier barrier(threads);
    const double warmup_s = stop.wall_seconds * stop.warmup_frac;

    auto leader = [&] {
        try {
            if (abort.load(std::memory_order_relaxed)) {
                ctrl.done = true;
                return;
            }
            std::uint64_t total = 0;
            for (const Slot& s : slots) total += s.committed;
            ctrl.committed_total = total;

            if (opt.audit && ctrl.any_window) {
                // Exactly-once dispensing: every node list must be exhausted.
                for (int nd = 0; nd < nodes; ++nd) {
                    const auto& pk = picks[static_cast<std::size_t>(nd)];
                    if (pk.next.load(std::memory_order_relaxed) <
                        members[static_cast<std::size_t>(nd)].size()) {
                        throw ConsistencyError("window closed with undispensed objects");
                    }
                }
            }

            if (stop.mode == StopCondition::Mode::events && total >= stop.events) {
                ctrl.done = true;
                return;
            }
            if (stop.mode == StopCondition::Mode::wall) {
                const double elapsed =
                    std::chrono::duration<double>(Clock::now() - t0).count();
                if (!ctrl.warm_done && elapsed >= warmup_s) {
                    ctrl.warm_done = true;
                    ctrl.warm_committed = total;
                    ctrl.warm_elapsed = elapsed;
                }
                if (elapsed >= stop.wall_seconds) {
                    ctrl.done = true;
                    return;
                }
            }

            double gmin = kTimeInfinity;
            for (const auto& cal : calendars) {
                gmin = std::min(gmin, cal->min_pending_ts());
            }
            if (gmin == kTimeInfinity ||
                (stop.mode == StopCondition::Mode::horizon && gmin >= stop.horizon)) {
                ctrl.done = true;
                return;
            }
            ctrl.window = bucket_index(gmin, width);
            ctrl.any_window = true;
            for (auto& pk : picks) pk.next.store(0, std::memory_order_relaxed);
        } catch (...) {
            fail(std::current_exception());
            ctrl.done = true;
        }
    };

    auto worker = [&](int tid) {
        SenseBarrier::Sense sense;
        if (opt.pin_threads) pin_current_thread(plan[static_cast<std::size_t>(tid)].cpu);
        Slot& slot = slots[static_cast<std::size_t>(tid)];

        // Phase 0: first-touch construction of everything the thread owns.
        try {
            for (ObjectId o = 0; o < n; ++o) {
                if (home[o] != static_cast<std::uint32_t>(tid)) continue;
                states[o].emplace(model.initial_state(o));
                rngs[o].emplace(seed, o);
                calendars[o] = std::make_unique<ObjectCalendar>(o, width);
            }
        } catch (...) {
            fail(std::current_exception());
        }
        barrier.arrive_and_wait(sense);

        // Phase 1: owner threads emit the priming events.
        try {
            if (!abort.load(std::memory_order_relaxed)) {
                for (ObjectId o = 0; o < n; ++o) {
                    if (home[o] != static_cast<std::uint32_t>(tid)) continue;
                    auto emit = [&](ObjectId dst, double ts, std::uint16_t kind,
                                    const Payload& pl) {
                        calendars[dst]->insert(make_emitted_event(
                            o, seqs[o]++, dst, n, 0.0, ts, kind, pl, min_emit_delay));
                    };
                    model.initial_events(o, *states[o], *rngs[o], emit);
                }
            }
        } catch (...) {
            fail(std::current_exception());
        }
        barrier.arrive_and_wait(sense, leader);

        // Window loop.
        std::vector<EventRecord> evs;
        const int my_node = plan[static_cast<std::size_t>(tid)].node;
        while (!ctrl.done) {
            const std::int64_t w = ctrl.window;
            try {
                auto process_object = [&](ObjectId o) {
                    evs.clear();
                    calendars[o]->drain_window(w, evs);
                    if (opt.debug_unsorted_drain) std::reverse(evs.begin(), evs.end());
                    for (const EventRecord& ev : evs) {
                        const double ts = ev.key.ts.value();
                        if (stop.mode == StopCondition::Mode::horizon && ts >= stop.horizon) {
                            continue; // beyond the horizon: drained but never processed
                        }
                        if (opt.audit) {
                            if (bucket_index(ts, width) != w) {
                                throw ConsistencyError("event outside its window");
                            }
                            if (counts[o] > 0 && !(last_key[o] < ev.key)) {
                                throw ConsistencyError("events processed out of key order");
                            }
                            last_key[o] = ev.key;
                        }
                        auto emit = [&](ObjectId dst, double ets, std::uint16_t kind,
                                        const Payload& pl) {
                            calendars[dst]->insert(make_emitted_event(
                                o, seqs[o]++, dst, n, ts, ets, kind, pl, min_emit_delay));
                        };
                        model.on_event(*states[o], ev, *rngs[o], emit);
                        ++slot.committed;
                        ++counts[o];
                        traces[o] = chain(traces[o], key_hash(ev.key));
                        if (opt.record_traces) keys[o].push_back(ev.key);
                        slot.max_ts = std::max(slot.max_ts, ts);
                    }
                };
                auto drain_node = [&](int nd) {
                    auto& pk = picks[static_cast<std::size_t>(nd)];
                    const auto& mem = members[static_cast<std::size_t>(nd)];
                    for (;;) {
                        if (abort.load(std::memory_order_relaxed)) return;
                        const std::size_t i = pk.next.fetch_add(1, std::memory_order_relaxed);
                        if (i >= mem.size()) return;
                        process_object(mem[i]);
                    }
                };
                drain_node(my_node);
                for (int nd = 0; nd < nodes; ++nd) {
                    if (nd != my_node) drain_node(nd);
                }
            } catch (...) {
                fail(std::current_exception());
            }
            barrier.arrive_and_wait(sense, leader);
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);

    RunResult out;
    out.metrics.committed_events = ctrl.committed_total;
    out.metrics.processed_events = ctrl.committed_total;
    out.metrics.rollbacks = 0;
    out.metrics.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    const double span = ctrl.warm_done ? out.metrics.wall_seconds - ctrl.warm_elapsed
                                       : out.metrics.wall_seconds;
    const std::uint64_t base = ctrl.warm_done ? ctrl.warm_committed : 0;
    if (span > 0.0) {
        out.metrics.committed_eps =
            static_cast<double>(ctrl.committed_total - base) / span;
        out.metrics.total_eps = out.metrics.committed_eps;
    }
    Fingerprint fp{};
    for (ObjectId o = 0; o < n; ++o) {
        fp = combine(fp, object_commit_digest(model.state_digest(*states[o]), traces[o],
                                              counts[o]));
    }
    for (const Slot& s : slots) out.max_committed_ts = std::max(out.max_committed_ts, s.max_ts);
    out.fingerprint = fp;
    if (opt.record_traces) out.traces = std::move(keys);
    if constexpr (requires(const typename M::State& s) { model.observables(s); }) {
        out.observables.reserve(n);
        for (ObjectId o = 0; o < n; ++o) out.observables.push_back(model.observables(*states[o]));
    }
    return out;
}

} // namespace tempo
