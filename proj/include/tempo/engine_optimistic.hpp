#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
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
#include "tempo/rng.hpp"
#include "tempo/shared_queue.hpp"
#include "tempo/topology.hpp"

namespace tempo {

namespace timewarp {

constexpr std::uint32_t kUnbound = 0xFFFFFFFFu;

// One processed event, retained until its timestamp commits. `self` is the
// queue node of the event itself (re-flagged pending if the entry is undone
// and the event is still valid); `emitted` are the nodes this processing
// inserted, i.e. the targets of annihilation when the entry is undone.
struct ProcessedEntry {
    EventRecord ev;
    EventHandle self;
    std::vector<EventHandle> emitted;
};

// Snapshot of everything needed to restart an object as of "the first
// `entries_included` processed events have been applied".
template <class State>
struct Checkpoint {
    State state;
    RngStream rng;
    std::uint64_t seq = 0;
    EventKey last{};
    bool has_last = false;
    std::uint64_t entries_included = 0; // absolute processed-entry count
};

// Per-object speculation context. The bind word admits one worker at a time;
// every field below `note` is touched only by the current binder, or by the
// round leader while all workers are parked at the round barrier.
template <class State>
struct alignas(64) ObjectContext {
    std::atomic<std::uint32_t> binder{kUnbound};
    // Pending forced-rollback target: an atomic minimum over the IEEE bit
    // patterns of (non-negative) timestamps, +inf when clear. Posted by a
    // rollback that annihilates an event this object already processed;
    // honored by whoever holds (or next acquires) the bind.
    std::atomic<std::uint64_t> note{time_bits(kTimeInfinity)};

    std::optional<State> state;
    RngStream rng;
    std::uint64_t seq = 0;
    EventKey last{}; // key of the newest processed-log entry
    bool has_last = false;

    std::uint64_t log_base = 0; // absolute index of log.front()
    std::deque<ProcessedEntry> log;
    std::deque<Checkpoint<State>> ckpts;

    // Commit bookkeeping, advanced by the round leader only.
    std::uint64_t committed = 0; // absolute committed prefix length
    std::uint64_t trace = 0;
    std::vector<EventKey> committed_keys;
};

} // namespace timewarp

// Speculative parallel scheduler.
//
// Workers claim low-timestamp events from a fully shared pool and execute
// them immediately, without waiting for proof that no earlier event can
// still arrive. Each object keeps a log of processed events plus periodic
// state checkpoints; when a straggler (an event at or below the object's
// speculated position) shows up, the object rolls back: events emitted by
// the undone suffix are annihilated, still-valid undone events are re-flagged
// pending, the newest viable checkpoint is restored and the retained log
// prefix is replayed to rebuild state, RNG and sequence counter exactly.
// Annihilating an event another object already processed posts a forced-
// rollback note (an atomic-min word) on that object and try-binds it so the
// cascade keeps moving without ever blocking.
//
// Commit is driven by rounds at a sense barrier: with every worker parked,
// the global virtual time floor is simply the minimum over the pool's
// pending/in-processing timestamps and all unhonored notes. Everything below
// it is folded into the per-object commit digests, checkpoints and log
// prefixes that can no longer be needed are trimmed, and the pool reclaims
// fossil buckets. Between rounds, speculation is completely asynchronous.
//
// The commit fold walks each object's log in key order, so committed history
// equals the sequential engine's per-object order draw for draw, and horizon
// runs reproduce the sequential fingerprint bit for bit at any thread count.
// With the default claim band of 0 a single-threaded run only ever claims a
// minimum-timestamp event, which (delays being clamped at or above the
// padded lookahead) provably never creates a straggler: such runs commit
// with zero rollbacks.
template <SimulationModel M>
RunResult run_optimistic(const M& model, std::uint64_t seed, const StopCondition& stop,
                         const EngineOptions& opt = {}) {
    using Clock = std::chrono::steady_clock;
    using State = typename M::State;
    using Ctx = timewarp::ObjectContext<State>;

    const auto t0 = Clock::now();
    const std::size_t n = model.object_count();
    const double lookahead = model.lookahead();
    if (!(lookahead > 0.0)) throw ConfigError("optimistic engine needs a positive lookahead");
    const int threads = std::max(1, opt.threads);
    const double min_emit_delay = opt.audit ? lookahead : 0.0;
    const std::uint32_t ckpt_every = std::max<std::uint32_t>(1, opt.checkpoint_interval);
    const double limit_ts =
        stop.mode == StopCondition::Mode::horizon ? stop.horizon : kTimeInfinity;
    const std::uint64_t kNoteClear = time_bits(kTimeInfinity);

    const Topology topo = opt.topology != nullptr ? *opt.topology : Topology::discover();
    const std::vector<CpuSlot> plan = plan_affinity(topo, opt.placement, threads);
    const std::vector<std::uint32_t> home =
        home_objects(n, static_cast<std::size_t>(threads), opt.homing);
    std::vector<int> node_of(n);
    for (ObjectId o = 0; o < n; ++o) node_of[o] = plan[home[o]].node;

    SharedCalendarQueue queue(SharedCalendarQueue::Config{.bucket_width = lookahead});
    const double bucket_w = queue.bucket_width();
    SharedCalendarQueue::Ticket round_ticket(queue);

    std::vector<std::unique_ptr<Ctx>> ctxs(n);

    struct alignas(64) Slot {
        std::uint64_t processed = 0;
        std::uint64_t rollbacks = 0;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(threads));

    struct Control {
        double gvt = 0.0;
        bool done = false;
        std::uint64_t committed_total = 0;
        double max_committed_ts = 0.0;
        bool warm_done = false;
        std::uint64_t warm_committed = 0;
        std::uint64_t warm_processed = 0;
        double warm_elapsed = 0.0;
    } ctrl;

    std::atomic<bool> gvt_requested{false};
    std::atomic<std::uint64_t> since_round{0};
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

    // First log index whose timestamp is at or above `ts` (the log is key-
    // sorted, so this is the start of the undo/commit suffix).
    auto suffix_by_ts = [](const Ctx& c, double ts) -> std::size_t {
        auto it = std::lower_bound(
            c.log.begin(), c.log.end(), ts,
            [](const timewarp::ProcessedEntry& e, double t) { return e.ev.key.ts.value() < t; });
        return static_cast<std::size_t>(it - c.log.begin());
    };
    auto suffix_by_key = [](const Ctx& c, const EventKey& k) -> std::size_t {
        auto it = std::lower_bound(
            c.log.begin(), c.log.end(), k,
            [](const timewarp::ProcessedEntry& e, const EventKey& key) { return e.ev.key < key; });
        return static_cast<std::size_t>(it - c.log.begin());
    };

    // Rebuild state/rng/seq/last as of "the first log_base + to_rel entries
    // applied": restore the newest checkpoint at or below that point (later
    // snapshots embed undone history and are dropped) and replay the retained
    // entries in between. Replay only recomputes state and draws; the events
    // the original execution emitted still exist, so emission is reduced to
    // the sequence-counter bump that keeps regenerated keys identical.
    auto restore_to = [&](Ctx& c, std::size_t to_rel) {
        const std::uint64_t to_abs = c.log_base + to_rel;
        while (!c.ckpts.empty() && c.ckpts.back().entries_included > to_abs) c.ckpts.pop_back();
        if (c.ckpts.empty()) throw ConsistencyError("rollback lost its base checkpoint");
        const timewarp::Checkpoint<State>& ck = c.ckpts.back();
        *c.state = ck.state;
        c.rng = ck.rng;
        c.seq = ck.seq;
        c.last = ck.last;
        c.has_last = ck.has_last;
        for (std::size_t i = static_cast<std::size_t>(ck.entries_included - c.log_base);
             i < to_rel; ++i) {
            const timewarp::ProcessedEntry& e = c.log[i];
            auto replay = [&](ObjectId, double, std::uint16_t, const Payload&) { ++c.seq; };
            model.on_event(*c.state, e.ev, c.rng, replay);
            c.last = e.ev.key;
            c.has_last = true;
        }
    };

    auto post_note = [&](ObjectId d, double ts) {
        std::atomic<std::uint64_t>& w = ctxs[d]->note;
        const std::uint64_t bits = time_bits(ts);
        std::uint64_t cur = w.load(std::memory_order_seq_cst);
        while (bits < cur && !w.compare_exchange_weak(cur, bits, std::memory_order_seq_cst)) {
        }
    };

    // Undo every log entry from `from_rel` on: annihilate what those entries
    // emitted (posting forced-rollback notes where the victim was already
    // processed elsewhere), re-flag the still-valid undone events pending so
    // they are re-claimed, then restore the pre-suffix state. Returns whether
    // anything was actually undone.
    auto undo_suffix = [&](ObjectId o, Ctx& c, std::size_t from_rel, Slot& slot,
                           std::vector<ObjectId>& cascade) -> bool {
        if (from_rel >= c.log.size()) return false;
        if (opt.audit && c.log_base + from_rel < c.committed) {
            throw ConsistencyError("rollback reached below the commit horizon");
        }
        for (std::size_t i = from_rel; i < c.log.size(); ++i) {
            timewarp::ProcessedEntry& e = c.log[i];
            for (const EventHandle& h : e.emitted) {
                const ObjectId dst = h.record().key.dst;
                const double hts = h.record().key.ts.value();
                switch (queue.mark_invalid(h)) {
                case InvalidateOutcome::was_processed:
                    // A processed victim on this same object lies inside the
                    // suffix being undone right now; only remote ones need a
                    // note.
                    if (dst != o) {
                        post_note(dst, hts);
                        cascade.push_back(dst);
                    }
                    break;
                default:
                    // Pending victims die in place; a mid-flight claimer
                    // discovers the kill when its mark_processed fails and
                    // repairs itself.
                    break;
                }
            }
            queue.requeue(e.self); // refused exactly when the event was annihilated
        }
        c.log.resize(from_rel);
        restore_to(c, from_rel);
        ++slot.rollbacks;
        return true;
    };

    // Honor the object's forced-rollback note, if any. Runs under the bind.
    auto honor_note = [&](ObjectId o, Ctx& c, Slot& slot, std::vector<ObjectId>& cascade) {
        for (;;) {
            std::uint64_t v = c.note.load(std::memory_order_seq_cst);
            if (v == kNoteClear) return;
            undo_suffix(o, c, suffix_by_ts(c, time_from_bits(v)), slot, cascade);
            // A failed clear means a lower target landed meanwhile: honor it.
            c.note.compare_exchange_strong(v, kNoteClear, std::memory_order_seq_cst);
        }
    };

    auto try_bind = [&](ObjectId o, std::uint32_t tid) -> bool {
        std::uint32_t expect = timewarp::kUnbound;
        return ctxs[o]->binder.compare_exchange_strong(expect, tid, std::memory_order_seq_cst);
    };

    // Release the bind, then re-check the note: a note posted after our last
    // in-batch check but before the release would otherwise strand (its
    // poster's try-bind may have lost against us). Whoever wins the re-bind
    // honors it; losing the re-bind means someone else now owns the object
    // and will run this same protocol.
    auto release_and_settle = [&](ObjectId o, std::uint32_t tid, Slot& slot,
                                  std::vector<ObjectId>& cascade) {
        Ctx& c = *ctxs[o];
        for (;;) {
            c.binder.store(timewarp::kUnbound, std::memory_order_seq_cst);
            if (c.note.load(std::memory_order_seq_cst) == kNoteClear) return;
            std::uint32_t expect = timewarp::kUnbound;
            if (!c.binder.compare_exchange_strong(expect, tid, std::memory_order_seq_cst)) return;
            honor_note(o, c, slot, cascade);
        }
    };

    // Chase annihilation targets: bind each noted object and honor its note
    // now rather than waiting for the next natural binder. try-bind failures
    // are fine — the note stands and the current holder's release re-check
    // (or next acquirer) picks it up. Honoring may add further targets.
    auto drain_cascade = [&](std::uint32_t tid, Slot& slot, std::vector<ObjectId>& cascade) {
        while (!cascade.empty()) {
            const ObjectId d = cascade.back();
            cascade.pop_back();
            Ctx& c = *ctxs[d];
            if (c.note.load(std::memory_order_seq_cst) == kNoteClear) continue;
            std::uint32_t expect = timewarp::kUnbound;
            if (!c.binder.compare_exchange_strong(expect, tid, std::memory_order_seq_cst)) {
                continue;
            }
            honor_note(d, c, slot, cascade);
            release_and_settle(d, tid, slot, cascade);
        }
    };

    // ---- round-leader machinery (runs with every worker parked) ------------

    auto fold_object = [&](Ctx& c, double g) {
        const std::size_t b_rel = suffix_by_ts(c, g);
        const std::uint64_t b_abs = c.log_base + b_rel;
        for (std::uint64_t i = c.committed; i < b_abs; ++i) {
            const EventKey& k = c.log[static_cast<std::size_t>(i - c.log_base)].ev.key;
            c.trace = chain(c.trace, key_hash(k));
            if (opt.record_traces) c.committed_keys.push_back(k);
            if (k.ts.value() > ctrl.max_committed_ts) ctrl.max_committed_ts = k.ts.value();
        }
        ctrl.committed_total += b_abs - c.committed;
        c.committed = b_abs;
        // Keep the newest checkpoint at or below the commit point (rollback
        // targets never reach below it) plus everything newer; drop the log
        // prefix no replay can need anymore.
        while (c.ckpts.size() >= 2 && c.ckpts[1].entries_included <= b_abs) c.ckpts.pop_front();
        const std::uint64_t keep_from = c.ckpts.front().entries_included;
        while (c.log_base < keep_from) {
            c.log.pop_front();
            ++c.log_base;
        }
    };

    // At the final round, roll speculative suffixes off the live states so
    // the reported states, digests and observables describe exactly the
    // committed prefix. Queue bookkeeping is moot by now.
    auto truncate_to_commit = [&](Ctx& c, double g) {
        const std::size_t b_rel = suffix_by_ts(c, g);
        if (b_rel >= c.log.size()) return;
        restore_to(c, b_rel);
        c.log.resize(b_rel);
    };

    auto leader = [&] {
        try {
            gvt_requested.store(false, std::memory_order_seq_cst);
            since_round.store(0, std::memory_order_relaxed);
            if (abort.load(std::memory_order_relaxed)) {
                ctrl.done = true;
                return;
            }
            // With all workers parked, the commit floor is the plain minimum
            // over claimable/claimed-but-unfinished events and unhonored
            // forced-rollback targets: every side effect of every processed
            // event is already in those structures.
            double raw = queue.min_unprocessed_ts(round_ticket);
            for (const auto& cp : ctxs) {
                raw = std::min(raw, time_from_bits(cp->note.load(std::memory_order_seq_cst)));
            }
            if (opt.audit && raw < ctrl.gvt) {
                throw ConsistencyError("commit horizon moved backwards");
            }
            const double g = std::max(ctrl.gvt, raw);
            ctrl.gvt = g;
            for (const auto& cp : ctxs) fold_object(*cp, g);

            bool done = raw == kTimeInfinity;
            if (stop.mode == StopCondition::Mode::horizon && raw >= stop.horizon) done = true;
            if (stop.mode == StopCondition::Mode::events &&
                ctrl.committed_total >= stop.events) {
                done = true;
            }
            if (stop.mode == StopCondition::Mode::wall) {
                const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
                if (!ctrl.warm_done && elapsed >= warmup_s) {
                    ctrl.warm_done = true;
                    ctrl.warm_committed = ctrl.committed_total;
                    std::uint64_t p = 0;
                    for (const Slot& s : slots) p += s.processed;
                    ctrl.warm_processed = p;
                    ctrl.warm_elapsed = elapsed;
                }
                if (elapsed >= stop.wall_seconds) done = true;
            }
            if (done) {
                for (const auto& cp : ctxs) truncate_to_commit(*cp, g);
                ctrl.done = true;
            } else {
                queue.fossil_collect_below(round_ticket, g);
            }
        } catch (...) {
            fail(std::current_exception());
            ctrl.done = true;
        }
    };

    // ---- worker -------------------------------------------------------------

    auto worker = [&](int tid_i) {
        const std::uint32_t tid = static_cast<std::uint32_t>(tid_i);
        SenseBarrier::Sense sense;
        if (opt.pin_threads) pin_current_thread(plan[static_cast<std::size_t>(tid_i)].cpu);
        Slot& slot = slots[static_cast<std::size_t>(tid_i)];
        const int my_node = plan[static_cast<std::size_t>(tid_i)].node;
        SharedCalendarQueue::Ticket ticket(queue);

        // First-touch construction of homed objects, priming events, and the
        // baseline "zero events processed" checkpoint.
        try {
            for (ObjectId o = 0; o < n; ++o) {
                if (home[o] != tid) continue;
                ctxs[o] = std::make_unique<Ctx>();
                Ctx& c = *ctxs[o];
                c.state.emplace(model.initial_state(o));
                c.rng = RngStream(seed, o);
                auto emit0 = [&](ObjectId dst, double ts, std::uint16_t kind,
                                 const Payload& pl) {
                    queue.insert(ticket, make_emitted_event(o, c.seq++, dst, n, 0.0, ts, kind,
                                                            pl, min_emit_delay));
                };
                model.initial_events(o, *c.state, c.rng, emit0);
                c.ckpts.push_back(
                    timewarp::Checkpoint<State>{*c.state, c.rng, c.seq, EventKey{}, false, 0});
            }
        } catch (...) {
            fail(std::current_exception());
        }
        barrier.arrive_and_wait(sense);

        std::vector<EventHandle> cands;
        std::vector<EventHandle> batch;
        std::vector<EventRecord> outbox;
        std::vector<ObjectId> cascade;
        ObjectId last_o = static_cast<ObjectId>(n); // none yet
        std::uint32_t idle = 0;
        bool warm_kick = false;
        bool finished = false;

        while (!finished) {
            if (abort.load(std::memory_order_relaxed) &&
                !gvt_requested.load(std::memory_order_seq_cst)) {
                gvt_requested.store(true, std::memory_order_seq_cst);
            }
            if (gvt_requested.load(std::memory_order_seq_cst)) {
                barrier.arrive_and_wait(sense, leader);
                if (ctrl.done) break;
                continue;
            }
            if (since_round.load(std::memory_order_relaxed) >= opt.gvt_interval_events) {
                gvt_requested.store(true, std::memory_order_seq_cst);
                continue;
            }
            if (stop.mode == StopCondition::Mode::wall) {
                const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
                if (elapsed >= stop.wall_seconds || (!warm_kick && elapsed >= warmup_s)) {
                    if (elapsed >= warmup_s) warm_kick = true;
                    gvt_requested.store(true, std::memory_order_seq_cst);
                    continue;
                }
            }

            queue.scan_front(ticket, limit_ts, opt.claim_band, 8, cands);
            if (cands.empty()) {
                // Nothing claimable: either the run is over or every event
                // below the limit is in someone's hands. Rounds decide.
                if (++idle >= 1024) {
                    idle = 0;
                    gvt_requested.store(true, std::memory_order_seq_cst);
                } else {
                    std::this_thread::yield();
                }
                continue;
            }
            idle = 0;

            // Tier preference among the front candidates: stay on the object
            // just worked (warm log/state), else an unbound object homed to
            // this NUMA node, else any unbound object, else the front.
            std::size_t pick = cands.size();
            for (std::size_t i = 0; i < cands.size() && pick == cands.size(); ++i) {
                const ObjectId d = cands[i].record().key.dst;
                if (d == last_o &&
                    ctxs[d]->binder.load(std::memory_order_relaxed) == timewarp::kUnbound) {
                    pick = i;
                }
            }
            for (std::size_t i = 0; i < cands.size() && pick == cands.size(); ++i) {
                const ObjectId d = cands[i].record().key.dst;
                if (node_of[d] == my_node &&
                    ctxs[d]->binder.load(std::memory_order_relaxed) == timewarp::kUnbound) {
                    pick = i;
                }
            }
            for (std::size_t i = 0; i < cands.size() && pick == cands.size(); ++i) {
                const ObjectId d = cands[i].record().key.dst;
                if (ctxs[d]->binder.load(std::memory_order_relaxed) == timewarp::kUnbound) {
                    pick = i;
                }
            }
            if (pick == cands.size()) pick = 0;

            EventHandle h0 = cands[pick];
            if (!queue.try_claim(h0)) continue; // raced away; rescan
            const ObjectId o = h0.record().key.dst;
            ObjectId bound = static_cast<ObjectId>(n);
            try {
                if (!try_bind(o, tid)) {
                    queue.unclaim(h0);
                    std::this_thread::yield();
                    continue;
                }
                bound = o;
                Ctx& c = *ctxs[o];
                honor_note(o, c, slot, cascade);

                // Bind-window batch: everything already pending for this
                // object within one bucket of the claim. Delays are at least
                // the padded lookahead, so nothing this batch emits (to any
                // object) can land back inside the window.
                const double lo = h0.record().key.ts.value();
                batch.clear();
                batch.push_back(h0);
                queue.claim_range_for(ticket, o, lo, lo + bucket_w, limit_ts, batch);
                std::sort(batch.begin(), batch.end(),
                          [](const EventHandle& a, const EventHandle& b) {
                              return a.record().key < b.record().key;
                          });

                for (const EventHandle& h : batch) {
                    if (gvt_requested.load(std::memory_order_seq_cst)) {
                        barrier.arrive_and_wait(sense, leader);
                        if (ctrl.done) {
                            finished = true;
                            break;
                        }
                    }
                    honor_note(o, c, slot, cascade);
                    if (h.status() == EventStatus::invalidated) continue;
                    const EventRecord ev = h.record();
                    if (c.has_last && !(c.last < ev.key)) {
                        // Straggler: this claim lands at or below the
                        // object's speculated position.
                        undo_suffix(o, c, suffix_by_key(c, ev.key), slot, cascade);
                    }
                    outbox.clear();
                    auto emit = [&](ObjectId dst, double ts2, std::uint16_t kind,
                                    const Payload& pl) {
                        outbox.push_back(make_emitted_event(o, c.seq++, dst, n,
                                                            ev.key.ts.value(), ts2, kind, pl,
                                                            min_emit_delay));
                    };
                    model.on_event(*c.state, ev, c.rng, emit);
                    ++slot.processed;
                    since_round.fetch_add(1, std::memory_order_relaxed);
                    if (!queue.mark_processed(h)) {
                        // Annihilated mid-execution: drop the buffered
                        // emissions and rebuild the pre-event position.
                        restore_to(c, c.log.size());
                        ++slot.rollbacks;
                        continue;
                    }
                    timewarp::ProcessedEntry entry;
                    entry.ev = ev;
                    entry.self = h;
                    entry.emitted.reserve(outbox.size());
                    for (const EventRecord& e2 : outbox) {
                        entry.emitted.push_back(queue.insert(ticket, e2));
                    }
                    c.last = ev.key;
                    c.has_last = true;
                    c.log.push_back(std::move(entry));
                    if ((c.log_base + c.log.size()) % ckpt_every == 0) {
                        c.ckpts.push_back(timewarp::Checkpoint<State>{
                            *c.state, c.rng, c.seq, c.last, c.has_last,
                            c.log_base + c.log.size()});
                    }
                }
                if (!finished) {
                    release_and_settle(o, tid, slot, cascade);
                    bound = static_cast<ObjectId>(n);
                    drain_cascade(tid, slot, cascade);
                    last_o = o;
                }
            } catch (...) {
                fail(std::current_exception());
                if (bound < static_cast<ObjectId>(n)) {
                    ctxs[bound]->binder.store(timewarp::kUnbound, std::memory_order_seq_cst);
                }
                cascade.clear();
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);

    RunResult out;
    out.metrics.committed_events = ctrl.committed_total;
    std::uint64_t processed = 0;
    std::uint64_t rollbacks = 0;
    for (const Slot& s : slots) {
        processed += s.processed;
        rollbacks += s.rollbacks;
    }
    out.metrics.processed_events = processed;
    out.metrics.rollbacks = rollbacks;
    out.metrics.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    const double span = ctrl.warm_done ? out.metrics.wall_seconds - ctrl.warm_elapsed
                                       : out.metrics.wall_seconds;
    const std::uint64_t cbase = ctrl.warm_done ? ctrl.warm_committed : 0;
    const std::uint64_t pbase = ctrl.warm_done ? ctrl.warm_processed : 0;
    if (span > 0.0) {
        out.metrics.committed_eps = static_cast<double>(ctrl.committed_total - cbase) / span;
        out.metrics.total_eps = static_cast<double>(processed - pbase) / span;
    }
    out.max_committed_ts = ctrl.max_committed_ts;
    Fingerprint fp{};
    for (ObjectId o = 0; o < n; ++o) {
        const Ctx& c = *ctxs[o];
        fp = combine(fp, object_commit_digest(model.state_digest(*c.state), c.trace,
                                              c.committed));
    }
    out.fingerprint = fp;
    if (opt.record_traces) {
        out.traces.resize(n);
        for (ObjectId o = 0; o < n; ++o) out.traces[o] = std::move(ctxs[o]->committed_keys);
    }
    if constexpr (requires(const State& s) { model.observables(s); }) {
        out.observables.reserve(n);
        for (ObjectId o = 0; o < n; ++o) {
            out.observables.push_back(model.observables(*ctxs[o]->state));
        }
    }
    return out;
}

} // namespace tempo
