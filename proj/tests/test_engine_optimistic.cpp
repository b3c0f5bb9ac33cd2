#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/toy_models.hpp"
#include "tempo/engine_optimistic.hpp"
#include "tempo/engine_sequential.hpp"
#include "tempo/models/highway.hpp"
#include "tempo/models/pcs.hpp"

using namespace tempo;
using namespace tempo::testing;

namespace {

EngineOptions with_threads(int t) {
    EngineOptions o;
    o.threads = t;
    o.pin_threads = false; // CI-friendly: never fight the host scheduler
    return o;
}

EngineOptions speculative(int t, std::uint32_t ckpt_every) {
    EngineOptions o = with_threads(t);
    o.claim_band = kTimeInfinity; // claim greedily, far past the front
    o.checkpoint_interval = ckpt_every;
    return o;
}

} // namespace

TEST_CASE("single-threaded narrow-band run is rollback-free and exact") {
    // With the default claim band of 0 a single worker only ever claims a
    // minimum-timestamp event, and clamped delays keep every emission
    // strictly above the bind window: nothing can arrive behind the log.
    RingModel m{.n = 8, .tokens_per_object = 2};
    auto seq = run_sequential(m, 42, StopCondition::at_horizon(400.0));
    auto opt = run_optimistic(m, 42, StopCondition::at_horizon(400.0), with_threads(1));
    CHECK(opt.fingerprint == seq.fingerprint);
    CHECK(opt.metrics.committed_events == seq.metrics.committed_events);
    CHECK(opt.max_committed_ts == seq.max_committed_ts);
    CHECK(opt.metrics.rollbacks == 0);
    CHECK(opt.metrics.processed_events == opt.metrics.committed_events);
}

TEST_CASE("bundled models are rollback-free on one thread too") {
    PcsModel pcs(PcsModel::Params{.cells = 32, .channels = 64, .target_busy = 6.0});
    auto pseq = run_sequential(pcs, 3, StopCondition::at_horizon(120.0));
    auto popt = run_optimistic(pcs, 3, StopCondition::at_horizon(120.0), with_threads(1));
    CHECK(popt.fingerprint == pseq.fingerprint);
    CHECK(popt.metrics.committed_events == pseq.metrics.committed_events);
    CHECK(popt.metrics.rollbacks == 0);
    CHECK(popt.observables == pseq.observables);

    HighwayModel hw(HighwayModel::Params{.zones = 24, .occupancy = 0.8});
    auto hseq = run_sequential(hw, 3, StopCondition::at_horizon(0.6));
    auto hopt = run_optimistic(hw, 3, StopCondition::at_horizon(0.6), with_threads(1));
    CHECK(hopt.fingerprint == hseq.fingerprint);
    CHECK(hopt.metrics.committed_events == hseq.metrics.committed_events);
    CHECK(hopt.metrics.rollbacks == 0);
}

TEST_CASE("fingerprints are identical across thread counts") {
    RingModel m{.n = 32, .tokens_per_object = 4};
    auto seq = run_sequential(m, 7, StopCondition::at_horizon(150.0));
    for (int t : {2, 4, 8}) {
        auto opt = run_optimistic(m, 7, StopCondition::at_horizon(150.0), with_threads(t));
        CAPTURE(t);
        CHECK(opt.fingerprint == seq.fingerprint);
        CHECK(opt.metrics.committed_events == seq.metrics.committed_events);
        CHECK(opt.max_committed_ts == seq.max_committed_ts);
        CHECK(opt.metrics.committed_events <= opt.metrics.processed_events);
    }
}

TEST_CASE("both bundled models agree with the reference across thread counts") {
    PcsModel pcs(PcsModel::Params{.cells = 32, .channels = 64, .target_busy = 6.0});
    auto pseq = run_sequential(pcs, 3, StopCondition::at_horizon(120.0));
    for (int t : {2, 8}) {
        auto popt = run_optimistic(pcs, 3, StopCondition::at_horizon(120.0), with_threads(t));
        CAPTURE(t);
        CHECK(popt.fingerprint == pseq.fingerprint);
        CHECK(popt.metrics.committed_events == pseq.metrics.committed_events);
    }

    HighwayModel hw(HighwayModel::Params{.zones = 24, .occupancy = 0.8});
    auto hseq = run_sequential(hw, 3, StopCondition::at_horizon(0.6));
    for (int t : {2, 8}) {
        auto hopt = run_optimistic(hw, 3, StopCondition::at_horizon(0.6), with_threads(t));
        CAPTURE(t);
        CHECK(hopt.fingerprint == hseq.fingerprint);
        CHECK(hopt.metrics.committed_events == hseq.metrics.committed_events);
    }
}

TEST_CASE("a forced straggler rolls back, cascades, and commits the same history") {
    // CascadeModel is wired so one worker with an unbounded claim band races
    // object 0 through t=3.0 before object 1's t=1.5 event sends anything
    // back: the t=2.5 arrival is a straggler, undoing it annihilates the
    // t=4.5 emission, and object 1 (which consumed t=4.5 eagerly) gets a
    // forced-rollback note. Six events commit no matter how it is scheduled.
    CascadeModel m;
    auto seq = run_sequential(m, 1, StopCondition::at_horizon(10.0));
    CHECK(seq.metrics.committed_events == 6);

    // Every checkpoint cadence must land on the same history: interval 1
    // restores exactly, wider intervals replay retained log entries to
    // rebuild state, RNG and sequence counters.
    for (std::uint32_t ckpt : {1u, 2u, 3u, 16u}) {
        CAPTURE(ckpt);
        auto opt = run_optimistic(m, 1, StopCondition::at_horizon(10.0), speculative(1, ckpt));
        CHECK(opt.fingerprint == seq.fingerprint);
        CHECK(opt.metrics.committed_events == 6);
        CHECK(opt.max_committed_ts == seq.max_committed_ts);
        CHECK(opt.metrics.rollbacks >= 1);
        CHECK(opt.metrics.processed_events > opt.metrics.committed_events);
    }
}

TEST_CASE("randomized speculation storms always converge to the reference") {
    // Greedy claims plus several workers on a small hot ring misorder work
    // constantly; rollbacks must repair every misstep so the committed
    // history is indistinguishable from the sequential one, seed by seed.
    std::uint64_t total_rollbacks = 0;
    for (std::uint64_t seedv = 1; seedv <= 12; ++seedv) {
        RingModel m{.n = 8, .tokens_per_object = 3};
        auto seq = run_sequential(m, seedv, StopCondition::at_horizon(60.0));
        EngineOptions o = speculative(4, 3);
        o.gvt_interval_events = 256; // frequent commit rounds + trimming
        o.audit = true;              // commit-crossing and ordering checks live
        auto opt = run_optimistic(m, seedv, StopCondition::at_horizon(60.0), o);
        CAPTURE(seedv);
        CHECK(opt.fingerprint == seq.fingerprint);
        CHECK(opt.metrics.committed_events == seq.metrics.committed_events);
        CHECK(opt.metrics.committed_events <= opt.metrics.processed_events);
        total_rollbacks += opt.metrics.rollbacks;
    }
    // Twelve storms without a single misspeculation would mean the band knob
    // is not doing its job.
    CHECK(total_rollbacks > 0);
}

TEST_CASE("committed traces match the reference event for event") {
    RingModel m{.n = 8, .tokens_per_object = 3};
    EngineOptions so = with_threads(1);
    so.record_traces = true;
    auto seq = run_sequential(m, 1, StopCondition::at_horizon(60.0), so);
    EngineOptions oo = speculative(4, 3);
    oo.record_traces = true;
    auto opt = run_optimistic(m, 1, StopCondition::at_horizon(60.0), oo);
    REQUIRE(opt.traces.size() == seq.traces.size());
    for (std::size_t o = 0; o < seq.traces.size(); ++o) {
        CAPTURE(o);
        CHECK(opt.traces[o] == seq.traces[o]);
    }
}

TEST_CASE("event budgets commit at least the requested count") {
    // Commit points are GVT rounds, and round timing depends on the
    // schedule, so (unlike the window engine) the committed count is not
    // reproducible across configurations; the budget is a floor, not a fence.
    RingModel m{.n = 16, .tokens_per_object = 2};
    auto r = run_optimistic(m, 9, StopCondition::after_events(2000), with_threads(4));
    CHECK(r.metrics.committed_events >= 2000);
    CHECK(r.metrics.committed_events <= r.metrics.processed_events);
}

TEST_CASE("audit passes on honest models at every thread count") {
    RingModel m{.n = 12, .tokens_per_object = 2};
    EngineOptions o = speculative(4, 4);
    o.audit = true;
    auto r = run_optimistic(m, 5, StopCondition::at_horizon(100.0), o);
    auto seq = run_sequential(m, 5, StopCondition::at_horizon(100.0));
    CHECK(r.fingerprint == seq.fingerprint);
}

TEST_CASE("lookahead liars are repaired by rollback instead of corrupting") {
    // The window engine needs honest lookahead for correctness; here it is
    // only a performance knob. An event arriving below the speculated
    // position is a straggler like any other, so the lying model still
    // commits the exact sequential history. The audit, which enforces the
    // declared contract, still rejects it.
    ShortDelayModel lying{.actual_delay = 0.25}; // declares 0.5
    auto seq = run_sequential(lying, 1, StopCondition::at_horizon(10.0));
    CHECK(seq.metrics.committed_events == 15);
    for (int t : {1, 2, 4}) {
        CAPTURE(t);
        auto r = run_optimistic(lying, 1, StopCondition::at_horizon(10.0), with_threads(t));
        CHECK(r.metrics.committed_events == 15);
        CHECK(r.fingerprint == seq.fingerprint);
    }
    EngineOptions o = with_threads(2);
    o.audit = true;
    CHECK_THROWS_AS(run_optimistic(lying, 1, StopCondition::at_horizon(10.0), o),
                    CausalityError);
}

TEST_CASE("scheduling into the past fails cleanly from worker threads") {
    TimeTravelModel m;
    CHECK_THROWS_AS(run_optimistic(m, 1, StopCondition::after_events(10), with_threads(4)),
                    SimError);
}

TEST_CASE("a silent model terminates with zero committed events") {
    SilentModel m;
    auto r = run_optimistic(m, 2, StopCondition::after_events(50), with_threads(4));
    CHECK(r.metrics.committed_events == 0);
    CHECK(r.metrics.processed_events == 0);
    CHECK(r.metrics.rollbacks == 0);
}

TEST_CASE("frequent commit rounds with aggressive trimming stay exact") {
    // Small round interval plus a short checkpoint cadence exercises the
    // fold/trim/fossil path many times per run instead of once at the end.
    PcsModel pcs(PcsModel::Params{.cells = 24, .channels = 48, .target_busy = 5.0});
    auto seq = run_sequential(pcs, 11, StopCondition::at_horizon(80.0));
    EngineOptions o = speculative(8, 4);
    o.gvt_interval_events = 64;
    o.audit = true;
    auto r = run_optimistic(pcs, 11, StopCondition::at_horizon(80.0), o);
    CHECK(r.fingerprint == seq.fingerprint);
    CHECK(r.metrics.committed_events == seq.metrics.committed_events);
}

TEST_CASE("wall-clock runs terminate and report sane throughput") {
    RingModel m{.n = 16, .tokens_per_object = 2};
    auto r = run_optimistic(m, 8, StopCondition::wall_clock(0.15), with_threads(2));
    CHECK(r.metrics.committed_events > 0);
    CHECK(r.metrics.committed_eps > 0.0);
    CHECK(r.metrics.total_eps >= r.metrics.committed_eps);
    CHECK(r.metrics.wall_seconds >= 0.15);
}

TEST_CASE("placement and homing options are accepted and deterministic") {
    RingModel m{.n = 16, .tokens_per_object = 1};
    auto topo = Topology::load_file("fixtures/risc.json");
    EngineOptions a = with_threads(4);
    a.topology = &topo;
    a.placement = Placement::circular;
    a.homing = Homing::modulo;
    auto r1 = run_optimistic(m, 4, StopCondition::at_horizon(80.0), a);
    auto r2 = run_optimistic(m, 4, StopCondition::at_horizon(80.0), a);
    auto seq = run_sequential(m, 4, StopCondition::at_horizon(80.0));
    CHECK(r1.fingerprint == r2.fingerprint);
    CHECK(r1.fingerprint == seq.fingerprint);
}
