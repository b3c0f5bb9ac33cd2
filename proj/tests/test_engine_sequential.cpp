#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/toy_models.hpp"
#include "tempo/engine_sequential.hpp"

using namespace tempo;
using namespace tempo::testing;

static_assert(SimulationModel<RingModel>);
static_assert(SimulationModel<TimeTravelModel>);
static_assert(SimulationModel<SilentModel>);

TEST_CASE("event budget commits exactly the requested count") {
    RingModel m{.n = 4};
    auto r = run_sequential(m, 42, StopCondition::after_events(1000));
    CHECK(r.metrics.committed_events == 1000);
    CHECK(r.metrics.processed_events == 1000);
    CHECK(r.metrics.rollbacks == 0);
    CHECK(r.max_committed_ts > 0.0);
}

TEST_CASE("same seed reproduces the fingerprint, different seed does not") {
    RingModel m{.n = 8, .tokens_per_object = 2};
    auto a = run_sequential(m, 7, StopCondition::after_events(5000));
    auto b = run_sequential(m, 7, StopCondition::after_events(5000));
    auto c = run_sequential(m, 8, StopCondition::after_events(5000));
    CHECK(a.fingerprint == b.fingerprint);
    CHECK(a.max_committed_ts == b.max_committed_ts);
    CHECK(a.fingerprint != c.fingerprint);
}

TEST_CASE("horizon stop commits every event below the horizon and nothing above") {
    RingModel m{.n = 4};
    auto r = run_sequential(m, 11, StopCondition::at_horizon(200.0), {.record_traces = true});
    CHECK(r.metrics.committed_events > 0);
    CHECK(r.max_committed_ts < 200.0);
    for (const auto& trace : r.traces) {
        for (const auto& k : trace) CHECK(k.ts.value() < 200.0);
    }

    // An event-budget run of the same length replays the same prefix.
    auto again = run_sequential(m, 11, StopCondition::after_events(r.metrics.committed_events));
    CHECK(again.fingerprint == r.fingerprint);
}

TEST_CASE("traces are per-destination, time-ordered and complete") {
    RingModel m{.n = 5};
    auto r = run_sequential(m, 3, StopCondition::after_events(500), {.record_traces = true});
    REQUIRE(r.traces.size() == 5);
    std::size_t total = 0;
    for (ObjectId o = 0; o < 5; ++o) {
        const auto& t = r.traces[o];
        total += t.size();
        for (std::size_t i = 0; i < t.size(); ++i) {
            CHECK(t[i].dst == o);
            if (i > 0) CHECK(t[i - 1] < t[i]);
        }
    }
    CHECK(total == 500);
}

TEST_CASE("scheduling into the past is rejected") {
    TimeTravelModel m;
    CHECK_THROWS_AS(run_sequential(m, 1, StopCondition::after_events(10)), CausalityError);
}

TEST_CASE("lookahead audit distinguishes honest and lying models") {
    ShortDelayModel lying{.actual_delay = 0.25}; // declares 0.5
    auto plain = run_sequential(lying, 1, StopCondition::after_events(10));
    CHECK(plain.metrics.committed_events > 0); // plain run does not notice
    CHECK_THROWS_AS(run_sequential(lying, 1, StopCondition::after_events(10), {.audit = true}),
                    CausalityError);

    ShortDelayModel honest{.actual_delay = 0.5};
    CHECK_NOTHROW(run_sequential(honest, 1, StopCondition::after_events(10), {.audit = true}));
}

TEST_CASE("a model with no initial events terminates at zero") {
    SilentModel m;
    auto r = run_sequential(m, 9, StopCondition::after_events(100));
    CHECK(r.metrics.committed_events == 0);
    CHECK(r.max_committed_ts == 0.0);
    // Fingerprint still covers the (untouched) states.
    auto r2 = run_sequential(m, 10, StopCondition::after_events(100));
    CHECK(r.fingerprint == r2.fingerprint);
}

TEST_CASE("an exhausted budget stops at the available event count") {
    // The relay dies when the receiving object's counter hits 8: objects
    // alternate, so 8 deliveries to object 1 interleave 7 to object 0.
    ShortDelayModel m{.actual_delay = 0.5};
    auto r = run_sequential(m, 1, StopCondition::after_events(1'000'000));
    CHECK(r.metrics.committed_events == 15);
}
