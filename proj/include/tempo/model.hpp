#pragma once

#include <concepts>
#include <cstdint>
#include <utility>

#include "tempo/errors.hpp"
#include "tempo/event.hpp"
#include "tempo/rng.hpp"
#include "tempo/time.hpp"

namespace tempo {

// Emit callable used by model code to schedule a future event. Engines bind
// the source object, stamp the per-source sequence number and route the event
// to the destination's pending pool.
struct NullEmit {
    void operator()(ObjectId, double, std::uint16_t, const Payload&) const {}
};

// Contract between the engines and a simulation model.
//
//  State           per-object state; copied into checkpoints, so it must be
//                  copyable and self-contained (no aliasing between objects).
//  object_count()  number of objects, ids are [0, object_count).
//  lookahead()     L > 0: every emitted event satisfies ts >= now + L.
//  initial_state(id)             deterministic initial state.
//  initial_events(id, st, rng, emit)  schedule the priming events.
//  on_event(st, ev, rng, emit)   handle one event; deterministic given
//                                (st, ev, rng state).
//  state_digest(st)              order-stable 64-bit digest of the state.
template <class M>
concept SimulationModel =
    std::copyable<typename M::State> &&
    requires(const M cm, M m, ObjectId id, typename M::State st,
             const typename M::State cst, const EventRecord ev, RngStream rng) {
        { cm.object_count() } -> std::convertible_to<std::size_t>;
        { cm.lookahead() } -> std::convertible_to<double>;
        { cm.initial_state(id) } -> std::same_as<typename M::State>;
        { cm.initial_events(id, cst, rng, NullEmit{}) };
        { cm.on_event(st, ev, rng, NullEmit{}) };
        { cm.state_digest(cst) } -> std::convertible_to<std::uint64_t>;
    };

// Minimum delay a model should actually emit when clamping to its declared
// lookahead L. The relative pad keeps floor((now + delay)/L) strictly above
// floor(now/L) after rounding for any window index below ~1e6, so an event
// emitted right at the clamp can never alias into the window that produced
// it. The pad is far below every model's time resolution.
constexpr double padded_lookahead(double lookahead) { return lookahead * (1.0 + 1e-9); }

// Validate and assemble an event emitted by model code. `min_delay` is 0 in
// normal operation (strict non-decrease) and the model lookahead when the
// engine runs with the lookahead audit enabled.
inline EventRecord make_emitted_event(ObjectId src, std::uint64_t seq, ObjectId dst,
                                      std::size_t object_count, double now, double ts,
                                      std::uint16_t kind, const Payload& payload,
                                      double min_delay = 0.0) {
    if (dst >= object_count) {
        throw DestinationMismatchError("emitted event addressed to a nonexistent object");
    }
    VirtualTime vt = VirtualTime::checked(ts);
    if (ts < now + min_delay) {
        throw CausalityError(min_delay > 0.0
                                 ? "emitted event violates the declared lookahead"
                                 : "emitted event scheduled before its cause");
    }
    EventRecord ev;
    ev.key = EventKey{vt, dst, src, seq};
    ev.kind = kind;
    ev.status = EventStatus::pending;
    ev.payload = payload;
    return ev;
}

} // namespace tempo
