#pragma once

#include <compare>
#include <cstdint>

#include "tempo/time.hpp"

namespace tempo {

// Index of a simulation object (PCS cell, highway zone, ...). Dense in
// [0, object_count).
using ObjectId = std::uint32_t;

// Total order over events: timestamp first, then destination, source and a
// per-source sequence number. No two live events ever share a key, so this
// doubles as the deterministic tie-break for simultaneous events.
struct EventKey {
    VirtualTime ts;
    ObjectId dst = 0;
    ObjectId src = 0;
    std::uint64_t seq = 0;

    friend constexpr bool operator==(const EventKey&, const EventKey&) = default;
    friend constexpr std::strong_ordering operator<=>(const EventKey& a, const EventKey& b) {
        if (auto c = a.ts <=> b.ts; c != 0) return c;
        if (auto c = a.dst <=> b.dst; c != 0) return c;
        if (auto c = a.src <=> b.src; c != 0) return c;
        return a.seq <=> b.seq;
    }
};

// Model-defined inline payload. Two integer words plus one double cover every
// event kind the bundled models use; models bit-pack whatever else they need.
struct Payload {
    std::uint64_t u0 = 0;
    std::uint64_t u1 = 0;
    double f0 = 0.0;

    friend constexpr bool operator==(const Payload&, const Payload&) = default;
};

// Lifecycle of an event inside a pool. Stored in an atomic word by the
// concurrent structures; transitions are single RMW operations.
enum class EventStatus : std::uint32_t {
    pending = 0,       // schedulable
    in_processing = 1, // claimed by exactly one worker
    processed = 2,     // dispatched (still revocable until commit)
    invalidated = 3,   // annihilated; permanently dead
};

struct EventRecord {
    EventKey key;
    std::uint16_t kind = 0;
    EventStatus status = EventStatus::pending;
    Payload payload;

    friend constexpr bool operator==(const EventRecord&, const EventRecord&) = default;
};

} // namespace tempo
