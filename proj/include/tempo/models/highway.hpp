#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tempo/fingerprint.hpp"
#include "tempo/model.hpp"

namespace tempo {

// Closed-loop highway. Each object is a 1 km, 3-lane zone on a ring. Cars
// belong to one of three speed classes (130/120/110 km/h); a car entering a
// zone computes its effective speed from the zone's occupancy relative to a
// reference capacity (speed divides by the utilization once the zone is over
// capacity), applies a lognormal crossing jitter, and schedules its own
// departure. Departing cars hop to the next zone after the inter-zone latency,
// which equals the lookahead. The car population is fixed (conservation is an
// acceptance check); `occupancy` sets the initial cars per zone as a fraction
// of the reference capacity, and the unbalanced variant loads the second half
// of the ring at half density.
//
// Time unit: hours.
class HighwayModel {
public:
    struct Params {
        std::size_t zones = 256;
        double occupancy = 0.7;  // initial cars per zone / reference capacity
        bool unbalanced = false; // second half of the ring at occupancy/2
    };

    static constexpr std::uint16_t kDepart = 0;
    static constexpr std::uint16_t kArrive = 1;

    static constexpr double kZoneKm = 1.0;
    static constexpr int kLanes = 3;
    static constexpr double kHeadwaySeconds = 2.0;
    static constexpr double kJitterSigma = 0.05;
    static constexpr double kLookaheadHours = 0.002; // 7.2 s inter-zone hop

    static constexpr double kClassSpeeds[3] = {130.0, 120.0, 110.0}; // km/h

    // Cars one zone holds at the reference headway for the fastest class:
    // lanes * zone_length / (v_max * headway).
    static constexpr double reference_capacity() {
        return kLanes * kZoneKm / (kClassSpeeds[0] * kHeadwaySeconds / 3600.0);
    }

    // Speed collapses proportionally once occupancy exceeds the reference.
    static constexpr double effective_speed(double class_speed, double cars) {
        const double ratio = cars / reference_capacity();
        return class_speed / std::max(1.0, ratio);
    }

    explicit HighwayModel(const Params& p) : p_(p) {
        if (p_.zones < 2) throw ConfigError("highway: need at least two zones");
        if (!(p_.occupancy > 0.0)) throw ConfigError("highway: occupancy must be positive");
    }

    struct Car {
        std::uint64_t id = 0;
        std::uint8_t speed_class = 0;

        friend bool operator==(const Car&, const Car&) = default;
    };

    struct State {
        std::vector<Car> cars; // arrival order
        std::uint64_t arrivals = 0;
        std::uint64_t departures = 0;
        double car_integral = 0.0; // ∫ |cars| dt up to last_ts
        double last_ts = 0.0;
    };

    [[nodiscard]] std::size_t object_count() const { return p_.zones; }
    [[nodiscard]] double lookahead() const { return kLookaheadHours; }

    [[nodiscard]] std::uint64_t initial_cars(ObjectId zone) const {
        double occ = p_.occupancy;
        if (p_.unbalanced && zone >= p_.zones / 2) occ *= 0.5;
        return static_cast<std::uint64_t>(std::llround(occ * reference_capacity()));
    }

    [[nodiscard]] std::uint64_t total_cars() const {
        std::uint64_t n = 0;
        for (ObjectId z = 0; z < p_.zones; ++z) n += initial_cars(z);
        return n;
    }

    [[nodiscard]] State initial_state(ObjectId zone) const {
        State s;
        const std::uint64_t n = initial_cars(zone);
        s.cars.reserve(n);
        for (std::uint64_t k = 0; k < n; ++k) {
            // Globally unique id; class cycles through the three speeds.
            const std::uint64_t id = static_cast<std::uint64_t>(zone) << 32 | k;
            s.cars.push_back(Car{id, static_cast<std::uint8_t>(id % 3)});
        }
        return s;
    }

    template <class Emit>
    void initial_events(ObjectId self, const State& st, RngStream& rng, Emit&& emit) const {
        // Cars start mid-zone: each schedules its first departure at a
        // uniform fraction of a full jittered crossing at initial occupancy.
        const double cars = static_cast<double>(st.cars.size());
        for (const Car& c : st.cars) {
            const double v = effective_speed(kClassSpeeds[c.speed_class], cars);
            const double full = kZoneKm / v * rng.lognormal_jitter(kJitterSigma);
            const double frac = rng.uniform01();
            emit(self, std::max(padded_lookahead(kLookaheadHours), full * frac), kDepart,
                 car_payload(c));
        }
    }

    template <class Emit>
    void on_event(State& st, const EventRecord& ev, RngStream& rng, Emit&& emit) const {
        const double now = ev.key.ts.value();
        const ObjectId self = ev.key.dst;
        advance_clock(st, now);
        const Car car = payload_car(ev.payload);
        switch (ev.kind) {
        case kArrive: {
            ++st.arrivals;
            st.cars.push_back(car);
            const double v =
                effective_speed(kClassSpeeds[car.speed_class], static_cast<double>(st.cars.size()));
            const double cross = kZoneKm / v * rng.lognormal_jitter(kJitterSigma);
            emit(self, now + std::max(padded_lookahead(kLookaheadHours), cross), kDepart,
                 ev.payload);
            break;
        }
        case kDepart: {
            auto it = std::find(st.cars.begin(), st.cars.end(), car);
            if (it == st.cars.end()) {
                throw ConsistencyError("highway: departing car is not in the zone");
            }
            st.cars.erase(it);
            ++st.departures;
            emit(static_cast<ObjectId>((self + 1) % p_.zones),
                 now + padded_lookahead(kLookaheadHours), kArrive, ev.payload);
            break;
        }
        default: throw ConsistencyError("highway: unknown event kind");
        }
    }

    [[nodiscard]] std::uint64_t state_digest(const State& st) const {
        Digest d;
        d.u64(st.cars.size());
        for (const Car& c : st.cars) d.u64(c.id).u32(c.speed_class);
        d.u64(st.arrivals).u64(st.departures).f64(st.car_integral).f64(st.last_ts);
        return d.finish();
    }

    // [cars, arrivals, departures, car_integral, last_ts]
    [[nodiscard]] std::vector<double> observables(const State& st) const {
        return {static_cast<double>(st.cars.size()), static_cast<double>(st.arrivals),
                static_cast<double>(st.departures), st.car_integral, st.last_ts};
    }

    [[nodiscard]] const Params& params() const { return p_; }

private:
    static Payload car_payload(const Car& c) {
        Payload p;
        p.u0 = c.id;
        p.u1 = c.speed_class;
        return p;
    }

    static Car payload_car(const Payload& p) {
        return Car{p.u0, static_cast<std::uint8_t>(p.u1)};
    }

    static void advance_clock(State& st, double now) {
        st.car_integral += static_cast<double>(st.cars.size()) * (now - st.last_ts);
        st.last_ts = now;
    }

    Params p_;
};

} // namespace tempo
