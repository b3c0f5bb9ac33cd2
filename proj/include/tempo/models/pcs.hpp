#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tempo/fingerprint.hpp"
#include "tempo/model.hpp"

namespace tempo {

// Wireless cell network. Each object is one cell on a ring with a fixed pool
// of channels. Fresh calls arrive per cell as a Poisson stream sized so the
// equilibrium busy-channel count matches `target_busy`; call durations are
// exponential with mean 2 minutes, and a per-visit exponential mobility timer
// with mean 5 minutes decides whether a call completes in the cell or hands
// off to a ring neighbor. Every admission runs a power-control scan over the
// busy channels (the per-event compute kernel; `grain` repeats it).
//
// Time unit: minutes. Every emitted delay is clamped to at least the
// lookahead, so the conservative engine's windows are never starved.
class PcsModel {
public:
    struct Params {
        std::size_t cells = 256;
        std::uint32_t channels = 512;
        double target_busy = 61.44; // equilibrium busy channels per cell
        bool unbalanced = false;    // 1.5x demand on the low half, 0.5x on the high
        std::uint32_t grain = 1;    // power-scan repetitions per admission
    };

    // Event kinds.
    static constexpr std::uint16_t kFreshArrival = 0;
    static constexpr std::uint16_t kHandoffIn = 1;
    static constexpr std::uint16_t kCallEnd = 2;
    static constexpr std::uint16_t kHandoffOut = 3;

    // Power-scan constants (fixed; part of the reproducible surface).
    static constexpr double kPowerMin = 1e-3;
    static constexpr double kPowerMax = 2.0;
    static constexpr double kNoiseFloor = 0.01;
    static constexpr double kPathLossExp = 3.5;

    static constexpr double kMeanCallMinutes = 2.0;
    static constexpr double kMeanHopMinutes = 5.0;
    static constexpr double kLookaheadMinutes = 0.01;

    explicit PcsModel(const Params& p) : p_(p) {
        if (p_.cells < 2) throw ConfigError("pcs: need at least two cells");
        if (p_.channels == 0) throw ConfigError("pcs: need at least one channel");
        if (!(p_.target_busy > 0.0)) throw ConfigError("pcs: target_busy must be positive");
        if (p_.grain == 0) throw ConfigError("pcs: grain must be at least 1");
    }

    struct State {
        std::vector<std::uint8_t> busy; // slot occupancy, first-fit allocation
        std::uint32_t busy_count = 0;
        std::uint64_t calls_started = 0;
        std::uint64_t calls_completed = 0;
        std::uint64_t handoffs_in = 0;
        std::uint64_t handoffs_out = 0;
        std::uint64_t blocked = 0;   // fresh call found no free slot
        std::uint64_t dropped = 0;   // handoff found no free slot
        double power_acc = 0.0;      // accumulated power-scan output
        double busy_integral = 0.0;  // ∫ busy_count dt up to last_ts
        double last_ts = 0.0;
    };

    [[nodiscard]] std::size_t object_count() const { return p_.cells; }
    [[nodiscard]] double lookahead() const { return kLookaheadMinutes; }

    [[nodiscard]] State initial_state(ObjectId) const {
        State s;
        s.busy.assign(p_.channels, 0);
        return s;
    }

    template <class Emit>
    void initial_events(ObjectId self, const State&, RngStream& rng, Emit&& emit) const {
        schedule_arrivals(self, 0.0, rng, emit);
    }

    template <class Emit>
    void on_event(State& st, const EventRecord& ev, RngStream& rng, Emit&& emit) const {
        const double now = ev.key.ts.value();
        const ObjectId self = ev.key.dst;
        advance_clock(st, now);
        switch (ev.kind) {
        case kFreshArrival: {
            // The arrival stream renews itself independently of admission.
            schedule_arrivals(self, now, rng, emit);
            const std::uint64_t batch = std::max<std::uint64_t>(1, ev.payload.u0);
            for (std::uint64_t c = 0; c < batch; ++c) {
                const std::uint32_t slot = allocate(st);
                if (slot == kNoSlot) {
                    ++st.blocked;
                } else {
                    ++st.calls_started;
                    const double duration = rng.exponential(kMeanCallMinutes);
                    begin_leg(st, self, now, slot, duration, rng, emit);
                }
            }
            st.power_acc += power_scan(st) * p_.grain;
            break;
        }
        case kHandoffIn: {
            const std::uint32_t slot = allocate(st);
            if (slot == kNoSlot) {
                ++st.dropped;
            } else {
                ++st.handoffs_in;
                begin_leg(st, self, now, slot, ev.payload.f0, rng, emit);
            }
            st.power_acc += power_scan(st) * p_.grain;
            break;
        }
        case kCallEnd: {
            release(st, static_cast<std::uint32_t>(ev.payload.u0));
            ++st.calls_completed;
            break;
        }
        case kHandoffOut: {
            release(st, static_cast<std::uint32_t>(ev.payload.u0));
            ++st.handoffs_out;
            const ObjectId next = rng.pick(2) == 0
                                      ? static_cast<ObjectId>((self + 1) % p_.cells)
                                      : static_cast<ObjectId>((self + p_.cells - 1) % p_.cells);
            Payload p;
            p.f0 = ev.payload.f0; // remaining call duration
            emit(next, now + padded_lookahead(kLookaheadMinutes), kHandoffIn, p);
            break;
        }
        default: throw ConsistencyError("pcs: unknown event kind");
        }
    }

    [[nodiscard]] std::uint64_t state_digest(const State& st) const {
        return Digest{}
            .bytes(std::as_bytes(std::span(st.busy)))
            .u32(st.busy_count)
            .u64(st.calls_started)
            .u64(st.calls_completed)
            .u64(st.handoffs_in)
            .u64(st.handoffs_out)
            .u64(st.blocked)
            .u64(st.dropped)
            .f64(st.power_acc)
            .f64(st.busy_integral)
            .f64(st.last_ts)
            .finish();
    }

    // [busy_integral, last_ts, busy_count, blocked, dropped, handoffs_out,
    //  handoffs_in, power_acc, calls_started] — consumed by the validation tests.
    [[nodiscard]] std::vector<double> observables(const State& st) const {
        return {st.busy_integral,
                st.last_ts,
                static_cast<double>(st.busy_count),
                static_cast<double>(st.blocked),
                static_cast<double>(st.dropped),
                static_cast<double>(st.handoffs_out),
                static_cast<double>(st.handoffs_in),
                st.power_acc,
                static_cast<double>(st.calls_started)};
    }

    // One pass over the busy slots with a deterministic pseudo-distance per
    // slot; the per-admission compute kernel.
    static double power_scan(const State& st) {
        double sum = 0.0;
        for (std::uint32_t k = 0; k < st.busy.size(); ++k) {
            if (!st.busy[k]) continue;
            const double r = 1.0 + static_cast<double>(k % 64) / 64.0;
            const double p = kNoiseFloor * std::pow(r, kPathLossExp);
            sum += std::clamp(p, kPowerMin, kPowerMax);
        }
        return sum;
    }

    [[nodiscard]] const Params& params() const { return p_; }

private:
    static constexpr std::uint32_t kNoSlot = ~std::uint32_t{0};

    [[nodiscard]] double arrival_mean(ObjectId cell) const {
        // Poisson arrivals at rate target/mean_duration keep `target` busy on
        // average (infinite-server equilibrium); the mean gap is the inverse.
        double target = p_.target_busy;
        if (p_.unbalanced) target *= cell < p_.cells / 2 ? 1.5 : 0.5;
        return kMeanCallMinutes / target;
    }

    [[nodiscard]] double clamp_delay(double d) const {
        return std::max(padded_lookahead(kLookaheadMinutes), d);
    }

    // Poisson gaps at high load can be shorter than the lookahead, and simply
    // flooring each gap would thin the stream and drag the equilibrium below
    // target. Instead, accumulate gaps until the next event clears the
    // lookahead and carry the number of arrivals it represents, so the
    // arrival mass per unit time stays exact.
    template <class Emit>
    void schedule_arrivals(ObjectId self, double now, RngStream& rng, Emit&& emit) const {
        const double floor = padded_lookahead(kLookaheadMinutes);
        const double mean = arrival_mean(self);
        double gap = rng.exponential(mean);
        std::uint64_t count = 1;
        while (gap < floor) {
            gap += rng.exponential(mean);
            ++count;
        }
        Payload p;
        p.u0 = count;
        emit(self, now + gap, kFreshArrival, p);
    }

    static void advance_clock(State& st, double now) {
        st.busy_integral += st.busy_count * (now - st.last_ts);
        st.last_ts = now;
    }

    std::uint32_t allocate(State& st) const {
        for (std::uint32_t k = 0; k < p_.channels; ++k) {
            if (!st.busy[k]) {
                st.busy[k] = 1;
                ++st.busy_count;
                return k;
            }
        }
        return kNoSlot;
    }

    static void release(State& st, std::uint32_t slot) {
        if (slot >= st.busy.size() || !st.busy[slot]) {
            throw ConsistencyError("pcs: releasing a slot that is not busy");
        }
        st.busy[slot] = 0;
        --st.busy_count;
    }

    // Decide how the call leg ends: completion here, or handoff after an
    // exponential sojourn. Exactly one terminating event per leg owns the slot.
    template <class Emit>
    void begin_leg(State&, ObjectId self, double now, std::uint32_t slot, double remaining,
                   RngStream& rng, Emit&& emit) const {
        const double sojourn = rng.exponential(kMeanHopMinutes);
        Payload p;
        p.u0 = slot;
        if (remaining <= sojourn) {
            emit(self, now + clamp_delay(remaining), kCallEnd, p);
        } else {
            p.f0 = remaining - sojourn;
            emit(self, now + clamp_delay(sojourn), kHandoffOut, p);
        }
    }

    Params p_;
};

} // namespace tempo
