#pragma once

#include <atomic>
#include <cstdint>
#include <thread>

#include "tempo/errors.hpp"

namespace tempo {

// Sense-reversing barrier with a leader action: the last thread to arrive
// runs `fn` while everyone else waits, and its writes are visible to all
// threads once they leave (release store / acquire loads on the sense word).
// Each participating thread keeps its own Sense token across uses.
class SenseBarrier {
public:
    explicit SenseBarrier(int parties) : parties_(parties) {
        if (parties <= 0) throw ConfigError("barrier needs at least one party");
    }

    struct Sense {
        bool phase = false;
    };

    template <class Leader>
    void arrive_and_wait(Sense& s, Leader&& fn) {
        const bool target = !s.phase;
        if (arrived_.fetch_add(1, std::memory_order_acq_rel) == parties_ - 1) {
            fn();
            arrived_.store(0, std::memory_order_relaxed);
            sense_.store(target, std::memory_order_release);
        } else {
            for (std::uint32_t spins = 0; sense_.load(std::memory_order_acquire) != target;
                 ++spins) {
                if (spins > 4096) std::this_thread::yield();
            }
        }
        s.phase = target;
    }

    void arrive_and_wait(Sense& s) {
        arrive_and_wait(s, [] {});
    }

private:
    int parties_;
    std::atomic<int> arrived_{0};
    std::atomic<bool> sense_{false};
};

} // namespace tempo
