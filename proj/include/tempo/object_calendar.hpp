#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <vector>

#include "tempo/errors.hpp"
#include "tempo/event.hpp"
#include "tempo/shared_queue.hpp" // bucket_index
#include "tempo/time.hpp"

namespace tempo {

// Per-object pending-event calendar used by the window-synchronized engine.
//
// Events are hashed into a fixed ring of buckets by window index
// (floor(ts / window_width) mod ring size); each bucket is a key-sorted
// vector under a spin lock. A window is always drained as a whole, so ring
// aliasing (windows w and w + ring_size sharing a bucket) is resolved by
// filtering on the true window index during the drain.
//
// The calendar records the highest drained window and rejects inserts below
// it: with a lookahead of at least one window width no such insert can occur,
// so hitting the check means the synchronization protocol was violated.
class ObjectCalendar {
public:
    ObjectCalendar(ObjectId owner, double window_width, std::uint32_t ring_log2 = 8)
        : owner_(owner), width_(window_width),
          mask_((std::size_t{1} << ring_log2) - 1),
          ring_(std::size_t{1} << ring_log2) {
        if (!(width_ > 0.0)) throw ConfigError("window width must be positive");
    }

    ObjectCalendar(const ObjectCalendar&) = delete;
    ObjectCalendar& operator=(const ObjectCalendar&) = delete;

    [[nodiscard]] ObjectId owner() const { return owner_; }
    [[nodiscard]] double window_width() const { return width_; }

    [[nodiscard]] std::int64_t window_of(double ts) const { return bucket_index(ts, width_); }

    void insert(const EventRecord& ev) {
        if (ev.key.dst != owner_) {
            throw DestinationMismatchError("event inserted into another object's calendar");
        }
        const std::int64_t w = window_of(ev.key.ts.value());
        if (w < drained_below_.load(std::memory_order_seq_cst)) {
            throw CausalityError("event scheduled into an already-drained window");
        }
        Bucket& b = ring_[static_cast<std::size_t>(w) & mask_];
        lock(b);
        auto pos = std::upper_bound(b.evs.begin(), b.evs.end(), ev,
                                    [](const EventRecord& x, const EventRecord& y) {
                                        return x.key < y.key;
                                    });
        b.evs.insert(pos, ev);
        b.count.store(b.evs.size(), std::memory_order_seq_cst);
        unlock(b);
        pending_.fetch_add(1, std::memory_order_relaxed);
    }

    // Remove every event of window `w` and append them, key-sorted, to `out`.
    // Each window must be drained at most once and in increasing order.
    void drain_window(std::int64_t w, std::vector<EventRecord>& out) {
        atomic_max(drained_below_, w + 1);
        Bucket& b = ring_[static_cast<std::size_t>(w) & mask_];
        lock(b);
        std::size_t kept = 0, taken = 0;
        for (std::size_t i = 0; i < b.evs.size(); ++i) {
            if (window_of(b.evs[i].key.ts.value()) == w) {
                out.push_back(b.evs[i]); // sorted run stays sorted when filtered
                ++taken;
            } else {
                b.evs[kept++] = b.evs[i];
            }
        }
        b.evs.resize(kept);
        b.count.store(kept, std::memory_order_seq_cst);
        unlock(b);
        pending_.fetch_sub(taken, std::memory_order_relaxed);
    }

    // Minimum pending timestamp, +inf when the calendar is empty. Exact when
    // no insert is concurrent (the engine only calls this at a barrier).
    [[nodiscard]] double min_pending_ts() const {
        double best = kTimeInfinity;
        for (const Bucket& b : ring_) {
            if (b.count.load(std::memory_order_seq_cst) == 0) continue;
            lock(b);
            if (!b.evs.empty()) best = std::min(best, b.evs.front().key.ts.value());
            unlock(b);
        }
        return best;
    }

    [[nodiscard]] std::size_t pending_count() const {
        return pending_.load(std::memory_order_relaxed);
    }

    // Number of times a bucket lock was found held by another thread.
    [[nodiscard]] std::uint64_t lock_contentions() const {
        return contentions_.load(std::memory_order_relaxed);
    }

private:
    struct alignas(64) Bucket {
        mutable std::atomic_flag busy; // clear on construction (C++20)
        std::atomic<std::size_t> count{0};
        std::vector<EventRecord> evs;
    };

    void lock(const Bucket& b) const {
        if (b.busy.test_and_set(std::memory_order_acquire)) {
            contentions_.fetch_add(1, std::memory_order_relaxed);
            while (b.busy.test_and_set(std::memory_order_acquire)) {
            }
        }
    }
    void unlock(const Bucket& b) const { b.busy.clear(std::memory_order_release); }

    static void atomic_max(std::atomic<std::int64_t>& a, std::int64_t v) {
        std::int64_t cur = a.load(std::memory_order_seq_cst);
        while (v > cur && !a.compare_exchange_weak(cur, v, std::memory_order_seq_cst)) {
        }
    }

    ObjectId owner_;
    double width_;
    std::size_t mask_;
    std::vector<Bucket> ring_;
    std::atomic<std::int64_t> drained_below_{0};
    std::atomic<std::size_t> pending_{0};
    mutable std::atomic<std::uint64_t> contentions_{0};
};

} // namespace tempo
