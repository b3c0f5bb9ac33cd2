#pragma once

#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tempo/epoch.hpp"
#include "tempo/errors.hpp"
#include "tempo/event.hpp"
#include "tempo/time.hpp"

namespace tempo {

// Bucket addressing shared by the calendar structures: floor(ts / width).
inline std::int64_t bucket_index(double ts, double width) {
    if (!(width > 0.0)) throw std::invalid_argument("bucket width must be positive");
    return static_cast<std::int64_t>(std::floor(ts / width));
}

// Outcome of an annihilation attempt, i.e. the status the event held when the
// invalidation landed. A second invalidation is a no-op (was_invalidated).
enum class InvalidateOutcome {
    was_pending,
    was_in_processing,
    was_processed,
    was_invalidated,
};

// Fully shared, timestamp-bucketed pending-event pool.
//
// Structure: a lazily allocated two-level directory of fixed-width buckets;
// each bucket holds a key-sorted singly linked list of nodes. All state
// transitions are single-word CAS operations; insertion links with CAS into
// the sorted position. Nodes are never unlinked while reachable — an
// annihilated event stays as a tombstone until fossil collection reclaims its
// whole bucket (below the commit horizon) through an epoch-based grace
// period, so concurrent traversals never touch freed memory.
//
// Cursor protocol: `cursor_` is the lowest bucket that may still hold a
// pending node. Fetch walks from the cursor and advances it past buckets with
// no pending nodes; an insert (or re-flag) below the cursor drags it back
// down After linking. The advance path re-scans the bucket once after the
// advance CAS, which closes the window where an insert linked behind an
// in-flight traversal and then read the not-yet-advanced cursor.
class SharedCalendarQueue {
public:
private:
    struct Node; // node layout is an implementation detail

public:
    struct Config {
        double bucket_width = 1.0;
        std::uint32_t buckets_per_segment_log2 = 12; // 4096 buckets / segment
        std::uint32_t max_segments = 1u << 16;       // ~2.7e8 addressable buckets
    };

    class Ticket;

    // Validity token for a pool node. Stable until fossil collection frees the
    // node's bucket; later dereferences are caught in debug builds via the
    // node generation counter.
    class EventHandle {
    public:
        EventHandle() = default;

        [[nodiscard]] bool valid() const { return node_ != nullptr; }

        [[nodiscard]] const EventRecord& record() const {
            assert(node_ != nullptr && node_->gen == gen_ && "stale event handle");
            return node_->ev;
        }

        [[nodiscard]] EventStatus status() const {
            assert(node_ != nullptr && node_->gen == gen_ && "stale event handle");
            return static_cast<EventStatus>(node_->state.load(std::memory_order_seq_cst));
        }

        friend bool operator==(const EventHandle&, const EventHandle&) = default;

    private:
        friend class SharedCalendarQueue;
        EventHandle(Node* n, std::uint64_t g) : node_(n), gen_(g) {}
        Node* node_ = nullptr;
        std::uint64_t gen_ = 0;
    };
    explicit SharedCalendarQueue(double bucket_width)
        : SharedCalendarQueue(Config{.bucket_width = bucket_width}) {}

    explicit SharedCalendarQueue(const Config& cfg)
        : cfg_(cfg), width_(cfg.bucket_width),
          seg_buckets_(std::size_t{1} << cfg.buckets_per_segment_log2),
          seg_mask_(seg_buckets_ - 1) {
        if (!(width_ > 0.0)) throw std::invalid_argument("bucket width must be positive");
        dir_ = std::make_unique<std::atomic<Segment*>[]>(cfg_.max_segments);
        for (std::uint32_t i = 0; i < cfg_.max_segments; ++i) dir_[i].store(nullptr);
    }

    ~SharedCalendarQueue() {
        for (std::uint32_t i = 0; i < cfg_.max_segments; ++i) delete dir_[i].load();
        for (auto& batch : limbo_) {
            for (Segment* s : batch.segments) delete s;
        }
        // Node memory is owned by the arenas and released with them.
    }

    SharedCalendarQueue(const SharedCalendarQueue&) = delete;
    SharedCalendarQueue& operator=(const SharedCalendarQueue&) = delete;

    // Per-thread access token: epoch slot plus a local node cache.
    class Ticket {
    public:
        explicit Ticket(SharedCalendarQueue& q) : q_(&q), reg_(q.epoch_) {}
        ~Ticket() {
            if (!cache_.empty()) {
                std::lock_guard lk(q_->pool_mu_);
                q_->free_pool_.insert(q_->free_pool_.end(), cache_.begin(), cache_.end());
            }
        }
        Ticket(const Ticket&) = delete;
        Ticket& operator=(const Ticket&) = delete;

    private:
        friend class SharedCalendarQueue;
        SharedCalendarQueue* q_;
        EpochDomain::Registration reg_;
        std::vector<Node*> cache_;
    };

    [[nodiscard]] double bucket_width() const { return width_; }

    // Mean inter-event spacing over a warm-up batch; the default bucket width.
    static double suggest_bucket_width(std::span<const EventRecord> warmup) {
        if (warmup.size() < 2) return 1.0;
        double lo = kTimeInfinity, hi = -kTimeInfinity;
        for (const auto& ev : warmup) {
            lo = std::min(lo, ev.key.ts.value());
            hi = std::max(hi, ev.key.ts.value());
        }
        double span = hi - lo;
        if (!(span > 0.0)) return 1.0;
        return span / static_cast<double>(warmup.size() - 1);
    }

    // Insert a pending event. Rejects timestamps inside the reclaimed region.
    EventHandle insert(Ticket& t, const EventRecord& ev) {
        EpochDomain::Guard g(t.reg_);
        const double ts = ev.key.ts.value();
        const std::int64_t b = bucket_index(ts, width_);
        if (b < horizon_bucket_.load(std::memory_order_seq_cst)) {
            throw StaleInsertError("insert below the fossil-collected horizon");
        }
        Node* n = alloc_node(t);
        n->ev = ev;
        n->ev.status = EventStatus::pending;
        n->state.store(static_cast<std::uint32_t>(EventStatus::pending),
                       std::memory_order_relaxed);

        std::atomic<Node*>& head = bucket_head(b);
        for (;;) {
            std::atomic<Node*>* prev = &head;
            Node* curr = prev->load(std::memory_order_seq_cst);
            while (curr != nullptr && curr->ev.key < n->ev.key) {
                prev = &curr->next;
                curr = prev->load(std::memory_order_seq_cst);
            }
            n->next.store(curr, std::memory_order_relaxed);
            if (prev->compare_exchange_strong(curr, n, std::memory_order_seq_cst)) break;
        }

        // Track the highest populated bucket, then drag the cursor down if we
        // linked below it (the order matters: link first, then fix cursor).
        atomic_max(max_bucket_, b);
        atomic_min(cursor_, b);
        inserted_.fetch_add(1, std::memory_order_relaxed);
        return EventHandle(n, n->gen);
    }

    // Claim and return the minimum-key pending event. `publish` is invoked
    // with the candidate timestamp immediately before each claim attempt, so
    // callers that maintain an externally visible lower bound can expose it
    // before the event leaves the pending set; pass a no-op otherwise.
    template <class Publish>
    std::optional<EventHandle> fetch_min(Ticket& t, Publish&& publish,
                                         double limit_ts = kTimeInfinity) {
        std::optional<EventHandle> out;
        walk_front(t, [&](Node* n) {
            if (n->ev.key.ts.value() >= limit_ts) return WalkAction::stop;
            publish(n->ev.key.ts.value());
            if (try_claim_node(n)) {
                out = EventHandle(n, n->gen);
                return WalkAction::stop;
            }
            return WalkAction::next;
        });
        return out;
    }

    std::optional<EventHandle> fetch_min(Ticket& t, double limit_ts = kTimeInfinity) {
        return fetch_min(t, [](double) {}, limit_ts);
    }

    // Collect up to `max_n` pending handles from the queue front, all with
    // ts < limit_ts and within `band` of the first pending timestamp seen.
    // Nothing is claimed; entries may race away before the caller claims them.
    void scan_front(Ticket& t, double limit_ts, double band, std::size_t max_n,
                    std::vector<EventHandle>& out) {
        out.clear();
        double front_ts = kTimeInfinity;
        walk_front(t, [&](Node* n) {
            const double ts = n->ev.key.ts.value();
            if (ts >= limit_ts) return WalkAction::stop;
            if (front_ts == kTimeInfinity) front_ts = ts;
            if (ts > front_ts + band) return WalkAction::stop;
            out.emplace_back(EventHandle(n, n->gen));
            return out.size() >= max_n ? WalkAction::stop : WalkAction::next;
        });
    }

    // Claim every pending event addressed to `dst` with ts in [lo, hi) and
    // ts < limit_ts. Used for bind-window batching by callers that already
    // hold a claim at or below `lo` for the same object.
    void claim_range_for(Ticket& t, ObjectId dst, double lo, double hi, double limit_ts,
                         std::vector<EventHandle>& out) {
        EpochDomain::Guard g(t.reg_);
        const double cap = std::min(hi, limit_ts);
        if (!(cap > lo)) return;
        const std::int64_t b_lo =
            std::max(bucket_index(lo, width_), horizon_bucket_.load(std::memory_order_seq_cst));
        const std::int64_t b_hi = bucket_index(std::nextafter(cap, 0.0), width_);
        for (std::int64_t b = b_lo; b <= b_hi; ++b) {
            Segment* seg = segment_peek(b);
            if (seg == nullptr) continue;
            for (Node* n = seg->heads[b & seg_mask_].load(std::memory_order_seq_cst);
                 n != nullptr; n = n->next.load(std::memory_order_seq_cst)) {
                const double ts = n->ev.key.ts.value();
                if (ts >= cap) break;
                if (ts < lo || n->ev.key.dst != dst) continue;
                if (status_of(n) != EventStatus::pending) continue;
                if (try_claim_node(n)) out.emplace_back(EventHandle(n, n->gen));
            }
        }
    }

    bool try_claim(const EventHandle& h) { return try_claim_node(h.node_); }

    // in_processing -> processed. False means the event was annihilated while
    // it was being processed; the caller must undo its effects.
    bool mark_processed(const EventHandle& h) {
        return transition(h, EventStatus::in_processing, EventStatus::processed);
    }

    // processed -> pending (rollback re-flag of a still-valid undone event).
    bool requeue(const EventHandle& h) {
        if (!transition(h, EventStatus::processed, EventStatus::pending)) return false;
        atomic_min(cursor_, bucket_index(h.node_->ev.key.ts.value(), width_));
        return true;
    }

    // in_processing -> pending (claim abandoned, e.g. bind acquisition lost).
    bool unclaim(const EventHandle& h) {
        if (!transition(h, EventStatus::in_processing, EventStatus::pending)) return false;
        atomic_min(cursor_, bucket_index(h.node_->ev.key.ts.value(), width_));
        return true;
    }

    InvalidateOutcome mark_invalid(const EventHandle& h) {
        Node* n = h.node_;
        assert(n != nullptr && n->gen == h.gen_ && "stale event handle");
        std::uint32_t s = n->state.load(std::memory_order_seq_cst);
        for (;;) {
            if (s == static_cast<std::uint32_t>(EventStatus::invalidated)) {
                return InvalidateOutcome::was_invalidated;
            }
            if (n->state.compare_exchange_weak(
                    s, static_cast<std::uint32_t>(EventStatus::invalidated),
                    std::memory_order_seq_cst)) {
                invalidated_.fetch_add(1, std::memory_order_relaxed);
                switch (static_cast<EventStatus>(s)) {
                case EventStatus::pending: return InvalidateOutcome::was_pending;
                case EventStatus::in_processing: return InvalidateOutcome::was_in_processing;
                default: return InvalidateOutcome::was_processed;
                }
            }
        }
    }

    // Minimum timestamp over pending and in-processing nodes; +inf when none.
    // Processed-but-uncommitted nodes are deliberately excluded: any rollback
    // that could undo them must be triggered by an event below this minimum,
    // and no such event can exist (in-flight generations are covered by their
    // generator's published claim).
    double min_unprocessed_ts(Ticket& t) {
        EpochDomain::Guard g(t.reg_);
        const std::int64_t b_lo = horizon_bucket_.load(std::memory_order_seq_cst);
        const std::int64_t b_hi = max_bucket_.load(std::memory_order_seq_cst);
        for (std::int64_t b = b_lo; b <= b_hi; ++b) {
            Segment* seg = segment_peek(b);
            if (seg == nullptr) continue;
            for (Node* n = seg->heads[b & seg_mask_].load(std::memory_order_seq_cst);
                 n != nullptr; n = n->next.load(std::memory_order_seq_cst)) {
                EventStatus st = status_of(n);
                if (st == EventStatus::pending || st == EventStatus::in_processing) {
                    return n->ev.key.ts.value();
                }
            }
        }
        return kTimeInfinity;
    }

    // Reclaim every bucket strictly below `commit_ts` (single caller at a
    // time; the optimistic engine serializes this behind its GVT round lock).
    // Returns the number of nodes retired.
    std::size_t fossil_collect_below(Ticket& t, double commit_ts) {
        EpochDomain::Guard g(t.reg_);
        const std::int64_t target =
            std::min(bucket_index(commit_ts, width_),
                     max_bucket_.load(std::memory_order_seq_cst) + 1);
        const std::int64_t hb = horizon_bucket_.load(std::memory_order_seq_cst);
        if (target <= hb) {
            reclaim_limbo();
            return 0;
        }

        LimboBatch batch;
        batch.tag = epoch_.current();
        for (std::int64_t b = hb; b < target; ++b) {
            Segment* seg = segment_peek(b);
            if (seg == nullptr) continue;
            Node* n = seg->heads[b & seg_mask_].exchange(nullptr, std::memory_order_seq_cst);
            while (n != nullptr) {
                EventStatus st = status_of(n);
                if (st == EventStatus::pending || st == EventStatus::in_processing) {
                    throw ConsistencyError("fossil collection reached a live event");
                }
                batch.nodes.push_back(n);
                n = n->next.load(std::memory_order_seq_cst);
            }
        }
        horizon_bucket_.store(target, std::memory_order_seq_cst);
        atomic_max(cursor_, target); // never leave the cursor in reclaimed space

        // Retire segments that now lie entirely below the horizon.
        const std::int64_t seg_lo = hb >> cfg_.buckets_per_segment_log2;
        const std::int64_t seg_hi = target >> cfg_.buckets_per_segment_log2; // exclusive
        for (std::int64_t s = seg_lo; s < seg_hi; ++s) {
            Segment* seg = dir_[s].exchange(nullptr, std::memory_order_seq_cst);
            if (seg != nullptr) batch.segments.push_back(seg);
        }

        const std::size_t retired = batch.nodes.size();
        if (!batch.nodes.empty() || !batch.segments.empty()) {
            limbo_.push_back(std::move(batch));
        }
        epoch_.try_advance();
        epoch_.try_advance();
        reclaim_limbo();
        return retired;
    }

    [[nodiscard]] double fossil_horizon_ts() const {
        return static_cast<double>(horizon_bucket_.load(std::memory_order_seq_cst)) * width_;
    }

    [[nodiscard]] std::uint64_t inserted_count() const {
        return inserted_.load(std::memory_order_relaxed);
    }
    [[nodiscard]] std::uint64_t invalidated_count() const {
        return invalidated_.load(std::memory_order_relaxed);
    }

private:
    struct Node {
        EventRecord ev;
        std::atomic<std::uint32_t> state{0};
        std::atomic<Node*> next{nullptr};
        std::uint64_t gen = 0;
    };

    struct Segment {
        explicit Segment(std::size_t n) : heads(n) {
            for (auto& h : heads) h.store(nullptr, std::memory_order_relaxed);
        }
        std::vector<std::atomic<Node*>> heads;
    };

    struct LimboBatch {
        std::uint64_t tag = 0;
        std::vector<Node*> nodes;
        std::vector<Segment*> segments;
    };

    enum class WalkAction { next, stop };

    static EventStatus status_of(Node* n) {
        return static_cast<EventStatus>(n->state.load(std::memory_order_seq_cst));
    }

    bool try_claim_node(Node* n) {
        std::uint32_t expect = static_cast<std::uint32_t>(EventStatus::pending);
        return n->state.compare_exchange_strong(
            expect, static_cast<std::uint32_t>(EventStatus::in_processing),
            std::memory_order_seq_cst);
    }

    bool transition(const EventHandle& h, EventStatus from, EventStatus to) {
        Node* n = h.node_;
        assert(n != nullptr && n->gen == h.gen_ && "stale event handle");
        std::uint32_t expect = static_cast<std::uint32_t>(from);
        return n->state.compare_exchange_strong(expect, static_cast<std::uint32_t>(to),
                                                std::memory_order_seq_cst);
    }

    static void atomic_min(std::atomic<std::int64_t>& a, std::int64_t v) {
        std::int64_t cur = a.load(std::memory_order_seq_cst);
        while (v < cur && !a.compare_exchange_weak(cur, v, std::memory_order_seq_cst)) {
        }
    }

    static void atomic_max(std::atomic<std::int64_t>& a, std::int64_t v) {
        std::int64_t cur = a.load(std::memory_order_seq_cst);
        while (v > cur && !a.compare_exchange_weak(cur, v, std::memory_order_seq_cst)) {
        }
    }

    std::atomic<Node*>& bucket_head(std::int64_t b) {
        Segment* seg = segment_get_or_alloc(b);
        return seg->heads[b & seg_mask_];
    }

    Segment* segment_peek(std::int64_t b) const {
        const std::int64_t s = b >> cfg_.buckets_per_segment_log2;
        if (s < 0 || static_cast<std::uint64_t>(s) >= cfg_.max_segments) return nullptr;
        return dir_[s].load(std::memory_order_seq_cst);
    }

    Segment* segment_get_or_alloc(std::int64_t b) {
        const std::int64_t s = b >> cfg_.buckets_per_segment_log2;
        if (s < 0 || static_cast<std::uint64_t>(s) >= cfg_.max_segments) {
            throw ConfigError("shared queue bucket index out of range; widen bucket_width");
        }
        Segment* seg = dir_[s].load(std::memory_order_seq_cst);
        if (seg != nullptr) return seg;
        auto fresh = std::make_unique<Segment>(seg_buckets_);
        Segment* expected = nullptr;
        if (dir_[s].compare_exchange_strong(expected, fresh.get(), std::memory_order_seq_cst)) {
            return fresh.release();
        }
        return expected; // another thread won the allocation race
    }

    // Walk pending nodes in key order starting at the cursor, advancing the
    // cursor past pending-free buckets (with the post-advance re-scan that
    // makes the advance safe against concurrent inserts).
    template <class Visit>
    void walk_front(Ticket& t, Visit&& visit) {
        EpochDomain::Guard g(t.reg_);
        for (;;) {
            std::int64_t b = std::max(cursor_.load(std::memory_order_seq_cst),
                                      horizon_bucket_.load(std::memory_order_seq_cst));
            const std::int64_t start = b;
            // While every bucket scanned so far was pending-free we are the
            // queue front and may advance the cursor; after the first pending
            // sighting the cursor stays parked there and we only read ahead.
            bool at_front = true;
            for (;;) {
                if (b > max_bucket_.load(std::memory_order_seq_cst)) {
                    // Nothing ahead. If the cursor dropped below our start
                    // an insert landed behind us: restart.
                    if (cursor_.load(std::memory_order_seq_cst) < start) break;
                    return;
                }
                bool saw_pending = false;
                bool stopped = false;
                auto scan = [&](Node* head) {
                    for (Node* n = head; n != nullptr;
                         n = n->next.load(std::memory_order_seq_cst)) {
                        if (status_of(n) != EventStatus::pending) continue;
                        saw_pending = true;
                        if (visit(n) == WalkAction::stop) {
                            stopped = true;
                            return;
                        }
                    }
                };
                Segment* seg = segment_peek(b);
                if (seg != nullptr) scan(seg->heads[b & seg_mask_].load(std::memory_order_seq_cst));
                if (stopped) return;
                if (saw_pending) {
                    at_front = false;
                } else if (at_front) {
                    std::int64_t expect = b;
                    if (cursor_.compare_exchange_strong(expect, b + 1,
                                                        std::memory_order_seq_cst)) {
                        // Re-scan once: an insert may have linked into b after
                        // our traversal but before the advance.
                        bool late = false;
                        if (seg == nullptr) seg = segment_peek(b);
                        if (seg != nullptr) {
                            for (Node* n =
                                     seg->heads[b & seg_mask_].load(std::memory_order_seq_cst);
                                 n != nullptr; n = n->next.load(std::memory_order_seq_cst)) {
                                if (status_of(n) == EventStatus::pending) {
                                    late = true;
                                    break;
                                }
                            }
                        }
                        if (late) {
                            atomic_min(cursor_, b);
                            continue; // revisit bucket b
                        }
                    } else if (expect < b) {
                        break; // an insert dragged the cursor down; restart
                    }
                    // expect > b: another walker advanced past us — harmless,
                    // keep scanning forward without touching the cursor.
                }
                ++b;
            }
        }
    }

    Node* alloc_node(Ticket& t) {
        if (t.cache_.empty()) {
            std::lock_guard lk(pool_mu_);
            if (free_pool_.empty()) {
                constexpr std::size_t kChunk = 1024;
                arenas_.push_back(std::make_unique<Node[]>(kChunk));
                Node* base = arenas_.back().get();
                for (std::size_t i = 0; i < kChunk; ++i) free_pool_.push_back(base + i);
            }
            const std::size_t take = std::min<std::size_t>(64, free_pool_.size());
            t.cache_.insert(t.cache_.end(), free_pool_.end() - take, free_pool_.end());
            free_pool_.resize(free_pool_.size() - take);
        }
        Node* n = t.cache_.back();
        t.cache_.pop_back();
        n->next.store(nullptr, std::memory_order_relaxed);
        return n;
    }

    void reclaim_limbo() {
        while (!limbo_.empty() && epoch_.reclaimable(limbo_.front().tag)) {
            LimboBatch& batch = limbo_.front();
            {
                std::lock_guard lk(pool_mu_);
                for (Node* n : batch.nodes) {
                    ++n->gen; // invalidates outstanding handles detectably
                    free_pool_.push_back(n);
                }
            }
            for (Segment* s : batch.segments) delete s;
            limbo_.pop_front();
        }
    }

    Config cfg_;
    double width_;
    std::size_t seg_buckets_;
    std::size_t seg_mask_;

    std::unique_ptr<std::atomic<Segment*>[]> dir_;
    alignas(64) std::atomic<std::int64_t> cursor_{0};
    alignas(64) std::atomic<std::int64_t> max_bucket_{-1};
    alignas(64) std::atomic<std::int64_t> horizon_bucket_{0};
    std::atomic<std::uint64_t> inserted_{0};
    std::atomic<std::uint64_t> invalidated_{0};

    EpochDomain epoch_;
    std::mutex pool_mu_;
    std::vector<std::unique_ptr<Node[]>> arenas_;
    std::vector<Node*> free_pool_;
    std::deque<LimboBatch> limbo_;
};

using EventHandle = SharedCalendarQueue::EventHandle;

} // namespace tempo
