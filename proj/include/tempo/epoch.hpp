#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>

#include "tempo/errors.hpp"

namespace tempo {

// Minimal epoch-based reclamation domain.
//
// Readers wrap each traversal of a protected structure in a Guard. Memory
// unlinked from the structure is tagged with the epoch current at retire
// time; it may be freed once the global epoch has advanced by two, because
// every critical section that could still observe the unlinked memory began
// before the first advance. The epoch is advanced opportunistically by the
// (single) reclaimer; if a reader stalls inside a Guard the epoch simply
// stops advancing and garbage accumulates, which is safe.
class EpochDomain {
public:
    static constexpr std::size_t kMaxThreads = 256;

    EpochDomain() = default;
    EpochDomain(const EpochDomain&) = delete;
    EpochDomain& operator=(const EpochDomain&) = delete;

    // One per participating thread; holds a slot in the domain.
    class Registration {
    public:
        explicit Registration(EpochDomain& d) : domain_(&d), slot_(d.acquire_slot()) {}
        ~Registration() {
            if (domain_ != nullptr) domain_->release_slot(slot_);
        }
        Registration(const Registration&) = delete;
        Registration& operator=(const Registration&) = delete;

        [[nodiscard]] std::size_t slot() const { return slot_; }
        [[nodiscard]] EpochDomain& domain() const { return *domain_; }

    private:
        EpochDomain* domain_;
        std::size_t slot_;
    };

    // Pins the registration's slot to the current epoch for one critical
    // section. The store/re-check loop closes the race with a concurrent
    // epoch advance.
    class Guard {
    public:
        explicit Guard(Registration& r) : slot_(&r.domain().slots_[r.slot()].pinned) {
            EpochDomain& d = r.domain();
            std::uint64_t g = d.global_.load(std::memory_order_seq_cst);
            for (;;) {
                slot_->store(g, std::memory_order_seq_cst);
                std::uint64_t g2 = d.global_.load(std::memory_order_seq_cst);
                if (g2 == g) break;
                g = g2;
            }
        }
        ~Guard() { slot_->store(0, std::memory_order_release); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

    private:
        std::atomic<std::uint64_t>* slot_;
    };

    [[nodiscard]] std::uint64_t current() const {
        return global_.load(std::memory_order_seq_cst);
    }

    // Advance the global epoch if every pinned reader has caught up with it.
    // Returns true on advance. Intended for a single caller at a time.
    bool try_advance() {
        std::uint64_t g = global_.load(std::memory_order_seq_cst);
        for (std::size_t i = 0; i < kMaxThreads; ++i) {
            std::uint64_t p = slots_[i].pinned.load(std::memory_order_seq_cst);
            if (p != 0 && p != g) return false;
        }
        return global_.compare_exchange_strong(g, g + 1, std::memory_order_seq_cst);
    }

    // Garbage tagged with `tag` is reclaimable once current() >= tag + 2.
    [[nodiscard]] bool reclaimable(std::uint64_t tag) const { return current() >= tag + 2; }

private:
    struct alignas(64) Slot {
        std::atomic<std::uint64_t> pinned{0}; // 0 = quiescent
        std::atomic<bool> in_use{false};
    };

    std::size_t acquire_slot() {
        for (std::size_t i = 0; i < kMaxThreads; ++i) {
            bool expected = false;
            if (slots_[i].in_use.compare_exchange_strong(expected, true)) return i;
        }
        throw ConfigError("EpochDomain: too many registered threads");
    }

    void release_slot(std::size_t i) {
        slots_[i].pinned.store(0, std::memory_order_release);
        slots_[i].in_use.store(false, std::memory_order_release);
    }

    std::atomic<std::uint64_t> global_{1}; // starts at 1 so 0 can mean "quiescent"
    Slot slots_[kMaxThreads];
};

} // namespace tempo
