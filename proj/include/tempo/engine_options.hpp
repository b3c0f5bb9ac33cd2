#pragma once

#include <cstdint>

#include "tempo/topology.hpp"

namespace tempo {

// Knobs shared by all engines. Fields a given engine does not use are
// ignored (the sequential engine ignores everything below `record_traces`).
struct EngineOptions {
    // Fail fast on protocol violations: emitted delays are checked against
    // the full model lookahead and window bounds are asserted per event.
    bool audit = false;

    // Record per-object committed key sequences in RunResult::traces
    // (memory-heavy; used by verification diffs).
    bool record_traces = false;

    // -- parallel engines ---------------------------------------------------
    int threads = 1;
    Placement placement = Placement::clustered;
    Homing homing = Homing::blocked;
    const Topology* topology = nullptr; // nullptr -> discover the host
    bool pin_threads = true;            // best effort; failures are ignored

    // -- speculative engine -------------------------------------------------
    std::uint32_t checkpoint_interval = 16;   // events between state snapshots
    std::uint64_t gvt_interval_events = 4096; // processed events between GVT rounds
    double claim_band = 0.0;                  // widen the front window for claims

    // -- test hooks ----------------------------------------------------------
    // Deliver each drained window in reverse key order; used to prove the
    // ordering audit catches a corrupted schedule.
    bool debug_unsorted_drain = false;
};

} // namespace tempo
