#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tempo/errors.hpp"

namespace tempo {

// One schedulable hardware thread. `core` identifies the physical core
// (globally unique), so SMT siblings share a core id but not a cpu id.
struct CpuSlot {
    int cpu = 0;
    int node = 0;
    int core = 0;

    friend bool operator==(const CpuSlot&, const CpuSlot&) = default;
};

// Expand a kernel cpulist string such as "0-2,5,7-8" into explicit cpu ids.
std::vector<int> parse_cpu_list(const std::string& text);

// Machine layout: which cpu lives on which memory node and physical core.
class Topology {
public:
    // Single-node layout with one cpu per core; the no-information fallback.
    static Topology flat(int ncpus);

    // Read the layout from /sys; falls back to flat() when unavailable.
    static Topology discover();

    static Topology from_json_text(const std::string& text);
    static Topology load_file(const std::string& path);
    void save_file(const std::string& path) const;
    [[nodiscard]] std::string to_json_text() const;

    [[nodiscard]] int node_count() const { return node_count_; }
    [[nodiscard]] int cpu_count() const { return static_cast<int>(cpus_.size()); }
    [[nodiscard]] const std::vector<CpuSlot>& cpus() const { return cpus_; }
    [[nodiscard]] std::vector<CpuSlot> cpus_on_node(int node) const;

private:
    explicit Topology(std::vector<CpuSlot> cpus);
    std::vector<CpuSlot> cpus_; // sorted by cpu id, node ids densely renumbered
    int node_count_ = 0;
};

// Thread-to-cpu assignment order.
//  clustered: fill one node completely before spilling to the next.
//  circular:  deal threads round-robin across nodes.
// Within a node both policies use distinct physical cores before SMT
// siblings, lowest cpu id first. More threads than cpus wraps around.
enum class Placement { clustered, circular };

std::vector<CpuSlot> plan_affinity(const Topology& topo, Placement policy, int nthreads);

// Object-to-thread ownership map (drives first-touch memory placement).
//  blocked: equal contiguous slices, object o -> thread floor(o*T/N).
//  modulo:  object o -> thread o mod T.
enum class Homing { blocked, modulo };

std::vector<std::uint32_t> home_objects(std::size_t nobjects, std::size_t nthreads,
                                        Homing policy);

// Pin the calling thread to one cpu. Returns false when pinning is
// unsupported or rejected; callers treat that as advisory-only.
bool pin_current_thread(int cpu);

} // namespace tempo
