#include "tempo/topology.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#ifdef __linux__
#include <pthread.h>
#include <sched.h>
#endif

namespace tempo {

namespace {

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int read_int(const std::filesystem::path& p, int fallback) {
    std::string s = read_text(p);
    if (s.empty()) return fallback;
    try {
        return std::stoi(s);
    } catch (const std::exception&) {
        return fallback;
    }
}

} // namespace

std::vector<int> parse_cpu_list(const std::string& text) {
    std::vector<int> out;
    std::string token;
    std::istringstream ss(text);
    while (std::getline(ss, token, ',')) {
        // Trim whitespace (the kernel file ends with a newline).
        const auto a = token.find_first_not_of(" \t\n\r");
        if (a == std::string::npos) continue;
        const auto b = token.find_last_not_of(" \t\n\r");
        token = token.substr(a, b - a + 1);
        const auto dash = token.find('-');
        try {
            if (dash == std::string::npos) {
                out.push_back(std::stoi(token));
            } else {
                const int lo = std::stoi(token.substr(0, dash));
                const int hi = std::stoi(token.substr(dash + 1));
                if (hi < lo) throw ConfigError("descending range in cpu list: " + token);
                for (int c = lo; c <= hi; ++c) out.push_back(c);
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("malformed cpu list token: " + token);
        } catch (const std::out_of_range&) {
            throw ConfigError("cpu id out of range in token: " + token);
        }
    }
    return out;
}

Topology::Topology(std::vector<CpuSlot> cpus) : cpus_(std::move(cpus)) {
    if (cpus_.empty()) throw ConfigError("topology must contain at least one cpu");
    std::sort(cpus_.begin(), cpus_.end(),
              [](const CpuSlot& a, const CpuSlot& b) { return a.cpu < b.cpu; });
    for (std::size_t i = 1; i < cpus_.size(); ++i) {
        if (cpus_[i].cpu == cpus_[i - 1].cpu) {
            throw ConfigError("duplicate cpu id in topology: " + std::to_string(cpus_[i].cpu));
        }
    }
    // Renumber nodes densely, preserving ascending original ids.
    std::map<int, int> remap;
    for (const auto& c : cpus_) remap.emplace(c.node, 0);
    int next = 0;
    for (auto& [orig, dense] : remap) dense = next++;
    for (auto& c : cpus_) c.node = remap[c.node];
    node_count_ = next;
}

Topology Topology::flat(int ncpus) {
    if (ncpus <= 0) throw ConfigError("topology must contain at least one cpu");
    std::vector<CpuSlot> cpus(static_cast<std::size_t>(ncpus));
    for (int i = 0; i < ncpus; ++i) cpus[static_cast<std::size_t>(i)] = CpuSlot{i, 0, i};
    return Topology(std::move(cpus));
}

Topology Topology::discover() {
    namespace fs = std::filesystem;
    const fs::path root("/sys/devices/system/node");
    std::error_code ec;
    std::vector<CpuSlot> cpus;
    if (fs::is_directory(root, ec)) {
        for (const auto& entry : fs::directory_iterator(root, ec)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("node", 0) != 0) continue;
            int node = -1;
            try {
                node = std::stoi(name.substr(4));
            } catch (const std::exception&) {
                continue;
            }
            const std::string list = read_text(entry.path() / "cpulist");
            if (list.empty()) continue;
            for (int cpu : parse_cpu_list(list)) {
                const fs::path core_file = fs::path("/sys/devices/system/cpu") /
                                           ("cpu" + std::to_string(cpu)) / "topology" /
                                           "core_id";
                // Make core ids globally unique by folding the node in.
                const int core_local = read_int(core_file, cpu);
                cpus.push_back(CpuSlot{cpu, node, node * 100000 + core_local});
            }
        }
    }
    if (cpus.empty()) {
        const unsigned hc = std::thread::hardware_concurrency();
        return flat(hc == 0 ? 1 : static_cast<int>(hc));
    }
    return Topology(std::move(cpus));
}

Topology Topology::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("topology file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("cpus") || !j["cpus"].is_array()) {
        throw ConfigError("topology JSON must be an object with a \"cpus\" array");
    }
    std::vector<CpuSlot> cpus;
    for (const auto& e : j["cpus"]) {
        if (!e.is_object() || !e.contains("cpu") || !e.contains("node") || !e.contains("core")) {
            throw ConfigError("each cpu entry needs \"cpu\", \"node\" and \"core\" fields");
        }
        try {
            cpus.push_back(CpuSlot{e.at("cpu").get<int>(), e.at("node").get<int>(),
                                   e.at("core").get<int>()});
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError(std::string("bad cpu entry in topology JSON: ") + ex.what());
        }
    }
    return Topology(std::move(cpus));
}

Topology Topology::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open topology file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string Topology::to_json_text() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : cpus_) {
        arr.push_back({{"cpu", c.cpu}, {"node", c.node}, {"core", c.core}});
    }
    nlohmann::json j{{"cpus", arr}};
    return j.dump(2) + "\n";
}

void Topology::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write topology file: " + path);
    out << to_json_text();
    if (!out) throw ConfigError("failed writing topology file: " + path);
}

std::vector<CpuSlot> Topology::cpus_on_node(int node) const {
    std::vector<CpuSlot> out;
    for (const auto& c : cpus_) {
        if (c.node == node) out.push_back(c);
    }
    return out;
}

namespace {

// Within one node: distinct physical cores first (ascending core id), then
// second SMT siblings, and so on. Deterministic for a given topology.
std::vector<CpuSlot> node_pick_order(std::vector<CpuSlot> node_cpus) {
    std::sort(node_cpus.begin(), node_cpus.end(),
              [](const CpuSlot& a, const CpuSlot& b) { return a.cpu < b.cpu; });
    std::map<int, int> sibling_rank; // core id -> cpus already taken from it
    std::vector<std::pair<std::pair<int, int>, CpuSlot>> keyed;
    keyed.reserve(node_cpus.size());
    for (const auto& c : node_cpus) {
        keyed.push_back({{sibling_rank[c.core]++, c.cpu}, c});
    }
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<CpuSlot> out;
    out.reserve(keyed.size());
    for (const auto& [k, c] : keyed) out.push_back(c);
    return out;
}

} // namespace

std::vector<CpuSlot> plan_affinity(const Topology& topo, Placement policy, int nthreads) {
    if (nthreads <= 0) throw ConfigError("thread count must be positive");
    std::vector<std::vector<CpuSlot>> per_node;
    for (int n = 0; n < topo.node_count(); ++n) {
        per_node.push_back(node_pick_order(topo.cpus_on_node(n)));
    }

    std::vector<CpuSlot> cycle;
    if (policy == Placement::clustered) {
        for (const auto& node : per_node) cycle.insert(cycle.end(), node.begin(), node.end());
    } else {
        std::vector<std::size_t> idx(per_node.size(), 0);
        for (std::size_t taken = 0; taken < static_cast<std::size_t>(topo.cpu_count());) {
            for (std::size_t n = 0; n < per_node.size(); ++n) {
                if (idx[n] < per_node[n].size()) {
                    cycle.push_back(per_node[n][idx[n]++]);
                    ++taken;
                }
            }
        }
    }

    std::vector<CpuSlot> out;
    out.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) {
        out.push_back(cycle[static_cast<std::size_t>(t) % cycle.size()]);
    }
    return out;
}

std::vector<std::uint32_t> home_objects(std::size_t nobjects, std::size_t nthreads,
                                        Homing policy) {
    if (nthreads == 0) throw ConfigError("thread count must be positive");
    std::vector<std::uint32_t> home(nobjects);
    for (std::size_t o = 0; o < nobjects; ++o) {
        home[o] = policy == Homing::blocked
                      ? static_cast<std::uint32_t>(o * nthreads / nobjects)
                      : static_cast<std::uint32_t>(o % nthreads);
    }
    return home;
}

bool pin_current_thread(int cpu) {
#ifdef __linux__
    cpu_set_t set;
    CPU_ZERO(&set);
    if (cpu < 0 || cpu >= CPU_SETSIZE) return false;
    CPU_SET(cpu, &set);
    return pthread_setaffinity_np(pthread_self(), sizeof(set), &set) == 0;
#else
    (void)cpu;
    return false;
#endif
}

} // namespace tempo
