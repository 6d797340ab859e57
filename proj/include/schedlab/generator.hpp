#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "schedlab/cluster.hpp"
#include "schedlab/rng.hpp"
#include "schedlab/workflow.hpp"

namespace schedlab {

struct GenParams {
    int n_tasks = 20;
    std::pair<int, int> depth_range = {2, 4};     // wide family: total levels
    std::pair<int, int> width_range = {2, 16};    // tasks per level
    double branch_prob = 0.25;                    // LongCP side-branch density
    std::pair<double, double> work_range = {100.0, 1000.0};
    std::pair<int, int> cpu_range = {1, 4};
    std::pair<double, double> mem_range = {1.0, 8.0};

    void validate() const {
        auto bad = [](auto r) { return r.second < r.first; };
        if (bad(depth_range) || bad(width_range) || bad(work_range) || bad(cpu_range) ||
            bad(mem_range))
            throw std::invalid_argument("GenParams: empty range");
        if (branch_prob < 0.0 || branch_prob > 1.0)
            throw std::invalid_argument("GenParams: branch_prob outside [0,1]");
        if (!(work_range.first > 0.0) || cpu_range.first < 1 || !(mem_range.first > 0.0))
            throw std::invalid_argument("GenParams: nonpositive demand range");
    }
};

namespace detail {

inline void fill_demands(TaskSpec& t, const GenParams& p, Rng& rng) {
    t.length = rng.uniform(p.work_range.first, p.work_range.second);
    t.cpu = rng.uniform_int(p.cpu_range.first, p.cpu_range.second);
    t.mem = rng.uniform(p.mem_range.first, p.mem_range.second);
}

inline WorkflowDag build_wide(const GenParams& p, Rng& rng) {
    const int n = p.n_tasks;
    int depth = std::clamp((n + 7) / 8, p.depth_range.first, p.depth_range.second);
    int min_w = std::max(2, p.width_range.first);
    while (depth > 1 && depth * min_w > n) --depth;
    while (depth < p.depth_range.second && depth * p.width_range.second < n) ++depth;

    std::vector<int> widths(depth, n / depth);
    for (int i = 0; i < n % depth; ++i) ++widths[i];
    for (int round = 0; round < depth; ++round) {  // mild width jitter
        int from = rng.uniform_int(0, depth - 1);
        int to = rng.uniform_int(0, depth - 1);
        if (widths[from] > min_w && widths[to] < p.width_range.second) {
            --widths[from];
            ++widths[to];
        }
    }

    WorkflowDag dag;
    std::vector<std::vector<int>> level_ids(depth);
    int next_id = 0;
    for (int l = 0; l < depth; ++l)
        for (int k = 0; k < widths[l]; ++k) {
            TaskSpec t;
            t.id = next_id++;
            fill_demands(t, p, rng);
            level_ids[l].push_back(t.id);
            dag.tasks.push_back(std::move(t));
        }
    // each task pulls 1-3 parents from the previous level, so levelization
    // reproduces the construction exactly
    for (int l = 1; l < depth; ++l) {
        for (int id : level_ids[l]) {
            int avail = static_cast<int>(level_ids[l - 1].size());
            int k = rng.uniform_int(1, std::min(3, avail));
            std::vector<int> pool = level_ids[l - 1];
            for (int j = 0; j < k; ++j) {
                int pick = rng.uniform_int(0, static_cast<int>(pool.size()) - 1);
                dag.edges.emplace_back(pool[pick], id);
                pool.erase(pool.begin() + pick);
            }
        }
    }
    return dag;
}

inline WorkflowDag build_longcp(const GenParams& p, Rng& rng) {
    const int n = p.n_tasks;
    int n_branches = std::min(static_cast<int>(std::floor(p.branch_prob * n + 0.5)),
                              static_cast<int>(std::floor(0.4 * n)));
    int backbone = n - n_branches;

    WorkflowDag dag;
    for (int i = 0; i < n; ++i) {
        TaskSpec t;
        t.id = i;
        fill_demands(t, p, rng);
        dag.tasks.push_back(std::move(t));
    }
    for (int i = 0; i + 1 < backbone; ++i) dag.edges.emplace_back(i, i + 1);
    // side branches are single light tasks so the backbone stays critical
    double lo = p.work_range.first;
    double hi = lo + 0.45 * (p.work_range.second - lo);
    for (int b = backbone; b < n; ++b) {
        dag.tasks[b].length = rng.uniform(lo, hi);
        int parent = rng.uniform_int(0, std::max(0, backbone - 2));
        dag.edges.emplace_back(parent, b);
    }
    return dag;
}

}  // namespace detail

// Shallow, high-parallelism family: depth <= depth_range.max and
// parallelism index Phi >= 2, retried over derived sub-seeds.
inline WorkflowDag generate_wide(const GenParams& params, std::uint64_t seed) {
    params.validate();
    if (params.n_tasks < 4)
        throw std::invalid_argument("generate_wide: need >= 4 tasks for a wide DAG");
    if (params.depth_range.second * params.width_range.second < params.n_tasks)
        throw std::invalid_argument(
            "generate_wide: depth_range x width_range cannot hold n_tasks");
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        Rng rng(derive_seed(seed, "gen/wide", attempt));
        WorkflowDag dag = detail::build_wide(params, rng);
        DagMetrics m = dag_metrics(dag);
        double mean_width = static_cast<double>(dag.size()) / m.depth;
        if (m.phi >= 2.0 && m.depth <= params.depth_range.second &&
            mean_width >= params.width_range.first)
            return dag;
    }
    throw std::runtime_error("generate_wide: could not meet Phi >= 2 within retry budget");
}

// Deep-chain family: a backbone of >= 0.6 * n tasks with light side
// branches, Phi <= 1.5.
inline WorkflowDag generate_longcp(const GenParams& params, std::uint64_t seed) {
    params.validate();
    if (params.n_tasks < 2)
        throw std::invalid_argument("generate_longcp: need >= 2 tasks");
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        Rng rng(derive_seed(seed, "gen/longcp", attempt));
        WorkflowDag dag = detail::build_longcp(params, rng);
        DagMetrics m = dag_metrics(dag);
        if (m.phi <= 1.5 && m.depth >= (params.n_tasks * 3 + 4) / 5) return dag;
    }
    throw std::runtime_error("generate_longcp: could not meet Phi <= 1.5 within retry budget");
}

// Peak-concurrency demand of the "ideal" schedule where every task runs
// [parent_ready, parent_ready + L_i) at unit speed. Speed scaling leaves
// the overlap structure unchanged when speeds are homogeneous.
struct ConcurrencyPeak {
    int cpu = 0;
    double mem = 0.0;
};

inline ConcurrencyPeak ideal_concurrency_peak(const WorkflowDag& dag) {
    auto order_opt = detail::topo_order(dag);
    if (!order_opt) throw std::invalid_argument("ideal_concurrency_peak: cyclic dag");
    const std::vector<int>& order = *order_opt;
    auto parents = dag.parents();
    std::vector<double> end(dag.size(), 0.0);
    struct Ev {
        double t;
        int dc;
        double dm;
        bool release;
    };
    std::vector<Ev> evs;
    for (int u : order) {
        double start = 0.0;
        for (int p : parents[u]) start = std::max(start, end[p]);
        end[u] = start + dag.tasks[u].length;
        evs.push_back({start, dag.tasks[u].cpu, dag.tasks[u].mem, false});
        evs.push_back({end[u], -dag.tasks[u].cpu, -dag.tasks[u].mem, true});
    }
    std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.release && !b.release;
    });
    ConcurrencyPeak peak;
    int cpu = 0;
    double mem = 0.0;
    for (const Ev& e : evs) {
        cpu += e.dc;
        mem += e.dm;
        peak.cpu = std::max(peak.cpu, cpu);
        peak.mem = std::max(peak.mem, mem);
    }
    return peak;
}

inline constexpr double kQueueFreeTol = 1e-9;

// Queue-free check at every level (the peak level is the binding one).
inline std::optional<std::string> queue_free_violation(const WorkflowDag& dag,
                                                       const std::vector<VmSpec>& vms) {
    Cluster c{HostRegime::HS, vms};
    std::vector<int> level = task_levels(dag);
    int depth = 1 + *std::max_element(level.begin(), level.end());
    std::vector<int> cpu(depth, 0);
    std::vector<double> mem(depth, 0.0);
    for (const TaskSpec& t : dag.tasks) {
        cpu[level[t.id]] += t.cpu;
        mem[level[t.id]] += t.mem;
        if (t.cpu > c.min_cores() || t.mem > c.min_mem() + kQueueFreeTol)
            return "task " + std::to_string(t.id) + " does not fit on the smallest VM";
    }
    for (int l = 0; l < depth; ++l) {
        if (cpu[l] > c.total_cores())
            return "level " + std::to_string(l) + " cpu demand exceeds aggregate cores";
        if (mem[l] > c.total_mem() + kQueueFreeTol)
            return "level " + std::to_string(l) + " mem demand exceeds aggregate memory";
    }
    return std::nullopt;
}

// Scales task demands multiplicatively so every level's aggregate demand
// fits aggregate cluster capacity (cpu floored to >= 1). With
// `concurrency_margin` the scaling additionally leaves enough headroom
// that no task is ever delayed by fragmentation under homogeneous speeds:
//   sum(cores) >= peak_concurrent_cpu + (M - 1) * max task cpu
// and the memory analogue. Instances that cannot fit even at cpu = 1 are
// rejected.
inline WorkflowDag enforce_queue_free(const WorkflowDag& dag, const std::vector<VmSpec>& vms,
                                      bool concurrency_margin = false) {
    if (vms.empty()) throw std::invalid_argument("enforce_queue_free: empty cluster");
    Cluster c{HostRegime::HS, vms};
    const int m = c.size();

    std::vector<int> level = task_levels(dag);
    int depth = 1 + *std::max_element(level.begin(), level.end());

    auto fits = [&](const WorkflowDag& d) {
        if (queue_free_violation(d, vms)) return false;
        if (!concurrency_margin) return true;
        ConcurrencyPeak peak = ideal_concurrency_peak(d);
        int max_cpu = 0;
        double max_mem = 0.0;
        for (const TaskSpec& t : d.tasks) {
            max_cpu = std::max(max_cpu, t.cpu);
            max_mem = std::max(max_mem, t.mem);
        }
        return peak.cpu + (m - 1) * max_cpu <= c.total_cores() &&
               peak.mem + (m - 1) * max_mem <= c.total_mem() + kQueueFreeTol;
    };
    if (fits(dag)) return dag;

    // linear bounds give the starting factors; flooring may lift cpu back
    // up, so verify and back off geometrically
    std::vector<int> lvl_cpu(depth, 0);
    std::vector<double> lvl_mem(depth, 0.0);
    int max_cpu = 0;
    double max_mem = 0.0;
    for (const TaskSpec& t : dag.tasks) {
        lvl_cpu[level[t.id]] += t.cpu;
        lvl_mem[level[t.id]] += t.mem;
        max_cpu = std::max(max_cpu, t.cpu);
        max_mem = std::max(max_mem, t.mem);
    }
    double f_cpu = 1.0, f_mem = 1.0;
    for (int l = 0; l < depth; ++l) {
        if (lvl_cpu[l] > 0) f_cpu = std::min(f_cpu, double(c.total_cores()) / lvl_cpu[l]);
        if (lvl_mem[l] > 0) f_mem = std::min(f_mem, c.total_mem() / lvl_mem[l]);
    }
    f_cpu = std::min(f_cpu, double(c.min_cores()) / max_cpu);
    f_mem = std::min(f_mem, c.min_mem() / max_mem);
    if (concurrency_margin) {
        ConcurrencyPeak peak = ideal_concurrency_peak(dag);
        f_cpu = std::min(f_cpu, double(c.total_cores()) / (peak.cpu + (m - 1) * max_cpu));
        f_mem = std::min(f_mem, c.total_mem() / (peak.mem + (m - 1) * max_mem));
    }
    f_mem *= 1.0 - 1e-12;  // stay strictly inside the real-valued bounds

    for (int iter = 0; iter < 200; ++iter) {
        WorkflowDag scaled = dag;
        bool all_at_floor = true;
        for (TaskSpec& t : scaled.tasks) {
            t.cpu = std::max(1, static_cast<int>(std::floor(f_cpu * t.cpu)));
            t.mem = f_mem * t.mem;
            if (t.cpu > 1) all_at_floor = false;
        }
        if (fits(scaled)) return scaled;
        if (all_at_floor && f_mem < 1e-6)
            break;
        f_cpu *= 0.9;
        f_mem *= 0.9;
    }
    throw std::runtime_error("enforce_queue_free: instance cannot satisfy the capacity bound");
}

// Generation pipeline used by the CLI and benchmarks: draw a family
// member, then scale demands with the concurrency margin on.
inline WorkflowDag make_instance(const std::string& family, const GenParams& params,
                                 std::uint64_t seed, const std::vector<VmSpec>& vms) {
    WorkflowDag dag = family == "wide" ? generate_wide(params, seed)
                                       : generate_longcp(params, seed);
    return enforce_queue_free(dag, vms, /*concurrency_margin=*/true);
}

}  // namespace schedlab
