#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "schedlab/state.hpp"

namespace schedlab {

struct SimPlacement {
    int task = -1;
    int vm = -1;
    double start = 0.0;
    double end = 0.0;
};

// A feasible completion of the workflow and the objective value it
// attains. The schedule covers the simulated (not yet assigned) tasks.
struct Estimate {
    double value = 0.0;
    std::vector<SimPlacement> schedule;
};

namespace detail {

enum class GreedyObjective { Makespan, Energy };

// Shared greedy completion loop: walk unscheduled tasks in (ready time,
// id) order and place each at its earliest feasible start on the VM the
// objective prefers. Simulation happens on cloned timelines; the live
// state is never touched.
inline Estimate greedy_completion(const SchedState& s, GreedyObjective objective) {
    const WorkflowDag& dag = *s.dag;
    const int n = s.n_tasks();
    const int m = s.n_vms();
    auto parents = dag.parents();

    std::vector<VmTimeline> sim = s.timelines;
    std::vector<double> done_at(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<bool> placed(n, false);
    int n_remaining = 0;
    for (int i = 0; i < n; ++i) {
        if (s.assigned(i)) {
            done_at[i] = s.completion[i];
            placed[i] = true;
        } else {
            ++n_remaining;
        }
    }

    Estimate est;
    for (int round = 0; round < n_remaining; ++round) {
        int pick = -1;
        double pick_ready = 0.0;
        for (int i = 0; i < n; ++i) {
            if (placed[i]) continue;
            double ready = s.clock;
            bool parents_done = true;
            for (int p : parents[i]) {
                if (!placed[p]) {
                    parents_done = false;
                    break;
                }
                ready = std::max(ready, done_at[p]);
            }
            if (!parents_done) continue;
            if (pick < 0 || ready < pick_ready) {
                pick = i;
                pick_ready = ready;
            }
        }
        if (pick < 0)
            throw std::logic_error("greedy_completion: no schedulable task (cyclic dag?)");
        const TaskSpec& t = dag.tasks[pick];

        int best_vm = -1;
        double best_start = 0.0, best_comp = 0.0, best_cost = 0.0;
        for (int v = 0; v < m; ++v) {
            const VmSpec& vm = sim[v].vm;
            if (!t.compatible_with(vm.id) || t.cpu > vm.cores || t.mem > vm.mem + kTimeTol)
                continue;
            double dur = t.length / vm.speed;
            double start = earliest_feasible_start(sim[v], t.cpu, t.mem, dur, pick_ready);
            double comp = start + dur;
            double cost;
            if (objective == GreedyObjective::Makespan) {
                cost = comp;
            } else {
                // marginal active energy of running t on v, ignoring idle draw
                cost = (vm.p_peak - vm.p_idle) * (double(t.cpu) / vm.cores) * dur;
            }
            bool better = best_vm < 0 || cost < best_cost ||
                          (cost == best_cost && comp < best_comp);
            if (better) {
                best_vm = v;
                best_start = start;
                best_comp = comp;
                best_cost = cost;
            }
        }
        if (best_vm < 0)
            throw std::logic_error("greedy_completion: task " + std::to_string(pick) +
                                   " fits no VM");
        place_task(sim[best_vm], t, best_start);
        done_at[pick] = best_comp;
        placed[pick] = true;
        est.schedule.push_back({pick, best_vm, best_start, best_comp});
    }

    double horizon = 0.0;
    for (int i = 0; i < n; ++i) horizon = std::max(horizon, done_at[i]);
    if (objective == GreedyObjective::Makespan)
        est.value = horizon;
    else
        est.value = integrate_energy(sim, horizon).active_total;
    return est;
}

}  // namespace detail

// ECT completion: each remaining task goes to the compatible VM that
// finishes it earliest. At terminal states this is just the realized
// makespan, which makes the reward telescope exactly.
inline Estimate estimate_makespan(const SchedState& s) {
    return detail::greedy_completion(s, detail::GreedyObjective::Makespan);
}

// Energy-greedy completion, same task order, VM chosen by marginal active
// energy (p_peak - p_idle) * (cpu / cores) * (L / s), completion-time
// then vm-id tie-break.
inline Estimate estimate_energy(const SchedState& s) {
    return detail::greedy_completion(s, detail::GreedyObjective::Energy);
}

}  // namespace schedlab
