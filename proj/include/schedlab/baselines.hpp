#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "schedlab/env.hpp"
#include "schedlab/rng.hpp"
#include "schedlab/run_record.hpp"

namespace schedlab {

// A scheduling policy picks a flat action index from the current mask.
using PolicyFn = std::function<int(const Env&, const ActionMask&)>;

// Earliest-completion-time rule: over feasible (task, vm) pairs, place
// the pair finishing first; ties break on (task id, vm id).
inline int ect_action(const Env& env, const ActionMask& mask) {
    const SchedState& s = env.state();
    int best = -1;
    double best_comp = 0.0;
    for (int i = 0; i < mask.n_tasks; ++i)
        for (int m = 0; m < mask.n_vms; ++m) {
            if (!mask.at(i, m)) continue;
            const TaskSpec& t = s.dag->tasks[i];
            const VmTimeline& tl = s.timelines[m];
            double t_ready = std::max(s.parent_ready[i], s.clock);
            double comp = earliest_feasible_start(tl, t, t_ready) + t.length / tl.vm.speed;
            if (best < 0 || comp < best_comp) {
                best = mask.index(i, m);
                best_comp = comp;
            }
        }
    if (best < 0) throw std::logic_error("ect_action: empty feasible set");
    return best;
}

// Greedy marginal-active-energy rule; ties break on earlier completion,
// then (task id, vm id).
inline int energy_greedy_action(const Env& env, const ActionMask& mask) {
    const SchedState& s = env.state();
    int best = -1;
    double best_cost = 0.0, best_comp = 0.0;
    for (int i = 0; i < mask.n_tasks; ++i)
        for (int m = 0; m < mask.n_vms; ++m) {
            if (!mask.at(i, m)) continue;
            const TaskSpec& t = s.dag->tasks[i];
            const VmSpec& vm = s.cluster->vms[m];
            double dur = t.length / vm.speed;
            double cost = (vm.p_peak - vm.p_idle) * (double(t.cpu) / vm.cores) * dur;
            double t_ready = std::max(s.parent_ready[i], s.clock);
            double comp = earliest_feasible_start(s.timelines[m], t, t_ready) + dur;
            if (best < 0 || cost < best_cost || (cost == best_cost && comp < best_comp)) {
                best = mask.index(i, m);
                best_cost = cost;
                best_comp = comp;
            }
        }
    if (best < 0) throw std::logic_error("energy_greedy_action: empty feasible set");
    return best;
}

inline int random_action(const ActionMask& mask, Rng& rng) {
    int n = mask.count();
    if (n == 0) throw std::logic_error("random_action: empty feasible set");
    int pick = rng.uniform_int(0, n - 1);
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        if (mask.bits[i] && pick-- == 0) return static_cast<int>(i);
    throw std::logic_error("random_action: unreachable");
}

inline PolicyFn make_baseline(const std::string& name, std::uint64_t seed = 0) {
    if (name == "ect") return [](const Env& e, const ActionMask& m) { return ect_action(e, m); };
    if (name == "energy_greedy")
        return [](const Env& e, const ActionMask& m) { return energy_greedy_action(e, m); };
    if (name == "random") {
        auto rng = std::make_shared<Rng>(seed);
        return [rng](const Env&, const ActionMask& m) { return random_action(m, *rng); };
    }
    throw std::invalid_argument("unknown baseline policy: " + name);
}

// Drives one full episode and collects its metrics.
inline RunRecord run_episode(Env& env, const PolicyFn& policy) {
    env.reset();
    RunRecord rec;
    while (!env.state().terminal()) {
        ActionMask mask = env.mask();
        StepOutcome out = env.step_flat(policy(env, mask));
        rec.total_reward += out.reward;
        ++rec.n_decisions;
    }
    auto [mk, energy] = env.final_metrics();
    rec.makespan = mk;
    rec.active_energy = energy.active_total;
    rec.total_energy = energy.total;
    rec.delayed_decisions = env.delayed_decisions();
    return rec;
}

inline RunRecord run_baseline(std::shared_ptr<const WorkflowDag> dag,
                              std::shared_ptr<const Cluster> cluster, const std::string& policy,
                              std::uint64_t seed = 0, EnvOptions opts = {},
                              std::vector<DecisionRecord>* trace = nullptr) {
    Env env(std::move(dag), std::move(cluster), opts);
    RunRecord rec = run_episode(env, make_baseline(policy, seed));
    rec.policy_id = policy;
    rec.regime = to_string(env.state().cluster->regime);
    if (trace) *trace = env.trace();
    return rec;
}

}  // namespace schedlab
