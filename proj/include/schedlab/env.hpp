#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "schedlab/heuristics.hpp"
#include "schedlab/state.hpp"

namespace schedlab {

struct EnvOptions {
    double w_makespan = 1.0;  // w_T
    double w_energy = 1.0;    // w_E
    double reward_eps = 1e-6;
    bool compute_rewards = true;   // evaluation runs can skip the estimators
    bool require_queue_free = true;
};

struct StepOutcome {
    double reward = 0.0;
    bool done = false;
    double delta_mk = 0.0;
    double delta_en = 0.0;
    double t_hat_before = 0.0, t_hat_after = 0.0;
    double e_hat_before = 0.0, e_hat_after = 0.0;
};

struct DecisionRecord {
    int k = 0;
    double clock = 0.0;
    int task = -1;
    int vm = -1;
    double start = 0.0;
    double completion = 0.0;
    double reward = 0.0;
    double delta_mk = 0.0;
    double delta_en = 0.0;
};

// One finite-horizon scheduling episode: |V| decisions, deterministic
// transitions, per-decision rewards from normalized reductions of the
// greedy cost-to-go estimates.
class Env {
  public:
    Env(std::shared_ptr<const WorkflowDag> dag, std::shared_ptr<const Cluster> cluster,
        EnvOptions opts = {})
        : dag_(std::move(dag)), cluster_(std::move(cluster)), opts_(opts) {
        reset();
    }

    void reset() {
        state_ = reset_state(dag_, cluster_, opts_.require_queue_free);
        trace_.clear();
        delayed_decisions_ = 0;
        state_.t_hat = estimate_makespan(state_).value;
        state_.t_hat0 = state_.t_hat;
        state_.e_hat = opts_.compute_rewards
                           ? estimate_energy(state_).value
                           : std::numeric_limits<double>::quiet_NaN();
    }

    const SchedState& state() const { return state_; }
    const std::vector<DecisionRecord>& trace() const { return trace_; }
    int delayed_decisions() const { return delayed_decisions_; }

    ActionMask mask() const { return feasible_actions(state_); }

    StepOutcome step(int task, int vm) {
        StepOutcome out;
        out.t_hat_before = state_.t_hat;
        out.e_hat_before = state_.e_hat;
        double clock_before = state_.clock;

        apply_action(state_, task, vm);
        if (state_.start[task] > std::max(state_.parent_ready[task], clock_before) + kTimeTol)
            ++delayed_decisions_;

        out.done = state_.terminal();
        if (opts_.compute_rewards) {
            out.t_hat_after = estimate_makespan(state_).value;
            out.e_hat_after = estimate_energy(state_).value;
            out.delta_mk = -(out.t_hat_after - out.t_hat_before) /
                           std::max(out.t_hat_after, opts_.reward_eps);
            out.delta_en = -(out.e_hat_after - out.e_hat_before) /
                           std::max(out.e_hat_after, opts_.reward_eps);
            out.reward = opts_.w_makespan * out.delta_mk + opts_.w_energy * out.delta_en;
            state_.t_hat = out.t_hat_after;
            state_.e_hat = out.e_hat_after;
        }

        trace_.push_back({state_.step_index - 1, clock_before, task, vm, state_.start[task],
                          state_.completion[task], out.reward, out.delta_mk, out.delta_en});
        return out;
    }

    StepOutcome step_flat(int flat_action) {
        return step(flat_action / state_.n_vms(), flat_action % state_.n_vms());
    }

    std::pair<double, EnergyReport> final_metrics() const {
        double mk = realized_makespan(state_);
        return {mk, integrate_energy(state_.timelines, mk)};
    }

  private:
    std::shared_ptr<const WorkflowDag> dag_;
    std::shared_ptr<const Cluster> cluster_;
    EnvOptions opts_;
    SchedState state_;
    std::vector<DecisionRecord> trace_;
    int delayed_decisions_ = 0;
};

// One JSONL line per decision.
inline std::string trace_jsonl(const std::vector<DecisionRecord>& trace) {
    std::string out;
    for (const DecisionRecord& d : trace) {
        nlohmann::json j;
        j["k"] = d.k;
        j["clock"] = d.clock;
        j["task"] = d.task;
        j["vm"] = d.vm;
        j["start"] = d.start;
        j["completion"] = d.completion;
        j["reward"] = d.reward;
        j["delta_mk"] = d.delta_mk;
        j["delta_en"] = d.delta_en;
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace schedlab
