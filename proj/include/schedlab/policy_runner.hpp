#pragma once

#include "schedlab/baselines.hpp"
#include "schedlab/nn/policy.hpp"

namespace schedlab {

// Adapts a policy network to the generic episode-driver interface.
inline PolicyFn make_net_policy(std::shared_ptr<const nn::PolicyNet> net, bool greedy = true,
                                std::uint64_t sample_seed = 0) {
    auto ws = std::make_shared<nn::Workspace>();
    auto rng = std::make_shared<Rng>(sample_seed);
    return [net, ws, rng, greedy](const Env& env, const ActionMask&) {
        nn::PolicyOutput out = net->forward(nn::extract_obs(env.state()), *ws);
        return greedy ? nn::greedy_action(out) : nn::sample_action(out, *rng).first;
    };
}

// Drives one episode with a policy network, greedy or sampled.
inline RunRecord run_policy_episode(const nn::PolicyNet& net, Env& env, bool greedy,
                                    Rng* rng = nullptr) {
    env.reset();
    nn::Workspace ws;
    RunRecord rec;
    while (!env.state().terminal()) {
        nn::ObsGraph obs = nn::extract_obs(env.state());
        nn::PolicyOutput out = net.forward(obs, ws);
        int action = greedy ? nn::greedy_action(out) : nn::sample_action(out, *rng).first;
        StepOutcome step = env.step_flat(action);
        rec.total_reward += step.reward;
        ++rec.n_decisions;
    }
    auto [mk, energy] = env.final_metrics();
    rec.makespan = mk;
    rec.active_energy = energy.active_total;
    rec.total_energy = energy.total;
    rec.delayed_decisions = env.delayed_decisions();
    rec.regime = to_string(env.state().cluster->regime);
    return rec;
}

}  // namespace schedlab
