#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "schedlab/policy_runner.hpp"

namespace schedlab::ppo {

struct PpoConfig {
    long total_timesteps = 2'000'000;
    int n_envs = 10;
    int steps_per_env = 256;  // batch 2560
    int minibatches = 4;
    int epochs = 4;
    double lr = 2.5e-4;
    double gamma = 0.99;
    double lam = 0.95;
    double clip = 0.2;
    double w_makespan = 1.0;
    double w_energy = 1.0;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    double max_grad_norm = 0.5;
    bool normalize_advantages = true;
    int hidden = 64;
    std::uint64_t seed = 0;
    long checkpoint_every = 100'000;
    double norm_stats_momentum = 0.1;
    int rollout_threads = 0;  // 0: one worker per hardware thread

    int batch() const { return n_envs * steps_per_env; }

    void validate() const {
        if (total_timesteps <= 0 || n_envs <= 0 || steps_per_env <= 0)
            throw std::invalid_argument("PpoConfig: nonpositive sizes");
        if (minibatches <= 0 || batch() % minibatches != 0)
            throw std::invalid_argument("PpoConfig: batch not divisible by minibatches");
        if (epochs <= 0) throw std::invalid_argument("PpoConfig: epochs must be positive");
        if (clip <= 0.0 || gamma <= 0.0 || gamma > 1.0 || lam < 0.0 || lam > 1.0)
            throw std::invalid_argument("PpoConfig: clip/gamma/lambda out of range");
        if (hidden <= 0) throw std::invalid_argument("PpoConfig: hidden must be positive");
    }
};

struct Transition {
    nn::ObsGraph obs;
    int action = -1;
    double log_prob = 0.0;
    double reward = 0.0;
    double value = 0.0;
    bool done = false;
};

struct RolloutBuffer {
    int n_envs = 0;
    int steps_per_env = 0;
    std::vector<Transition> steps;  // step-major: index t * n_envs + e
    std::vector<double> bootstrap_values;
    std::vector<double> advantages, returns;
    // episode statistics observed while collecting
    std::vector<double> episode_rewards, episode_makespans, episode_active_energies;

    int size() const { return n_envs * steps_per_env; }
    int idx(int t, int e) const { return t * n_envs + e; }
};

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_frac = 0.0;
};

struct TrainLogRow {
    long step = 0;
    double mean_ep_reward = 0.0;
    double mean_makespan = 0.0;
    double mean_active_energy = 0.0;
    UpdateStats update;
};

inline std::string train_log_header() {
    return "step,mean_ep_reward,mean_makespan,mean_active_energy,policy_loss,value_loss,"
           "entropy,kl,clip_frac\n";
}

inline std::string train_log_csv_row(const TrainLogRow& r) {
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step,
                  r.mean_ep_reward, r.mean_makespan, r.mean_active_energy,
                  r.update.policy_loss, r.update.value_loss, r.update.entropy,
                  r.update.approx_kl, r.update.clip_frac);
    return buf;
}

struct CheckpointInfo {
    long step = 0;
    nlohmann::json payload;
    double eval_makespan = 0.0;
    double eval_active_energy = 0.0;
};

// Standard recursive GAE; the definitional-sum oracle in the tests pins
// it down.
inline void compute_gae(RolloutBuffer& buf, double gamma, double lam) {
    const int T = buf.steps_per_env, n = buf.n_envs;
    buf.advantages.assign(buf.size(), 0.0);
    buf.returns.assign(buf.size(), 0.0);
    for (int e = 0; e < n; ++e) {
        double last_gae = 0.0;
        for (int t = T - 1; t >= 0; --t) {
            const Transition& tr = buf.steps[buf.idx(t, e)];
            double nonterminal = tr.done ? 0.0 : 1.0;
            double next_value =
                t + 1 < T ? buf.steps[buf.idx(t + 1, e)].value : buf.bootstrap_values[e];
            double delta = tr.reward + gamma * next_value * nonterminal - tr.value;
            last_gae = delta + gamma * lam * nonterminal * last_gae;
            buf.advantages[buf.idx(t, e)] = last_gae;
            buf.returns[buf.idx(t, e)] = last_gae + tr.value;
        }
    }
}

// Synchronous PPO over the queue-free scheduling environments. Each
// parallel environment cycles through the training workflow set; the
// updater is single-threaded and swaps in refreshed normalization
// statistics between iterations.
class Trainer {
  public:
    Trainer(PpoConfig cfg, std::vector<std::shared_ptr<const WorkflowDag>> train_dags,
            std::shared_ptr<const Cluster> cluster,
            std::vector<std::shared_ptr<const WorkflowDag>> eval_dags = {})
        : cfg_(cfg),
          dags_(std::move(train_dags)),
          eval_dags_(eval_dags.empty() ? dags_ : std::move(eval_dags)),
          cluster_(std::move(cluster)),
          net_(cfg.hidden, derive_seed(cfg.seed, "policy")),
          adam_(0, cfg.lr),
          shuffle_rng_(derive_seed(cfg.seed, "shuffle")) {
        cfg_.validate();
        if (dags_.empty()) throw std::invalid_argument("Trainer: no training workflows");
        adam_ = nn::Adam(net_.param_count(), cfg_.lr);
        env_opts_.w_makespan = cfg_.w_makespan;
        env_opts_.w_energy = cfg_.w_energy;
        for (int e = 0; e < cfg_.n_envs; ++e) {
            next_dag_.push_back(static_cast<int>(e % dags_.size()));
            envs_.push_back(std::make_unique<Env>(dags_[next_dag_[e]], cluster_, env_opts_));
            next_dag_[e] = static_cast<int>((next_dag_[e] + 1) % dags_.size());
            rngs_.emplace_back(derive_seed(cfg_.seed, "rollout", e));
        }
    }

    nn::PolicyNet& net() { return net_; }
    const PpoConfig& config() const { return cfg_; }

    RolloutBuffer collect_rollouts(int steps_per_env) {
        RolloutBuffer buf;
        buf.n_envs = cfg_.n_envs;
        buf.steps_per_env = steps_per_env;
        buf.steps.resize(buf.size());
        buf.bootstrap_values.assign(cfg_.n_envs, 0.0);

        struct EnvStats {
            std::vector<double> rewards, makespans, energies;
            double running_reward = 0.0;
        };
        std::vector<EnvStats> stats(cfg_.n_envs);

        auto roll_env = [&](int e, nn::Workspace& ws) {
            for (int t = 0; t < steps_per_env; ++t) {
                nn::ObsGraph obs = nn::extract_obs(envs_[e]->state());
                nn::PolicyOutput out = net_.forward(obs, ws);
                auto [action, logp] = nn::sample_action(out, rngs_[e]);
                StepOutcome step = envs_[e]->step_flat(action);
                Transition& tr = buf.steps[buf.idx(t, e)];
                tr.obs = std::move(obs);
                tr.action = action;
                tr.log_prob = logp;
                tr.reward = step.reward;
                tr.value = out.value;
                tr.done = step.done;
                stats[e].running_reward += step.reward;
                if (step.done) {
                    auto [mk, energy] = envs_[e]->final_metrics();
                    stats[e].rewards.push_back(stats[e].running_reward);
                    stats[e].makespans.push_back(mk);
                    stats[e].energies.push_back(energy.active_total);
                    stats[e].running_reward = 0.0;
                    envs_[e] = std::make_unique<Env>(dags_[next_dag_[e]], cluster_, env_opts_);
                    next_dag_[e] = static_cast<int>((next_dag_[e] + 1) % dags_.size());
                }
            }
            buf.bootstrap_values[e] =
                net_.forward(nn::extract_obs(envs_[e]->state()), ws).value;
        };

        int workers = cfg_.rollout_threads > 0
                          ? cfg_.rollout_threads
                          : static_cast<int>(std::thread::hardware_concurrency());
        workers = std::min(workers, cfg_.n_envs);
        if (workers > 1) {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w)
                pool.emplace_back([&, w] {
                    nn::Workspace ws;
                    for (int e = w; e < cfg_.n_envs; e += workers) roll_env(e, ws);
                });
            for (auto& th : pool) th.join();
        } else {
            nn::Workspace ws;
            for (int e = 0; e < cfg_.n_envs; ++e) roll_env(e, ws);
        }

        for (const auto& s : stats) {
            buf.episode_rewards.insert(buf.episode_rewards.end(), s.rewards.begin(),
                                       s.rewards.end());
            buf.episode_makespans.insert(buf.episode_makespans.end(), s.makespans.begin(),
                                         s.makespans.end());
            buf.episode_active_energies.insert(buf.episode_active_energies.end(),
                                               s.energies.begin(), s.energies.end());
        }
        return buf;
    }

    UpdateStats update(const RolloutBuffer& buf) {
        const int batch = buf.size();
        const int mb_size = batch / cfg_.minibatches;
        std::vector<int> order(batch);
        std::iota(order.begin(), order.end(), 0);

        UpdateStats agg;
        long minibatch_passes = 0;
        nn::GradVec grad(net_.param_count(), 0.0);
        nn::Workspace ws;
        std::vector<double> dlogits;

        for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), shuffle_rng_.engine());
            for (int start = 0; start < batch; start += mb_size) {
                double adv_mean = 0.0, adv_std = 1.0;
                if (cfg_.normalize_advantages) {
                    double sum = 0.0, sumsq = 0.0;
                    for (int k = start; k < start + mb_size; ++k) {
                        double a = buf.advantages[order[k]];
                        sum += a;
                        sumsq += a * a;
                    }
                    adv_mean = sum / mb_size;
                    adv_std = std::sqrt(std::max(0.0, sumsq / mb_size - adv_mean * adv_mean));
                }

                std::fill(grad.begin(), grad.end(), 0.0);
                UpdateStats mb;
                for (int k = start; k < start + mb_size; ++k) {
                    const Transition& tr = buf.steps[order[k]];
                    double adv = buf.advantages[order[k]];
                    if (cfg_.normalize_advantages) adv = (adv - adv_mean) / (adv_std + 1e-8);

                    nn::PolicyOutput out = net_.forward(tr.obs, ws);
                    double logp_new = out.log_probs[tr.action];
                    double logratio = logp_new - tr.log_prob;
                    double ratio = std::exp(logratio);

                    double surr1 = ratio * adv;
                    double surr2 = std::clamp(ratio, 1.0 - cfg_.clip, 1.0 + cfg_.clip) * adv;
                    double pg_loss = -std::min(surr1, surr2);

                    double ret = buf.returns[order[k]];
                    double v_err = out.value - ret;
                    double v_loss = 0.5 * v_err * v_err;

                    double entropy = 0.0;
                    for (std::size_t a = 0; a < out.probs.size(); ++a)
                        if (out.probs[a] > 0.0) entropy -= out.probs[a] * out.log_probs[a];

                    if (!std::isfinite(pg_loss) || !std::isfinite(v_loss) ||
                        !std::isfinite(entropy))
                        throw std::runtime_error(
                            "ppo update: non-finite loss (ratio=" + std::to_string(ratio) +
                            ", value=" + std::to_string(out.value) + ")");

                    mb.policy_loss += pg_loss;
                    mb.value_loss += v_loss;
                    mb.entropy += entropy;
                    mb.approx_kl += (ratio - 1.0) - logratio;
                    mb.clip_frac += std::abs(ratio - 1.0) > cfg_.clip ? 1.0 : 0.0;

                    // d(pg)/dlogp: only the unclipped branch carries gradient
                    double dlogp = surr1 <= surr2 ? -adv * ratio : 0.0;
                    double dvalue = cfg_.value_coef * v_err;
                    dlogits.assign(out.probs.size(), 0.0);
                    for (std::size_t a = 0; a < out.probs.size(); ++a) {
                        if (!tr.obs.mask.bits[a]) continue;
                        double d = dlogp * ((int(a) == tr.action ? 1.0 : 0.0) - out.probs[a]);
                        // entropy bonus: dH/dl_a = -p_a (logp_a + H)
                        d += cfg_.entropy_coef * out.probs[a] * (out.log_probs[a] + entropy);
                        dlogits[a] = d / mb_size;
                    }
                    net_.backward(tr.obs, ws, dlogits, dvalue / mb_size, grad);
                }

                double norm = nn::l2_norm(grad);
                if (norm > cfg_.max_grad_norm)
                    for (double& g : grad) g *= cfg_.max_grad_norm / norm;
                adam_.step(net_.params().values(), grad);

                agg.policy_loss += mb.policy_loss / mb_size;
                agg.value_loss += mb.value_loss / mb_size;
                agg.entropy += mb.entropy / mb_size;
                agg.approx_kl += mb.approx_kl / mb_size;
                agg.clip_frac += mb.clip_frac / mb_size;
                ++minibatch_passes;
            }
        }
        agg.policy_loss /= minibatch_passes;
        agg.value_loss /= minibatch_passes;
        agg.entropy /= minibatch_passes;
        agg.approx_kl /= minibatch_passes;
        agg.clip_frac /= minibatch_passes;
        return agg;
    }

    // Mean combined loss of the current policy on a fixed buffer, for
    // before/after comparisons.
    double surrogate_loss(const RolloutBuffer& buf) {
        nn::Workspace ws;
        double total = 0.0;
        double adv_mean = 0.0, adv_std = 1.0;
        if (cfg_.normalize_advantages) {
            double sum = 0.0, sumsq = 0.0;
            for (double a : buf.advantages) {
                sum += a;
                sumsq += a * a;
            }
            adv_mean = sum / buf.size();
            adv_std = std::sqrt(std::max(0.0, sumsq / buf.size() - adv_mean * adv_mean));
        }
        for (int k = 0; k < buf.size(); ++k) {
            const Transition& tr = buf.steps[k];
            double adv = buf.advantages[k];
            if (cfg_.normalize_advantages) adv = (adv - adv_mean) / (adv_std + 1e-8);
            nn::PolicyOutput out = net_.forward(tr.obs, ws);
            double ratio = std::exp(out.log_probs[tr.action] - tr.log_prob);
            double surr1 = ratio * adv;
            double surr2 = std::clamp(ratio, 1.0 - cfg_.clip, 1.0 + cfg_.clip) * adv;
            double v_err = out.value - buf.returns[k];
            double entropy = 0.0;
            for (std::size_t a = 0; a < out.probs.size(); ++a)
                if (out.probs[a] > 0.0) entropy -= out.probs[a] * out.log_probs[a];
            total += -std::min(surr1, surr2) + cfg_.value_coef * 0.5 * v_err * v_err -
                     cfg_.entropy_coef * entropy;
        }
        return total / buf.size();
    }

    // Full training run. Sinks receive per-iteration log rows and
    // checkpoints (every checkpoint_every steps plus the final one), each
    // checkpoint evaluated greedily on the evaluation workflows.
    void train(const std::function<void(const TrainLogRow&)>& log_sink = nullptr,
               const std::function<void(const CheckpointInfo&)>& checkpoint_sink = nullptr) {
        long global_step = 0;
        long next_checkpoint = cfg_.checkpoint_every;
        while (global_step < cfg_.total_timesteps) {
            RolloutBuffer buf = collect_rollouts(cfg_.steps_per_env);
            compute_gae(buf, cfg_.gamma, cfg_.lam);
            UpdateStats stats = update(buf);

            std::vector<const nn::ObsGraph*> batch_obs;
            batch_obs.reserve(buf.size());
            for (const Transition& tr : buf.steps) batch_obs.push_back(&tr.obs);
            net_.refresh_norm_stats(batch_obs, cfg_.norm_stats_momentum);

            global_step += buf.size();
            if (log_sink) {
                TrainLogRow row;
                row.step = global_step;
                row.update = stats;
                auto mean = [](const std::vector<double>& v) {
                    return v.empty() ? 0.0
                                     : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
                };
                row.mean_ep_reward = mean(buf.episode_rewards);
                row.mean_makespan = mean(buf.episode_makespans);
                row.mean_active_energy = mean(buf.episode_active_energies);
                log_sink(row);
            }
            bool final_iter = global_step >= cfg_.total_timesteps;
            if (checkpoint_sink && (global_step >= next_checkpoint || final_iter)) {
                while (next_checkpoint <= global_step) next_checkpoint += cfg_.checkpoint_every;
                checkpoint_sink(make_checkpoint(global_step));
            }
        }
    }

    CheckpointInfo make_checkpoint(long step) {
        CheckpointInfo info;
        info.step = step;
        info.payload = net_.checkpoint(step);
        double mk = 0.0, en = 0.0;
        EnvOptions eval_opts = env_opts_;
        eval_opts.compute_rewards = false;
        for (const auto& dag : eval_dags_) {
            Env env(dag, cluster_, eval_opts);
            RunRecord rec = run_policy_episode(net_, env, /*greedy=*/true);
            mk += rec.makespan;
            en += rec.active_energy;
        }
        info.eval_makespan = mk / eval_dags_.size();
        info.eval_active_energy = en / eval_dags_.size();
        return info;
    }

  private:
    PpoConfig cfg_;
    std::vector<std::shared_ptr<const WorkflowDag>> dags_;
    std::vector<std::shared_ptr<const WorkflowDag>> eval_dags_;
    std::shared_ptr<const Cluster> cluster_;
    EnvOptions env_opts_;
    nn::PolicyNet net_;
    nn::Adam adam_;
    Rng shuffle_rng_;
    std::vector<std::unique_ptr<Env>> envs_;
    std::vector<int> next_dag_;
    std::vector<Rng> rngs_;
};

}  // namespace schedlab::ppo
