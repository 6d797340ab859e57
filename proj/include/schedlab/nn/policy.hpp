#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "schedlab/nn/tensor.hpp"
#include "schedlab/state.hpp"

namespace schedlab::nn {

inline constexpr int kTaskFeatures = 6;
inline constexpr int kVmFeatures = 12;
inline constexpr double kMaskPenalty = 1e9;
inline constexpr double kNormEps = 1e-5;

// Structured observation: one node per task and per VM, dependency edges
// between tasks, compatibility edges between tasks and VMs, and the
// feasibility mask over the flattened task x vm action matrix.
struct ObsGraph {
    int n_tasks = 0;
    int n_vms = 0;
    Matv task_feats;  // n_tasks x 6
    Matv vm_feats;    // n_vms x 12
    std::vector<std::pair<int, int>> dep_edges;     // (parent, child) task indices
    std::vector<std::pair<int, int>> compat_edges;  // (task, vm)
    ActionMask mask;
};

namespace detail {

inline double mem_used_at(const VmTimeline& tl, double t) {
    double used = 0.0;
    for (const Placement& p : tl.placements)
        if (p.start <= t && t < p.end) used += p.mem;
    return used;
}

inline int cores_used_at(const VmTimeline& tl, double t) {
    int used = 0;
    for (const Placement& p : tl.placements)
        if (p.start <= t && t < p.end) used += p.cpu;
    return used;
}

}  // namespace detail

// Builds the observation from the live state. Times and work are scaled
// by the reset-time makespan estimate, powers by the cluster's peak
// power, counts by the cluster maxima, so features stay O(1) across
// regimes and instance sizes.
inline ObsGraph extract_obs(const SchedState& s) {
    ObsGraph obs;
    obs.n_tasks = s.n_tasks();
    obs.n_vms = s.n_vms();
    obs.task_feats.resize(obs.n_tasks, kTaskFeatures);
    obs.vm_feats.resize(obs.n_vms, kVmFeatures);

    double time_scale = 1.0 / std::max(s.t_hat0, 1e-12);
    double max_speed = 0.0, max_mem = 0.0, max_peak = 0.0, mean_speed = 0.0;
    int max_cores = 1;
    for (const VmSpec& v : s.cluster->vms) {
        max_speed = std::max(max_speed, v.speed);
        max_mem = std::max(max_mem, v.mem);
        max_peak = std::max(max_peak, v.p_peak);
        max_cores = std::max(max_cores, v.cores);
        mean_speed += v.speed;
    }
    mean_speed /= s.n_vms();
    double work_scale = time_scale / mean_speed;

    for (int i = 0; i < obs.n_tasks; ++i) {
        const TaskSpec& t = s.dag->tasks[i];
        double remaining = t.length;
        double completion = 0.0;
        if (s.assigned(i)) {
            completion = s.completion[i];
            double frac = (s.completion[i] - s.clock) / (s.completion[i] - s.start[i]);
            remaining = t.length * std::clamp(frac, 0.0, 1.0);
        }
        double* f = obs.task_feats.row(i);
        f[0] = s.assigned(i) ? 1.0 : 0.0;
        f[1] = s.status[i] == TaskStatus::Ready ? 1.0 : 0.0;
        f[2] = remaining * work_scale;
        f[3] = completion * time_scale;
        f[4] = double(t.cpu) / max_cores;
        f[5] = t.mem / max_mem;
    }

    for (int m = 0; m < obs.n_vms; ++m) {
        const VmTimeline& tl = s.timelines[m];
        const VmSpec& v = tl.vm;
        double last_completion = 0.0, next_release = 0.0;
        int running = 0;
        for (const Placement& p : tl.placements) {
            last_completion = std::max(last_completion, p.end);
            if (p.start <= s.clock && s.clock < p.end) {
                ++running;
                if (next_release == 0.0 || p.end - s.clock < next_release)
                    next_release = p.end - s.clock;
            }
        }
        int used = detail::cores_used_at(tl, s.clock);
        double* f = obs.vm_feats.row(m);
        f[0] = last_completion * time_scale;
        f[1] = utilization_at(tl, s.clock);
        f[2] = v.speed / max_speed;
        f[3] = double(v.cores) / max_cores;
        f[4] = double(v.cores - used) / max_cores;
        f[5] = v.mem / max_mem;
        f[6] = (v.mem - detail::mem_used_at(tl, s.clock)) / max_mem;
        f[7] = v.p_idle / max_peak;
        f[8] = v.p_peak / max_peak;
        f[9] = double(running) / v.cores;
        f[10] = double(used) / v.cores;
        f[11] = next_release * time_scale;
    }

    obs.dep_edges = s.dag->edges;
    for (int i = 0; i < obs.n_tasks; ++i) {
        const TaskSpec& t = s.dag->tasks[i];
        for (int m = 0; m < obs.n_vms; ++m) {
            const VmSpec& v = s.cluster->vms[m];
            if (t.compatible_with(v.id) && t.cpu <= v.cores && t.mem <= v.mem + kTimeTol)
                obs.compat_edges.push_back({i, m});
        }
    }
    obs.mask = feasible_actions(s);
    return obs;
}

struct PolicyOutput {
    std::vector<double> logits;     // n_tasks * n_vms, task-major
    std::vector<double> probs;      // exact zeros at masked entries
    std::vector<double> log_probs;  // meaningful at valid entries only
    double value = 0.0;
};

// Softmax under an additive mask penalty: invalid entries underflow to
// exact zeros in probability space.
inline void apply_masked_softmax(PolicyOutput& out, const ActionMask& mask) {
    const std::size_t n = out.logits.size();
    if (mask.bits.size() != n)
        throw std::invalid_argument("apply_masked_softmax: mask size mismatch");
    double best = -std::numeric_limits<double>::infinity();
    bool any = false;
    out.log_probs.assign(n, -kMaskPenalty);
    for (std::size_t a = 0; a < n; ++a) {
        if (!mask.bits[a]) continue;
        any = true;
        best = std::max(best, out.logits[a]);
    }
    if (!any) throw std::runtime_error("apply_masked_softmax: no feasible action");
    out.probs.assign(n, 0.0);
    double z = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        double adj = mask.bits[a] ? out.logits[a] : out.logits[a] - kMaskPenalty;
        out.probs[a] = std::exp(adj - best);
        z += mask.bits[a] ? out.probs[a] : 0.0;
    }
    double logz = std::log(z);
    for (std::size_t a = 0; a < n; ++a) {
        out.probs[a] /= z;
        if (mask.bits[a]) out.log_probs[a] = out.logits[a] - best - logz;
    }
}

// Running normalization statistics (frozen during rollouts and updates,
// refreshed once per training iteration).
struct NormStats {
    std::vector<double> mean, var;
    explicit NormStats(int dim = 0) : mean(dim, 0.0), var(dim, 1.0) {}
};

// Forward-pass caches; reused across calls to avoid reallocation.
struct Workspace {
    Matv tz1, txh, tp1, tr1, temb;
    Matv vz1, vxh, vp1, vr1, vemb;
    Matv h[4];                  // node embeddings before/after each GIN layer
    Matv agg[3], m1[3], rm1[3];
    std::vector<double> gmean;
    Matv pairs, s1, rs1;
    std::vector<double> c1, rc1;
    // backward scratch
    Matv d_nodes, d_agg, d_m1, d_rm1, d_tmp;
    Matv d_pairs, d_s1, d_rs1;
    std::vector<double> d_gmean, d_c1, d_rc1;
    Matv d_temb, d_vemb, d_tp1, d_tr1, d_txh, d_tz1;
    Matv d_vp1, d_vr1, d_vxh, d_vz1;
    std::vector<std::vector<int>> neighbors;
};

// GIN-based actor-critic over the bipartite-plus-dependency graph:
// two-layer encoders with running-stat normalization, three GIN layers
// with sum aggregation over both edge families, mean pooling, an edge
// scorer over [task, vm, graph] embeddings with masked softmax, and a
// value head on the graph embedding.
class PolicyNet {
  public:
    explicit PolicyNet(int hidden = 64, std::uint64_t seed = 0)
        : task_stats(hidden), vm_stats(hidden), h_(hidden) {
        te_l1w_ = store_.alloc("task_enc.l1.w", h_, kTaskFeatures);
        te_l1b_ = store_.alloc("task_enc.l1.b", h_, 1);
        te_gamma_ = store_.alloc("task_enc.norm.gamma", h_, 1);
        te_beta_ = store_.alloc("task_enc.norm.beta", h_, 1);
        te_l2w_ = store_.alloc("task_enc.l2.w", h_, h_);
        te_l2b_ = store_.alloc("task_enc.l2.b", h_, 1);
        ve_l1w_ = store_.alloc("vm_enc.l1.w", h_, kVmFeatures);
        ve_l1b_ = store_.alloc("vm_enc.l1.b", h_, 1);
        ve_gamma_ = store_.alloc("vm_enc.norm.gamma", h_, 1);
        ve_beta_ = store_.alloc("vm_enc.norm.beta", h_, 1);
        ve_l2w_ = store_.alloc("vm_enc.l2.w", h_, h_);
        ve_l2b_ = store_.alloc("vm_enc.l2.b", h_, 1);
        for (int k = 0; k < 3; ++k) {
            std::string p = "gin" + std::to_string(k);
            gin_eps_[k] = store_.alloc(p + ".eps", 1, 1);
            gin_l1w_[k] = store_.alloc(p + ".l1.w", h_, h_);
            gin_l1b_[k] = store_.alloc(p + ".l1.b", h_, 1);
            gin_l2w_[k] = store_.alloc(p + ".l2.w", h_, h_);
            gin_l2b_[k] = store_.alloc(p + ".l2.b", h_, 1);
        }
        sc_l1w_ = store_.alloc("scorer.l1.w", h_, 3 * h_);
        sc_l1b_ = store_.alloc("scorer.l1.b", h_, 1);
        sc_l2w_ = store_.alloc("scorer.l2.w", 1, h_);
        sc_l2b_ = store_.alloc("scorer.l2.b", 1, 1);
        cr_l1w_ = store_.alloc("critic.l1.w", h_, h_);
        cr_l1b_ = store_.alloc("critic.l1.b", h_, 1);
        cr_l2w_ = store_.alloc("critic.l2.w", 1, h_);
        cr_l2b_ = store_.alloc("critic.l2.b", 1, 1);
        init_params(seed);
    }

    int hidden() const { return h_; }
    int param_count() const { return store_.size(); }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    NormStats task_stats, vm_stats;

    PolicyOutput forward(const ObsGraph& obs, Workspace& ws) const {
        const int v_n = obs.n_tasks, m_n = obs.n_vms, n = v_n + m_n;
        if (v_n == 0 || m_n == 0) throw std::invalid_argument("forward: empty graph");

        encode(obs.task_feats, kTaskFeatures, te_l1w_, te_l1b_, task_stats, te_gamma_,
               te_beta_, te_l2w_, te_l2b_, ws.tz1, ws.txh, ws.tp1, ws.tr1, ws.temb);
        encode(obs.vm_feats, kVmFeatures, ve_l1w_, ve_l1b_, vm_stats, ve_gamma_, ve_beta_,
               ve_l2w_, ve_l2b_, ws.vz1, ws.vxh, ws.vp1, ws.vr1, ws.vemb);

        ws.h[0].resize(n, h_);
        std::copy(ws.temb.a.begin(), ws.temb.a.end(), ws.h[0].a.begin());
        std::copy(ws.vemb.a.begin(), ws.vemb.a.end(),
                  ws.h[0].a.begin() + static_cast<std::size_t>(v_n) * h_);

        build_neighbors(obs, ws.neighbors);
        for (int k = 0; k < 3; ++k) {
            aggregate(ws.h[k], ws.neighbors, store_.at(gin_eps_[k])[0], ws.agg[k]);
            ws.m1[k].resize(n, h_);
            linear_fwd(store_.at(gin_l1w_[k]), store_.at(gin_l1b_[k]), h_, h_, ws.agg[k].a.data(),
                       n, ws.m1[k].a.data());
            ws.rm1[k].resize(n, h_);
            relu_fwd(ws.m1[k].a.data(), ws.m1[k].a.size(), ws.rm1[k].a.data());
            ws.h[k + 1].resize(n, h_);
            linear_fwd(store_.at(gin_l2w_[k]), store_.at(gin_l2b_[k]), h_, h_,
                       ws.rm1[k].a.data(), n, ws.h[k + 1].a.data());
        }

        ws.gmean.assign(h_, 0.0);
        for (int i = 0; i < n; ++i) {
            const double* row = ws.h[3].row(i);
            for (int c = 0; c < h_; ++c) ws.gmean[c] += row[c];
        }
        for (int c = 0; c < h_; ++c) ws.gmean[c] /= n;

        const int pairs = v_n * m_n;
        ws.pairs.resize(pairs, 3 * h_);
        for (int i = 0; i < v_n; ++i)
            for (int m = 0; m < m_n; ++m) {
                double* row = ws.pairs.row(i * m_n + m);
                std::copy(ws.h[3].row(i), ws.h[3].row(i) + h_, row);
                std::copy(ws.h[3].row(v_n + m), ws.h[3].row(v_n + m) + h_, row + h_);
                std::copy(ws.gmean.begin(), ws.gmean.end(), row + 2 * h_);
            }
        ws.s1.resize(pairs, h_);
        linear_fwd(store_.at(sc_l1w_), store_.at(sc_l1b_), 3 * h_, h_, ws.pairs.a.data(), pairs,
                   ws.s1.a.data());
        ws.rs1.resize(pairs, h_);
        relu_fwd(ws.s1.a.data(), ws.s1.a.size(), ws.rs1.a.data());

        PolicyOutput out;
        out.logits.resize(pairs);
        linear_fwd(store_.at(sc_l2w_), store_.at(sc_l2b_), h_, 1, ws.rs1.a.data(), pairs,
                   out.logits.data());

        ws.c1.assign(h_, 0.0);
        linear_fwd(store_.at(cr_l1w_), store_.at(cr_l1b_), h_, h_, ws.gmean.data(), 1,
                   ws.c1.data());
        ws.rc1.assign(h_, 0.0);
        relu_fwd(ws.c1.data(), ws.c1.size(), ws.rc1.data());
        linear_fwd(store_.at(cr_l2w_), store_.at(cr_l2b_), h_, 1, ws.rc1.data(), 1, &out.value);

        apply_masked_softmax(out, obs.mask);
        return out;
    }

    // Reverse pass from head gradients into a flat gradient buffer that
    // mirrors the parameter layout. dlogits has one entry per (task, vm)
    // pair; masked entries are expected to carry zero.
    void backward(const ObsGraph& obs, Workspace& ws, const std::vector<double>& dlogits,
                  double dvalue, GradVec& grad) const {
        const int v_n = obs.n_tasks, m_n = obs.n_vms, n = v_n + m_n;
        const int pairs = v_n * m_n;
        if (static_cast<int>(dlogits.size()) != pairs)
            throw std::invalid_argument("backward: dlogits size mismatch");
        if (static_cast<int>(grad.size()) != store_.size())
            throw std::invalid_argument("backward: grad buffer size mismatch");

        // critic head
        ws.d_rc1.assign(h_, 0.0);
        linear_bwd(store_.at(cr_l2w_), h_, 1, ws.rc1.data(), &dvalue, 1,
                   grad.data() + cr_l2w_.offset, grad.data() + cr_l2b_.offset, ws.d_rc1.data());
        ws.d_c1.assign(h_, 0.0);
        relu_bwd(ws.c1.data(), ws.d_rc1.data(), h_, ws.d_c1.data());
        ws.d_gmean.assign(h_, 0.0);
        linear_bwd(store_.at(cr_l1w_), h_, h_, ws.gmean.data(), ws.d_c1.data(), 1,
                   grad.data() + cr_l1w_.offset, grad.data() + cr_l1b_.offset,
                   ws.d_gmean.data());

        // edge scorer
        ws.d_rs1.resize(pairs, h_);
        linear_bwd(store_.at(sc_l2w_), h_, 1, ws.rs1.a.data(), dlogits.data(), pairs,
                   grad.data() + sc_l2w_.offset, grad.data() + sc_l2b_.offset,
                   ws.d_rs1.a.data());
        ws.d_s1.resize(pairs, h_);
        relu_bwd(ws.s1.a.data(), ws.d_rs1.a.data(), ws.s1.a.size(), ws.d_s1.a.data());
        ws.d_pairs.resize(pairs, 3 * h_);
        linear_bwd(store_.at(sc_l1w_), 3 * h_, h_, ws.pairs.a.data(), ws.d_s1.a.data(), pairs,
                   grad.data() + sc_l1w_.offset, grad.data() + sc_l1b_.offset,
                   ws.d_pairs.a.data());

        ws.d_nodes.resize(n, h_);
        for (int i = 0; i < v_n; ++i)
            for (int m = 0; m < m_n; ++m) {
                const double* row = ws.d_pairs.row(i * m_n + m);
                double* dt = ws.d_nodes.row(i);
                double* dv = ws.d_nodes.row(v_n + m);
                for (int c = 0; c < h_; ++c) {
                    dt[c] += row[c];
                    dv[c] += row[h_ + c];
                    ws.d_gmean[c] += row[2 * h_ + c];
                }
            }
        // mean pool spreads the graph-embedding gradient over all nodes
        for (int i = 0; i < n; ++i) {
            double* d = ws.d_nodes.row(i);
            for (int c = 0; c < h_; ++c) d[c] += ws.d_gmean[c] / n;
        }

        for (int k = 2; k >= 0; --k) {
            ws.d_rm1.resize(n, h_);
            linear_bwd(store_.at(gin_l2w_[k]), h_, h_, ws.rm1[k].a.data(), ws.d_nodes.a.data(),
                       n, grad.data() + gin_l2w_[k].offset, grad.data() + gin_l2b_[k].offset,
                       ws.d_rm1.a.data());
            ws.d_m1.resize(n, h_);
            relu_bwd(ws.m1[k].a.data(), ws.d_rm1.a.data(), ws.m1[k].a.size(),
                     ws.d_m1.a.data());
            ws.d_agg.resize(n, h_);
            linear_bwd(store_.at(gin_l1w_[k]), h_, h_, ws.agg[k].a.data(), ws.d_m1.a.data(), n,
                       grad.data() + gin_l1w_[k].offset, grad.data() + gin_l1b_[k].offset,
                       ws.d_agg.a.data());

            double eps = store_.at(gin_eps_[k])[0];
            double deps = 0.0;
            for (std::size_t i = 0; i < ws.d_agg.a.size(); ++i)
                deps += ws.d_agg.a[i] * ws.h[k].a[i];
            grad[gin_eps_[k].offset] += deps;

            ws.d_tmp.resize(n, h_);
            for (int i = 0; i < n; ++i) {
                double* dst = ws.d_tmp.row(i);
                const double* self = ws.d_agg.row(i);
                for (int c = 0; c < h_; ++c) dst[c] = (1.0 + eps) * self[c];
                for (int nb : ws.neighbors[i]) {
                    const double* dn = ws.d_agg.row(nb);
                    for (int c = 0; c < h_; ++c) dst[c] += dn[c];
                }
            }
            std::swap(ws.d_nodes, ws.d_tmp);
        }

        ws.d_temb.resize(v_n, h_);
        ws.d_vemb.resize(m_n, h_);
        std::copy(ws.d_nodes.a.begin(), ws.d_nodes.a.begin() + static_cast<std::size_t>(v_n) * h_,
                  ws.d_temb.a.begin());
        std::copy(ws.d_nodes.a.begin() + static_cast<std::size_t>(v_n) * h_,
                  ws.d_nodes.a.end(), ws.d_vemb.a.begin());

        encode_bwd(obs.task_feats, kTaskFeatures, te_l1w_, te_l1b_, task_stats, te_gamma_,
                   te_beta_, te_l2w_, te_l2b_, ws.txh, ws.tp1, ws.tr1, ws.d_temb, ws.d_tr1,
                   ws.d_tp1, ws.d_txh, ws.d_tz1, grad);
        encode_bwd(obs.vm_feats, kVmFeatures, ve_l1w_, ve_l1b_, vm_stats, ve_gamma_, ve_beta_,
                   ve_l2w_, ve_l2b_, ws.vxh, ws.vp1, ws.vr1, ws.d_vemb, ws.d_vr1, ws.d_vp1,
                   ws.d_vxh, ws.d_vz1, grad);
    }

    // Refreshes the encoders' running statistics from a batch of
    // observations under the current parameters (EMA with `momentum`).
    void refresh_norm_stats(const std::vector<const ObsGraph*>& batch, double momentum) {
        update_stats(batch, /*task_side=*/true, momentum);
        update_stats(batch, /*task_side=*/false, momentum);
    }

    nlohmann::json checkpoint(long step) const {
        nlohmann::json j;
        j["format"] = "schedlab-policy";
        j["version"] = 1;
        j["hidden"] = h_;
        j["step"] = step;
        j["params"] = store_.values();
        nlohmann::json layout = nlohmann::json::array();
        for (const Slice& s : store_.layout())
            layout.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}});
        j["layout"] = layout;
        j["task_stats"] = {{"mean", task_stats.mean}, {"var", task_stats.var}};
        j["vm_stats"] = {{"mean", vm_stats.mean}, {"var", vm_stats.var}};
        return j;
    }

    static PolicyNet from_checkpoint(const nlohmann::json& j, long* step_out = nullptr) {
        if (j.at("format") != "schedlab-policy" || j.at("version") != 1)
            throw std::invalid_argument("from_checkpoint: unknown checkpoint format");
        PolicyNet net(j.at("hidden").get<int>(), 0);
        auto params = j.at("params").get<std::vector<double>>();
        if (static_cast<int>(params.size()) != net.param_count())
            throw std::invalid_argument("from_checkpoint: parameter count mismatch");
        net.store_.values() = std::move(params);
        net.task_stats.mean = j.at("task_stats").at("mean").get<std::vector<double>>();
        net.task_stats.var = j.at("task_stats").at("var").get<std::vector<double>>();
        net.vm_stats.mean = j.at("vm_stats").at("mean").get<std::vector<double>>();
        net.vm_stats.var = j.at("vm_stats").at("var").get<std::vector<double>>();
        if (step_out) *step_out = j.at("step").get<long>();
        return net;
    }

  private:
    void init_params(std::uint64_t seed) {
        Rng rng(derive_seed(seed, "policy-init"));
        auto fill = [&](const Slice& s, double std) {
            double* p = store_.at(s);
            for (int i = 0; i < s.size(); ++i) p[i] = rng.normal(0.0, std);
        };
        auto he = [&](const Slice& w) { fill(w, std::sqrt(2.0 / w.cols)); };
        he(te_l1w_);
        he(te_l2w_);
        he(ve_l1w_);
        he(ve_l2w_);
        for (int k = 0; k < 3; ++k) {
            he(gin_l1w_[k]);
            he(gin_l2w_[k]);
        }
        he(sc_l1w_);
        fill(sc_l2w_, 0.01);  // near-uniform initial policy
        he(cr_l1w_);
        fill(cr_l2w_, std::sqrt(1.0 / h_));
        auto ones = [&](const Slice& s) {
            double* p = store_.at(s);
            for (int i = 0; i < s.size(); ++i) p[i] = 1.0;
        };
        ones(te_gamma_);
        ones(ve_gamma_);
    }

    static void build_neighbors(const ObsGraph& obs, std::vector<std::vector<int>>& nb) {
        const int n = obs.n_tasks + obs.n_vms;
        nb.assign(n, {});
        for (auto [p, c] : obs.dep_edges) {
            nb[p].push_back(c);
            nb[c].push_back(p);
        }
        for (auto [t, m] : obs.compat_edges) {
            nb[t].push_back(obs.n_tasks + m);
            nb[obs.n_tasks + m].push_back(t);
        }
    }

    static void aggregate(const Matv& h, const std::vector<std::vector<int>>& nb, double eps,
                          Matv& out) {
        out.resize(h.r, h.c);
        for (int i = 0; i < h.r; ++i) {
            double* dst = out.row(i);
            const double* self = h.row(i);
            for (int c = 0; c < h.c; ++c) dst[c] = (1.0 + eps) * self[c];
            for (int j : nb[i]) {
                const double* src = h.row(j);
                for (int c = 0; c < h.c; ++c) dst[c] += src[c];
            }
        }
    }

    void encode(const Matv& x, int in_dim, const Slice& l1w, const Slice& l1b,
                const NormStats& stats, const Slice& gamma, const Slice& beta, const Slice& l2w,
                const Slice& l2b, Matv& z1, Matv& xh, Matv& p1, Matv& r1, Matv& emb) const {
        const int n = x.r;
        z1.resize(n, h_);
        linear_fwd(store_.at(l1w), store_.at(l1b), in_dim, h_, x.a.data(), n, z1.a.data());
        xh.resize(n, h_);
        p1.resize(n, h_);
        const double* g = store_.at(gamma);
        const double* b = store_.at(beta);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < h_; ++c) {
                double v = (z1.row(i)[c] - stats.mean[c]) / std::sqrt(stats.var[c] + kNormEps);
                xh.row(i)[c] = v;
                p1.row(i)[c] = g[c] * v + b[c];
            }
        r1.resize(n, h_);
        relu_fwd(p1.a.data(), p1.a.size(), r1.a.data());
        emb.resize(n, h_);
        linear_fwd(store_.at(l2w), store_.at(l2b), h_, h_, r1.a.data(), n, emb.a.data());
    }

    void encode_bwd(const Matv& x, int in_dim, const Slice& l1w, const Slice& l1b,
                    const NormStats& stats, const Slice& gamma, const Slice& beta,
                    const Slice& l2w, const Slice& l2b, const Matv& xh, const Matv& p1,
                    const Matv& r1, const Matv& demb, Matv& dr1, Matv& dp1, Matv& dxh,
                    Matv& dz1, GradVec& grad) const {
        const int n = x.r;
        dr1.resize(n, h_);
        linear_bwd(store_.at(l2w), h_, h_, r1.a.data(), demb.a.data(), n,
                   grad.data() + l2w.offset, grad.data() + l2b.offset, dr1.a.data());
        dp1.resize(n, h_);
        relu_bwd(p1.a.data(), dr1.a.data(), p1.a.size(), dp1.a.data());
        dxh.resize(n, h_);
        dz1.resize(n, h_);
        const double* g = store_.at(gamma);
        double* dgamma = grad.data() + gamma.offset;
        double* dbeta = grad.data() + beta.offset;
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < h_; ++c) {
                double dp = dp1.row(i)[c];
                dgamma[c] += dp * xh.row(i)[c];
                dbeta[c] += dp;
                double dv = dp * g[c];
                dxh.row(i)[c] = dv;
                dz1.row(i)[c] = dv / std::sqrt(stats.var[c] + kNormEps);
            }
        linear_bwd(store_.at(l1w), in_dim, h_, x.a.data(), dz1.a.data(), n,
                   grad.data() + l1w.offset, grad.data() + l1b.offset, nullptr);
    }

    void update_stats(const std::vector<const ObsGraph*>& batch, bool task_side,
                      double momentum) {
        NormStats& stats = task_side ? task_stats : vm_stats;
        const Slice& w = task_side ? te_l1w_ : ve_l1w_;
        const Slice& b = task_side ? te_l1b_ : ve_l1b_;
        int in_dim = task_side ? kTaskFeatures : kVmFeatures;

        std::vector<double> sum(h_, 0.0), sumsq(h_, 0.0);
        long rows = 0;
        std::vector<double> z(h_, 0.0);
        for (const ObsGraph* obs : batch) {
            const Matv& x = task_side ? obs->task_feats : obs->vm_feats;
            for (int i = 0; i < x.r; ++i) {
                linear_fwd(store_.at(w), store_.at(b), in_dim, h_, x.row(i), 1, z.data());
                for (int c = 0; c < h_; ++c) {
                    sum[c] += z[c];
                    sumsq[c] += z[c] * z[c];
                }
                ++rows;
            }
        }
        if (rows == 0) return;
        for (int c = 0; c < h_; ++c) {
            double mean = sum[c] / rows;
            double var = std::max(0.0, sumsq[c] / rows - mean * mean);
            stats.mean[c] = (1.0 - momentum) * stats.mean[c] + momentum * mean;
            stats.var[c] = (1.0 - momentum) * stats.var[c] + momentum * var;
        }
    }

    int h_;
    ParamStore store_;
    Slice te_l1w_, te_l1b_, te_gamma_, te_beta_, te_l2w_, te_l2b_;
    Slice ve_l1w_, ve_l1b_, ve_gamma_, ve_beta_, ve_l2w_, ve_l2b_;
    Slice gin_eps_[3], gin_l1w_[3], gin_l1b_[3], gin_l2w_[3], gin_l2b_[3];
    Slice sc_l1w_, sc_l1b_, sc_l2w_, sc_l2b_;
    Slice cr_l1w_, cr_l1b_, cr_l2w_, cr_l2b_;
};

// Samples a valid action; returns (flat index, log-probability).
inline std::pair<int, double> sample_action(const PolicyOutput& out, Rng& rng) {
    double u = rng.uniform(0.0, 1.0);
    double acc = 0.0;
    int last_valid = -1;
    for (std::size_t a = 0; a < out.probs.size(); ++a) {
        if (out.probs[a] <= 0.0) continue;
        last_valid = static_cast<int>(a);
        acc += out.probs[a];
        if (u < acc) return {last_valid, out.log_probs[a]};
    }
    if (last_valid < 0) throw std::runtime_error("sample_action: no feasible action");
    return {last_valid, out.log_probs[last_valid]};
}

// Highest-probability action, lowest index on ties.
inline int greedy_action(const PolicyOutput& out) {
    int best = -1;
    for (std::size_t a = 0; a < out.probs.size(); ++a) {
        if (out.probs[a] <= 0.0) continue;
        if (best < 0 || out.probs[a] > out.probs[best]) best = static_cast<int>(a);
    }
    if (best < 0) throw std::runtime_error("greedy_action: no feasible action");
    return best;
}

}  // namespace schedlab::nn
