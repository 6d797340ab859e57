#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "schedlab/hilbert.hpp"
#include "schedlab/policy_runner.hpp"
#include "schedlab/run_record.hpp"

namespace schedlab::eval {

// ---------------------------------------------------------------------
// Empirical attainment function

struct EafGrid {
    int resolution = 256;
    double denom_makespan = 1.0;  // normalization shared across policies in a panel
    double denom_energy = 1.0;
    std::vector<double> alpha;  // row-major [iy * resolution + ix]

    double x_at(int ix) const { return double(ix + 1) / resolution; }
    double y_at(int iy) const { return double(iy + 1) / resolution; }
    double at(int ix, int iy) const { return alpha[std::size_t(iy) * resolution + ix]; }
};

// Fraction of outcomes weakly dominating (x, y): both coordinates <=.
inline double attainment_fraction(const std::vector<std::pair<double, double>>& points,
                                  double x, double y) {
    if (points.empty()) throw std::invalid_argument("attainment_fraction: no points");
    int count = 0;
    for (auto [mk, en] : points)
        if (mk <= x && en <= y) ++count;
    return double(count) / points.size();
}

// EAF over a normalized [0,1]^2 grid: bin each point at the first node
// that weakly dominates it, then take 2-D prefix sums.
inline EafGrid compute_eaf(const std::vector<std::pair<double, double>>& points,
                           double denom_makespan, double denom_energy, int resolution = 256) {
    if (points.empty()) throw std::invalid_argument("compute_eaf: no points");
    if (denom_makespan <= 0.0 || denom_energy <= 0.0 || resolution <= 0)
        throw std::invalid_argument("compute_eaf: bad normalization or resolution");
    EafGrid grid;
    grid.resolution = resolution;
    grid.denom_makespan = denom_makespan;
    grid.denom_energy = denom_energy;
    grid.alpha.assign(std::size_t(resolution) * resolution, 0.0);

    auto node_index = [resolution](double u) {
        long ix = static_cast<long>(std::ceil(u * resolution)) - 1;
        return static_cast<int>(std::clamp(ix, 0L, long(resolution - 1)));
    };
    for (auto [mk, en] : points) {
        double u = mk / denom_makespan, v = en / denom_energy;
        if (u > 1.0 || v > 1.0) continue;  // outside the shared panel
        grid.alpha[std::size_t(node_index(v)) * resolution + node_index(u)] += 1.0;
    }
    for (int iy = 0; iy < resolution; ++iy)
        for (int ix = 1; ix < resolution; ++ix)
            grid.alpha[std::size_t(iy) * resolution + ix] +=
                grid.alpha[std::size_t(iy) * resolution + ix - 1];
    for (int iy = 1; iy < resolution; ++iy)
        for (int ix = 0; ix < resolution; ++ix)
            grid.alpha[std::size_t(iy) * resolution + ix] +=
                grid.alpha[std::size_t(iy - 1) * resolution + ix];
    for (double& a : grid.alpha) a /= points.size();
    return grid;
}

inline std::string eaf_csv(const EafGrid& grid) {
    std::string out = "x,y,alpha\n";
    char buf[96];
    for (int iy = 0; iy < grid.resolution; ++iy)
        for (int ix = 0; ix < grid.resolution; ++ix) {
            std::snprintf(buf, sizeof(buf), "%.8g,%.8g,%.8g\n", grid.x_at(ix), grid.y_at(iy),
                          grid.at(ix, iy));
            out += buf;
        }
    return out;
}

// ---------------------------------------------------------------------
// Pareto checkpoints and objective correlation

// Indices of points not dominated under (min, min).
inline std::vector<int> pareto_filter(const std::vector<std::pair<double, double>>& points) {
    std::vector<int> keep;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
            if (i == j) continue;
            bool no_worse = points[j].first <= points[i].first &&
                            points[j].second <= points[i].second;
            bool better = points[j].first < points[i].first ||
                          points[j].second < points[i].second;
            dominated = no_worse && better;
        }
        if (!dominated) keep.push_back(static_cast<int>(i));
    }
    return keep;
}

// Pearson correlation; empty when either coordinate has (numerically)
// zero variance.
inline std::optional<double> checkpoint_correlation(
    const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3)
        throw std::invalid_argument("checkpoint_correlation: need >= 3 checkpoints");
    double n = double(points.size());
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (auto [x, y] : points) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if (vx <= 0.0 || vy <= 0.0) return std::nullopt;
    return cov / std::sqrt(vx * vy);
}

// ---------------------------------------------------------------------
// Cross-topology x cross-regime benchmark matrix

struct MatrixSpec {
    std::vector<HostRegime> regimes{HostRegime::HS, HostRegime::HP, HostRegime::AL,
                                    HostRegime::NA};
    std::vector<std::string> eval_families{"wide", "longcp"};
    std::vector<std::uint64_t> eval_seeds;  // default 1000..1099
    GenParams gen;
    int n_vms = 4;
    std::uint64_t cluster_seed = 0;
    // overridable construction hooks; defaults sample from gen/cluster_seed
    std::function<std::vector<VmSpec>(HostRegime)> cluster_provider;
    std::function<WorkflowDag(const std::string& family, std::uint64_t seed,
                              const std::vector<VmSpec>&)>
        instance_provider;

    MatrixSpec() {
        for (std::uint64_t s = 1000; s < 1100; ++s) eval_seeds.push_back(s);
    }
};

// Supplies the policy for a (train topology, regime) cell; nullopt marks
// the cell absent (e.g. missing checkpoint).
using AgentProvider =
    std::function<std::optional<PolicyFn>(const std::string& train_topo, HostRegime regime)>;

inline std::vector<RunRecord> run_cross_matrix(const std::vector<std::string>& train_topos,
                                               const AgentProvider& provider,
                                               const MatrixSpec& spec) {
    std::vector<RunRecord> records;
    for (HostRegime regime : spec.regimes) {
        std::vector<VmSpec> vms =
            spec.cluster_provider
                ? spec.cluster_provider(regime)
                : sample_regime(regime, spec.n_vms, derive_seed(spec.cluster_seed, "matrix"));
        auto cluster = std::make_shared<const Cluster>(Cluster{regime, vms});
        for (const std::string& family : spec.eval_families) {
            // the eval set is shared by every agent in this cell group
            std::vector<std::shared_ptr<const WorkflowDag>> dags;
            for (std::uint64_t seed : spec.eval_seeds)
                dags.push_back(std::make_shared<const WorkflowDag>(
                    spec.instance_provider ? spec.instance_provider(family, seed, vms)
                                           : make_instance(family, spec.gen, seed, vms)));
            for (const std::string& topo : train_topos) {
                auto policy = provider(topo, regime);
                if (!policy) continue;
                EnvOptions opts;
                opts.compute_rewards = false;
                for (std::size_t k = 0; k < dags.size(); ++k) {
                    Env env(dags[k], cluster, opts);
                    RunRecord rec = run_episode(env, *policy);
                    rec.train_topology = topo;
                    rec.eval_topology = family;
                    rec.regime = to_string(regime);
                    rec.policy_id = topo;
                    rec.workflow_seed = spec.eval_seeds[k];
                    records.push_back(std::move(rec));
                }
            }
        }
    }
    return records;
}

struct SummaryRow {
    std::string regime, method, eval_domain;
    int n_runs = 0;
    double mean_makespan = 0.0;
    double mean_active_energy = 0.0;
    bool best_makespan = false;
    bool best_energy = false;
    bool work_conserving = true;
};

inline std::vector<SummaryRow> summarize_matrix(const std::vector<RunRecord>& records) {
    std::map<std::tuple<std::string, std::string, std::string>, SummaryRow> cells;
    for (const RunRecord& r : records) {
        SummaryRow& row = cells[{r.regime, r.eval_topology, r.train_topology}];
        row.regime = r.regime;
        row.eval_domain = r.eval_topology;
        row.method = r.train_topology;
        ++row.n_runs;
        row.mean_makespan += r.makespan;
        row.mean_active_energy += r.active_energy;
        if (r.delayed_decisions > 0) row.work_conserving = false;
    }
    std::vector<SummaryRow> rows;
    for (auto& [key, row] : cells) {
        row.mean_makespan /= row.n_runs;
        row.mean_active_energy /= row.n_runs;
        rows.push_back(row);
    }
    // best-per-cell flags within each (regime, eval domain) group
    for (SummaryRow& row : rows) {
        double best_mk = row.mean_makespan, best_en = row.mean_active_energy;
        for (const SummaryRow& other : rows)
            if (other.regime == row.regime && other.eval_domain == row.eval_domain) {
                best_mk = std::min(best_mk, other.mean_makespan);
                best_en = std::min(best_en, other.mean_active_energy);
            }
        row.best_makespan = row.mean_makespan <= best_mk + 1e-12;
        row.best_energy = row.mean_active_energy <= best_en + 1e-12;
    }
    return rows;
}

inline std::string summary_table_text(const std::vector<SummaryRow>& rows) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-8s %-10s %-12s %14s %16s\n", "Host cfg", "Method",
                  "Eval Domain", "Makespan", "Active Energy");
    out += buf;
    out += std::string(64, '-') + "\n";
    for (const SummaryRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-8s %-10s %-12s %13.4f%s %15.4f%s\n",
                      r.regime.c_str(), r.method.c_str(), r.eval_domain.c_str(),
                      r.mean_makespan, r.best_makespan ? "*" : " ", r.mean_active_energy,
                      r.best_energy ? "*" : " ");
        out += buf;
    }
    out += "(* = best in its regime/eval-domain group)\n";
    return out;
}

inline std::string summary_table_csv(const std::vector<SummaryRow>& rows) {
    std::string out =
        "regime,method,eval_domain,n_runs,mean_makespan,mean_active_energy,best_makespan,"
        "best_energy\n";
    char buf[256];
    for (const SummaryRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,%.12g,%.12g,%d,%d\n", r.regime.c_str(),
                      r.method.c_str(), r.eval_domain.c_str(), r.n_runs, r.mean_makespan,
                      r.mean_active_energy, r.best_makespan ? 1 : 0, r.best_energy ? 1 : 0);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------
// Exhaustive fitness landscape

struct LandscapePoint {
    long index = 0;
    int x = 0, y = 0;
    double energy = 0.0;  // active energy of the completed schedule
    double makespan = 0.0;
};

struct Landscape {
    std::vector<LandscapePoint> points;
    int order = 0;
};

namespace detail {

inline void landscape_walk(Env& env, long guard, std::vector<LandscapePoint>& out) {
    if (env.state().terminal()) {
        if (static_cast<long>(out.size()) >= guard)
            throw std::runtime_error(
                "enumerate_landscape: feasible-sequence count exceeds guard (" +
                std::to_string(guard) + "); instance too large");
        auto [mk, energy] = env.final_metrics();
        out.push_back({static_cast<long>(out.size()), 0, 0, energy.active_total, mk});
        return;
    }
    ActionMask mask = env.mask();
    for (std::size_t a = 0; a < mask.bits.size(); ++a) {
        if (!mask.bits[a]) continue;
        Env branch = env;
        branch.step_flat(static_cast<int>(a));
        landscape_walk(branch, guard, out);
    }
}

}  // namespace detail

// Depth-first enumeration of every feasible decision sequence, each
// terminal outcome projected onto the smallest Hilbert grid that holds
// the full count.
inline Landscape enumerate_landscape(std::shared_ptr<const WorkflowDag> dag,
                                     std::shared_ptr<const Cluster> cluster,
                                     long guard = 10'000'000) {
    EnvOptions opts;
    opts.compute_rewards = false;
    opts.require_queue_free = false;
    Env env(std::move(dag), std::move(cluster), opts);
    Landscape scape;
    detail::landscape_walk(env, guard, scape.points);
    scape.order = hilbert_order_for(static_cast<long>(scape.points.size()));
    for (LandscapePoint& p : scape.points) {
        auto [x, y] = hilbert_index_to_xy(p.index, scape.order);
        p.x = x;
        p.y = y;
    }
    return scape;
}

inline std::string landscape_csv(const Landscape& scape) {
    std::string out = "d,x,y,energy,makespan\n";
    char buf[128];
    for (const LandscapePoint& p : scape.points) {
        std::snprintf(buf, sizeof(buf), "%ld,%d,%d,%.12g,%.12g\n", p.index, p.x, p.y, p.energy,
                      p.makespan);
        out += buf;
    }
    return out;
}

}  // namespace schedlab::eval
