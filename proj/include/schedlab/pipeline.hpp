#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include "schedlab/config.hpp"
#include "schedlab/eval.hpp"

namespace schedlab::pipeline {

namespace fs = std::filesystem;

inline void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Seed derivations shared by every command, so instances generated by
// `gen` are exactly the ones training and evaluation see.
inline std::vector<VmSpec> cluster_for_regime(std::uint64_t root, HostRegime regime,
                                              int n_vms) {
    return sample_regime(regime, n_vms, derive_seed(root, "cluster/" + to_string(regime)));
}

inline GenParams params_for_instance(const RunConfig& cfg, const std::string& family,
                                     std::uint64_t seed, int fixed_n_tasks) {
    GenParams p = cfg.generation.params;
    if (fixed_n_tasks > 0) {
        p.n_tasks = fixed_n_tasks;
    } else if (p.n_tasks == 0) {
        auto [lo, hi] = cfg.generation.n_tasks_range;
        p.n_tasks = lo + static_cast<int>(derive_seed(cfg.root_seed, "ntasks/" + family, seed) %
                                          std::uint64_t(hi - lo + 1));
    }
    return p;
}

// ---------------------------------------------------------------------
// gen

struct GenerationOutputs {
    std::vector<std::string> workflow_files;
    std::vector<std::string> cluster_files;
    std::string manifest_file;
};

inline GenerationOutputs run_generation(const RunConfig& cfg) {
    GenerationOutputs out;
    fs::path root(cfg.generation.out_dir);
    for (const std::string& regime_name : cfg.generation.regimes) {
        HostRegime regime = regime_from_string(regime_name);
        auto vms = cluster_for_regime(cfg.root_seed, regime, cfg.generation.n_vms);
        Cluster cluster{regime, vms};
        fs::path cluster_path = root / ("cluster_" + regime_name + ".json");
        write_file(cluster_path, to_json(cluster).dump(2) + "\n");
        out.cluster_files.push_back(cluster_path.string());

        for (const std::string& family : cfg.generation.families)
            for (std::uint64_t seed : cfg.generation.seeds) {
                GenParams p = params_for_instance(cfg, family, seed, 0);
                WorkflowDag dag = make_instance(family, p, seed, vms);
                fs::path path =
                    root / regime_name / (family + "_" + std::to_string(seed) + ".json");
                write_file(path, to_json(dag).dump(2) + "\n");
                out.workflow_files.push_back(path.string());
            }
    }
    fs::path manifest = root / "manifest.json";
    write_file(manifest, make_manifest(cfg, "gen").dump(2) + "\n");
    out.manifest_file = manifest.string();
    return out;
}

// ---------------------------------------------------------------------
// train

struct TrainingOutputs {
    std::string run_dir;
    std::string log_file;
    std::string checkpoints_file;       // step, eval makespan, eval active energy
    std::string final_checkpoint_file;  // parameters + normalization stats
    std::vector<std::string> checkpoint_files;
    std::string manifest_file;
};

inline TrainingOutputs run_training(const RunConfig& cfg) {
    const TrainingConfig& tc = cfg.training;
    HostRegime regime = regime_from_string(tc.regime);
    auto vms = cluster_for_regime(cfg.root_seed, regime, tc.n_vms);
    auto cluster = std::make_shared<const Cluster>(Cluster{regime, vms});

    std::vector<std::shared_ptr<const WorkflowDag>> dags;
    for (std::uint64_t seed : tc.train_seeds) {
        GenParams p = params_for_instance(cfg, tc.topology, seed, tc.n_tasks);
        dags.push_back(std::make_shared<const WorkflowDag>(
            make_instance(tc.topology, p, seed, vms)));
    }

    ppo::PpoConfig pcfg = tc.ppo;
    pcfg.seed = derive_seed(cfg.root_seed, "train/" + tc.topology + "/" + tc.regime);

    TrainingOutputs out;
    fs::path run_dir = fs::path(tc.out_dir) / (tc.topology + "_" + tc.regime);
    out.run_dir = run_dir.string();
    fs::create_directories(run_dir / "checkpoints");

    std::ofstream log(run_dir / "train_log.csv", std::ios::binary);
    log << ppo::train_log_header();
    std::ofstream ckpt_csv(run_dir / "checkpoints.csv", std::ios::binary);
    ckpt_csv << "step,eval_makespan,eval_active_energy\n";

    ppo::Trainer trainer(pcfg, dags, cluster);
    trainer.train(
        [&](const ppo::TrainLogRow& row) { log << ppo::train_log_csv_row(row); },
        [&](const ppo::CheckpointInfo& info) {
            fs::path p = run_dir / "checkpoints" / ("ckpt_" + std::to_string(info.step) + ".json");
            write_file(p, info.payload.dump() + "\n");
            out.checkpoint_files.push_back(p.string());
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g\n", info.step, info.eval_makespan,
                          info.eval_active_energy);
            ckpt_csv << buf;
        });

    fs::path final_path = run_dir / "checkpoint_final.json";
    write_file(final_path, trainer.net().checkpoint(pcfg.total_timesteps).dump() + "\n");
    out.final_checkpoint_file = final_path.string();
    out.log_file = (run_dir / "train_log.csv").string();
    out.checkpoints_file = (run_dir / "checkpoints.csv").string();
    fs::path manifest = run_dir / "manifest.json";
    write_file(manifest, make_manifest(cfg, "train").dump(2) + "\n");
    out.manifest_file = manifest.string();
    return out;
}

// ---------------------------------------------------------------------
// eval

struct EvaluationOutputs {
    std::string results_file;
    std::string summary_text_file;
    std::string summary_csv_file;
    std::vector<std::string> eaf_files;
    std::string manifest_file;
    std::vector<RunRecord> records;
    std::vector<std::string> notes;
};

inline eval::MatrixSpec matrix_spec_from_config(const RunConfig& cfg) {
    eval::MatrixSpec spec;
    spec.regimes.clear();
    for (const std::string& r : cfg.evaluation.regimes)
        spec.regimes.push_back(regime_from_string(r));
    spec.eval_families = cfg.evaluation.families;
    spec.eval_seeds = cfg.evaluation.eval_seeds;
    spec.n_vms = cfg.evaluation.n_vms;
    spec.cluster_provider = [&cfg](HostRegime regime) {
        return cluster_for_regime(cfg.root_seed, regime, cfg.evaluation.n_vms);
    };
    spec.instance_provider = [&cfg](const std::string& family, std::uint64_t seed,
                                    const std::vector<VmSpec>& vms) {
        return make_instance(family, params_for_instance(cfg, family, seed, 0), seed, vms);
    };
    return spec;
}

inline EvaluationOutputs run_evaluation(const RunConfig& cfg) {
    eval::MatrixSpec spec = matrix_spec_from_config(cfg);

    std::vector<std::string> methods{"wide", "longcp"};
    if (cfg.evaluation.include_baselines)
        for (const char* b : {"ect", "energy_greedy", "random"}) methods.push_back(b);

    // specialists come from per-(topology, regime) checkpoints; baselines
    // are always available
    eval::AgentProvider provider = [&cfg](const std::string& method,
                                          HostRegime regime) -> std::optional<PolicyFn> {
        if (method == "ect" || method == "energy_greedy")
            return make_baseline(method);
        if (method == "random")
            return make_baseline("random", derive_seed(cfg.root_seed, "eval/random"));
        fs::path path = fs::path(cfg.evaluation.checkpoint_dir) /
                        (method + "_" + to_string(regime)) / "checkpoint_final.json";
        if (!fs::exists(path)) return std::nullopt;
        auto net = std::make_shared<const nn::PolicyNet>(
            nn::PolicyNet::from_checkpoint(nlohmann::json::parse(read_file(path))));
        return make_net_policy(net, /*greedy=*/true);
    };

    EvaluationOutputs out;
    out.records = eval::run_cross_matrix(methods, provider, spec);
    auto rows = eval::summarize_matrix(out.records);

    // the HS regime predicts equal makespans for work-conserving policies
    for (const eval::SummaryRow& a : rows)
        for (const eval::SummaryRow& b : rows) {
            if (a.regime != "HS" || b.regime != "HS" || a.eval_domain != b.eval_domain)
                continue;
            if (a.method >= b.method) continue;
            bool conserving = a.work_conserving && b.work_conserving;
            if (conserving && std::abs(a.mean_makespan - b.mean_makespan) > 1e-9)
                out.notes.push_back("HS equality violated: " + a.method + " vs " + b.method +
                                    " on " + a.eval_domain);
            if (!conserving)
                out.notes.push_back("HS note: " + a.method + "/" + b.method + " on " +
                                    a.eval_domain +
                                    " not work-conserving; makespan equality not expected");
        }

    fs::path root(cfg.evaluation.out_dir);
    write_file(root / "results.csv", run_records_csv(out.records));
    out.results_file = (root / "results.csv").string();

    std::string text = eval::summary_table_text(rows);
    for (const std::string& n : out.notes) text += n + "\n";
    write_file(root / "summary.txt", text);
    out.summary_text_file = (root / "summary.txt").string();
    write_file(root / "summary.csv", eval::summary_table_csv(rows));
    out.summary_csv_file = (root / "summary.csv").string();

    if (cfg.evaluation.write_eaf) {
        // shared normalization across every method in a (regime, family) panel
        for (const std::string& regime : cfg.evaluation.regimes)
            for (const std::string& family : cfg.evaluation.families) {
                double denom_mk = 0.0, denom_en = 0.0;
                for (const RunRecord& r : out.records)
                    if (r.regime == regime && r.eval_topology == family) {
                        denom_mk = std::max(denom_mk, r.makespan);
                        denom_en = std::max(denom_en, r.active_energy);
                    }
                if (denom_mk == 0.0) continue;
                for (const std::string& method : methods) {
                    std::vector<std::pair<double, double>> pts;
                    for (const RunRecord& r : out.records)
                        if (r.regime == regime && r.eval_topology == family &&
                            r.train_topology == method)
                            pts.push_back({r.makespan, r.active_energy});
                    if (pts.empty()) continue;
                    eval::EafGrid grid = eval::compute_eaf(pts, denom_mk, denom_en);
                    fs::path p = root / ("eaf_" + regime + "_" + family + "_" + method + ".csv");
                    write_file(p, eval::eaf_csv(grid));
                    out.eaf_files.push_back(p.string());
                }
            }
    }
    fs::path manifest = root / "manifest.json";
    write_file(manifest, make_manifest(cfg, "eval").dump(2) + "\n");
    out.manifest_file = manifest.string();
    return out;
}

// ---------------------------------------------------------------------
// landscape

struct LandscapeOutputs {
    std::string csv_file;
    std::string manifest_file;
    long sequence_count = 0;
    int hilbert_order = 0;
};

inline LandscapeOutputs run_landscape(const RunConfig& cfg) {
    std::shared_ptr<const WorkflowDag> dag;
    std::shared_ptr<const Cluster> cluster;
    if (cfg.landscape.workflow_path.empty()) {
        // built-in small scenario: 5-task wide DAG, two NA hosts
        GenParams p;
        p.n_tasks = 5;
        auto vms = cluster_for_regime(cfg.root_seed, HostRegime::NA, 2);
        dag = std::make_shared<const WorkflowDag>(make_instance("wide", p, 0, vms));
        cluster = std::make_shared<const Cluster>(Cluster{HostRegime::NA, vms});
    } else {
        dag = std::make_shared<const WorkflowDag>(
            workflow_from_json(nlohmann::json::parse(read_file(cfg.landscape.workflow_path))));
        cluster = std::make_shared<const Cluster>(
            cluster_from_json(nlohmann::json::parse(read_file(cfg.landscape.cluster_path))));
    }
    eval::Landscape scape = eval::enumerate_landscape(dag, cluster, cfg.landscape.guard);

    LandscapeOutputs out;
    out.sequence_count = static_cast<long>(scape.points.size());
    out.hilbert_order = scape.order;
    fs::path root(cfg.landscape.out_dir);
    write_file(root / "landscape.csv", eval::landscape_csv(scape));
    out.csv_file = (root / "landscape.csv").string();
    fs::path manifest = root / "manifest.json";
    write_file(manifest, make_manifest(cfg, "landscape").dump(2) + "\n");
    out.manifest_file = manifest.string();
    return out;
}

// ---------------------------------------------------------------------
// report

inline std::vector<RunRecord> parse_results_csv(const std::string& content) {
    std::vector<RunRecord> records;
    std::istringstream in(content);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        RunRecord r;
        std::getline(row, r.regime, ',');
        std::getline(row, r.train_topology, ',');
        std::getline(row, r.eval_topology, ',');
        std::getline(row, field, ',');
        r.workflow_seed = std::stoull(field);
        std::getline(row, field, ',');
        r.makespan = std::stod(field);
        std::getline(row, field, ',');
        r.active_energy = std::stod(field);
        std::getline(row, field, ',');
        r.total_energy = std::stod(field);
        records.push_back(std::move(r));
    }
    return records;
}

struct ReportOutputs {
    std::string summary_text;
    std::string summary_csv;
    std::string correlation_text;
};

// Rebuilds the summary table from a results CSV and, when checkpoint
// logs are given, reports the Pareto-checkpoint correlation per run.
inline ReportOutputs run_report(const std::string& results_csv_path,
                                const std::vector<std::string>& checkpoint_csv_paths) {
    ReportOutputs out;
    auto records = parse_results_csv(read_file(results_csv_path));
    auto rows = eval::summarize_matrix(records);
    out.summary_text = eval::summary_table_text(rows);
    out.summary_csv = eval::summary_table_csv(rows);

    for (const std::string& path : checkpoint_csv_paths) {
        std::istringstream in(read_file(path));
        std::string line;
        std::getline(in, line);
        std::vector<std::pair<double, double>> points;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string step, mk, en;
            std::getline(row, step, ',');
            std::getline(row, mk, ',');
            std::getline(row, en, ',');
            points.push_back({std::stod(mk), std::stod(en)});
        }
        out.correlation_text += path + ":\n";
        char buf[160];
        auto describe = [&](const char* label,
                            const std::vector<std::pair<double, double>>& pts) {
            if (pts.size() < 3) {
                std::snprintf(buf, sizeof(buf), "  %s: %zu points, correlation undefined\n",
                              label, pts.size());
            } else if (auto r = eval::checkpoint_correlation(pts)) {
                std::snprintf(buf, sizeof(buf), "  %s: %zu points, r = %.4f\n", label,
                              pts.size(), *r);
            } else {
                std::snprintf(buf, sizeof(buf), "  %s: %zu points, zero variance\n", label,
                              pts.size());
            }
            out.correlation_text += buf;
        };
        // trajectory coupling over every checkpoint, plus the non-dominated
        // subset (which is anti-monotone by construction, so r <= 0 there)
        describe("all checkpoints", points);
        std::vector<std::pair<double, double>> front;
        for (int i : eval::pareto_filter(points)) front.push_back(points[i]);
        describe("pareto checkpoints", front);
    }
    return out;
}

}  // namespace schedlab::pipeline
