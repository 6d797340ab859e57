#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "schedlab/generator.hpp"
#include "schedlab/ppo.hpp"
#include "schedlab/version.hpp"

namespace schedlab {

struct GenerationConfig {
    GenParams params;                       // params.n_tasks == 0: sample per seed
    std::pair<int, int> n_tasks_range{10, 30};
    std::vector<std::string> families{"wide", "longcp"};
    std::vector<std::string> regimes{"HS", "HP", "AL", "NA"};
    int n_vms = 4;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::string out_dir = "out/instances";

    GenerationConfig() { params.n_tasks = 0; }
};

struct TrainingConfig {
    ppo::PpoConfig ppo;
    std::string topology = "wide";
    std::string regime = "NA";
    int n_vms = 4;
    std::vector<std::uint64_t> train_seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int n_tasks = 0;  // 0: sample per seed from generation.n_tasks_range
    std::string out_dir = "out/train";
};

struct EvaluationConfig {
    std::string checkpoint_dir = "out/train";
    std::vector<std::string> regimes{"HS", "HP", "AL", "NA"};
    std::vector<std::string> families{"wide", "longcp"};
    std::vector<std::uint64_t> eval_seeds;  // default 1000..1099
    int n_vms = 4;
    bool include_baselines = true;
    bool write_eaf = false;
    std::string out_dir = "out/eval";

    EvaluationConfig() {
        for (std::uint64_t s = 1000; s < 1100; ++s) eval_seeds.push_back(s);
    }
};

struct LandscapeConfig {
    std::string workflow_path;  // empty: a built-in small scenario
    std::string cluster_path;
    long guard = 10'000'000;
    std::string out_dir = "out/landscape";
};

struct RunConfig {
    std::uint64_t root_seed = 0;
    GenerationConfig generation;
    TrainingConfig training;
    EvaluationConfig evaluation;
    LandscapeConfig landscape;
};

namespace cfgdetail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config field " + path + ": " + what);
}

template <typename T>
void read(const nlohmann::json& j, const std::string& section, const std::string& key,
          T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(section + "." + key, e.what());
    }
}

template <typename T>
void read_pair(const nlohmann::json& j, const std::string& section, const std::string& key,
               std::pair<T, T>& out) {
    if (!j.contains(key)) return;
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != 2) fail(section + "." + key, "expected [min, max]");
    try {
        out = {arr.at(0).get<T>(), arr.at(1).get<T>()};
    } catch (const nlohmann::json::exception& e) {
        fail(section + "." + key, e.what());
    }
}

}  // namespace cfgdetail

inline nlohmann::json to_json(const GenParams& p) {
    return {{"n_tasks", p.n_tasks},
            {"depth_range", {p.depth_range.first, p.depth_range.second}},
            {"width_range", {p.width_range.first, p.width_range.second}},
            {"branch_prob", p.branch_prob},
            {"work_range", {p.work_range.first, p.work_range.second}},
            {"cpu_range", {p.cpu_range.first, p.cpu_range.second}},
            {"mem_range", {p.mem_range.first, p.mem_range.second}}};
}

inline GenParams gen_params_from_json(const nlohmann::json& j, const std::string& section) {
    GenParams p;
    cfgdetail::read(j, section, "n_tasks", p.n_tasks);
    cfgdetail::read_pair(j, section, "depth_range", p.depth_range);
    cfgdetail::read_pair(j, section, "width_range", p.width_range);
    cfgdetail::read(j, section, "branch_prob", p.branch_prob);
    cfgdetail::read_pair(j, section, "work_range", p.work_range);
    cfgdetail::read_pair(j, section, "cpu_range", p.cpu_range);
    cfgdetail::read_pair(j, section, "mem_range", p.mem_range);
    return p;
}

inline nlohmann::json to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["root_seed"] = cfg.root_seed;

    nlohmann::json g = to_json(cfg.generation.params);
    g["n_tasks_range"] = {cfg.generation.n_tasks_range.first,
                          cfg.generation.n_tasks_range.second};
    g["families"] = cfg.generation.families;
    g["regimes"] = cfg.generation.regimes;
    g["n_vms"] = cfg.generation.n_vms;
    g["seeds"] = cfg.generation.seeds;
    g["out_dir"] = cfg.generation.out_dir;
    j["generation"] = g;

    const ppo::PpoConfig& p = cfg.training.ppo;
    j["training"] = {{"topology", cfg.training.topology},
                     {"regime", cfg.training.regime},
                     {"n_vms", cfg.training.n_vms},
                     {"train_seeds", cfg.training.train_seeds},
                     {"n_tasks", cfg.training.n_tasks},
                     {"out_dir", cfg.training.out_dir},
                     {"total_timesteps", p.total_timesteps},
                     {"n_envs", p.n_envs},
                     {"steps_per_env", p.steps_per_env},
                     {"minibatches", p.minibatches},
                     {"epochs", p.epochs},
                     {"lr", p.lr},
                     {"gamma", p.gamma},
                     {"lam", p.lam},
                     {"clip", p.clip},
                     {"w_makespan", p.w_makespan},
                     {"w_energy", p.w_energy},
                     {"value_coef", p.value_coef},
                     {"entropy_coef", p.entropy_coef},
                     {"max_grad_norm", p.max_grad_norm},
                     {"normalize_advantages", p.normalize_advantages},
                     {"hidden", p.hidden},
                     {"checkpoint_every", p.checkpoint_every}};

    j["evaluation"] = {{"checkpoint_dir", cfg.evaluation.checkpoint_dir},
                       {"regimes", cfg.evaluation.regimes},
                       {"families", cfg.evaluation.families},
                       {"eval_seeds", cfg.evaluation.eval_seeds},
                       {"n_vms", cfg.evaluation.n_vms},
                       {"include_baselines", cfg.evaluation.include_baselines},
                       {"write_eaf", cfg.evaluation.write_eaf},
                       {"out_dir", cfg.evaluation.out_dir}};

    j["landscape"] = {{"workflow", cfg.landscape.workflow_path},
                      {"cluster", cfg.landscape.cluster_path},
                      {"guard", cfg.landscape.guard},
                      {"out_dir", cfg.landscape.out_dir}};
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfgdetail::read(j, "", "root_seed", cfg.root_seed);
    if (j.contains("generation")) {
        const auto& g = j.at("generation");
        cfg.generation.params = gen_params_from_json(g, "generation");
        cfgdetail::read_pair(g, "generation", "n_tasks_range", cfg.generation.n_tasks_range);
        cfgdetail::read(g, "generation", "families", cfg.generation.families);
        cfgdetail::read(g, "generation", "regimes", cfg.generation.regimes);
        cfgdetail::read(g, "generation", "n_vms", cfg.generation.n_vms);
        cfgdetail::read(g, "generation", "seeds", cfg.generation.seeds);
        cfgdetail::read(g, "generation", "out_dir", cfg.generation.out_dir);
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        TrainingConfig& tc = cfg.training;
        cfgdetail::read(t, "training", "topology", tc.topology);
        cfgdetail::read(t, "training", "regime", tc.regime);
        cfgdetail::read(t, "training", "n_vms", tc.n_vms);
        cfgdetail::read(t, "training", "train_seeds", tc.train_seeds);
        cfgdetail::read(t, "training", "n_tasks", tc.n_tasks);
        cfgdetail::read(t, "training", "out_dir", tc.out_dir);
        ppo::PpoConfig& p = tc.ppo;
        cfgdetail::read(t, "training", "total_timesteps", p.total_timesteps);
        cfgdetail::read(t, "training", "n_envs", p.n_envs);
        cfgdetail::read(t, "training", "steps_per_env", p.steps_per_env);
        cfgdetail::read(t, "training", "minibatches", p.minibatches);
        cfgdetail::read(t, "training", "epochs", p.epochs);
        cfgdetail::read(t, "training", "lr", p.lr);
        cfgdetail::read(t, "training", "gamma", p.gamma);
        cfgdetail::read(t, "training", "lam", p.lam);
        cfgdetail::read(t, "training", "clip", p.clip);
        cfgdetail::read(t, "training", "w_makespan", p.w_makespan);
        cfgdetail::read(t, "training", "w_energy", p.w_energy);
        cfgdetail::read(t, "training", "value_coef", p.value_coef);
        cfgdetail::read(t, "training", "entropy_coef", p.entropy_coef);
        cfgdetail::read(t, "training", "max_grad_norm", p.max_grad_norm);
        cfgdetail::read(t, "training", "normalize_advantages", p.normalize_advantages);
        cfgdetail::read(t, "training", "hidden", p.hidden);
        cfgdetail::read(t, "training", "checkpoint_every", p.checkpoint_every);
        try {
            p.validate();
        } catch (const std::invalid_argument& e) {
            cfgdetail::fail("training", e.what());
        }
    }
    if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        cfgdetail::read(e, "evaluation", "checkpoint_dir", cfg.evaluation.checkpoint_dir);
        cfgdetail::read(e, "evaluation", "regimes", cfg.evaluation.regimes);
        cfgdetail::read(e, "evaluation", "families", cfg.evaluation.families);
        cfgdetail::read(e, "evaluation", "eval_seeds", cfg.evaluation.eval_seeds);
        cfgdetail::read(e, "evaluation", "n_vms", cfg.evaluation.n_vms);
        cfgdetail::read(e, "evaluation", "include_baselines",
                        cfg.evaluation.include_baselines);
        cfgdetail::read(e, "evaluation", "write_eaf", cfg.evaluation.write_eaf);
        cfgdetail::read(e, "evaluation", "out_dir", cfg.evaluation.out_dir);
    }
    if (j.contains("landscape")) {
        const auto& l = j.at("landscape");
        cfgdetail::read(l, "landscape", "workflow", cfg.landscape.workflow_path);
        cfgdetail::read(l, "landscape", "cluster", cfg.landscape.cluster_path);
        cfgdetail::read(l, "landscape", "guard", cfg.landscape.guard);
        cfgdetail::read(l, "landscape", "out_dir", cfg.landscape.out_dir);
    }
    for (const std::string& r : cfg.generation.regimes) regime_from_string(r);
    for (const std::string& r : cfg.evaluation.regimes) regime_from_string(r);
    return cfg;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
    return to_json(a) == to_json(b);
}

inline std::string config_hash(const RunConfig& cfg) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(to_json(cfg).dump())));
    return buf;
}

// Every artifact directory gets one of these beside its outputs: enough
// to regenerate the files exactly.
inline nlohmann::json make_manifest(const RunConfig& cfg, const std::string& command) {
    return {{"tool", "schedlab"},
            {"version", kVersion},
            {"command", command},
            {"root_seed", cfg.root_seed},
            {"config_hash", config_hash(cfg)},
            {"config", to_json(cfg)}};
}

}  // namespace schedlab
