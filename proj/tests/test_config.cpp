#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "schedlab/pipeline.hpp"

#include "testutil.hpp"

using namespace schedlab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "schedlab_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig tiny_gen_config(const fs::path& out) {
    RunConfig cfg;
    cfg.generation.params.n_tasks = 6;
    cfg.generation.families = {"wide"};
    cfg.generation.regimes = {"NA"};
    cfg.generation.n_vms = 2;
    cfg.generation.seeds = {0, 1, 2};
    cfg.generation.out_dir = out.string();
    return cfg;
}

}  // namespace

TEST_CASE("default config loads with zero overrides") {
    RunConfig defaults;
    RunConfig loaded = config_from_json(nlohmann::json::object());
    REQUIRE(loaded == defaults);
    REQUIRE(config_from_json(to_json(defaults)) == defaults);
}

TEST_CASE("fully populated config round-trips to equality") {
    RunConfig cfg;
    cfg.root_seed = 42;
    cfg.generation.params.n_tasks = 18;
    cfg.generation.params.branch_prob = 0.4;
    cfg.generation.params.work_range = {50.0, 600.0};
    cfg.generation.n_tasks_range = {5, 9};
    cfg.generation.families = {"longcp"};
    cfg.generation.regimes = {"AL", "NA"};
    cfg.generation.seeds = {7, 8};
    cfg.generation.out_dir = "elsewhere";
    cfg.training.topology = "longcp";
    cfg.training.regime = "HS";
    cfg.training.ppo.total_timesteps = 1234;
    cfg.training.ppo.hidden = 24;
    cfg.training.ppo.lr = 1e-3;
    cfg.evaluation.eval_seeds = {1, 2, 3};
    cfg.evaluation.write_eaf = true;
    cfg.landscape.guard = 500;
    REQUIRE(config_from_json(to_json(cfg)) == cfg);
}

TEST_CASE("invalid batch split is rejected with the field path") {
    nlohmann::json j;
    j["training"]["n_envs"] = 3;
    j["training"]["steps_per_env"] = 5;
    j["training"]["minibatches"] = 4;
    REQUIRE_THROWS_WITH(config_from_json(j),
                        Catch::Matchers::ContainsSubstring("training") &&
                            Catch::Matchers::ContainsSubstring("minibatches"));
}

TEST_CASE("type errors carry the offending field path") {
    nlohmann::json j;
    j["generation"]["n_vms"] = "four";
    REQUIRE_THROWS_WITH(config_from_json(j),
                        Catch::Matchers::ContainsSubstring("generation.n_vms"));
}

TEST_CASE("unknown regimes are rejected") {
    nlohmann::json j;
    j["generation"]["regimes"] = {"HS", "XX"};
    REQUIRE_THROWS_AS(config_from_json(j), std::invalid_argument);
}

TEST_CASE("config hash is stable and sensitive") {
    RunConfig a, b;
    REQUIRE(config_hash(a) == config_hash(b));
    b.root_seed = 1;
    REQUIRE(config_hash(a) != config_hash(b));
}

TEST_CASE("manifest records version, seed, and config hash") {
    RunConfig cfg;
    cfg.root_seed = 9;
    auto m = make_manifest(cfg, "gen");
    REQUIRE(m.at("tool") == "schedlab");
    REQUIRE(m.at("version") == std::string(kVersion));
    REQUIRE(m.at("command") == "gen");
    REQUIRE(m.at("root_seed") == 9);
    REQUIRE(m.at("config_hash") == config_hash(cfg));
    REQUIRE(config_from_json(m.at("config")) == cfg);
}

TEST_CASE("gen pipeline writes the contracted file set, byte-stable") {
    fs::path dir = fresh_dir("gen");
    RunConfig cfg = tiny_gen_config(dir);
    auto out = pipeline::run_generation(cfg);
    REQUIRE(out.workflow_files.size() == 3);
    REQUIRE(out.cluster_files.size() == 1);
    REQUIRE(fs::exists(out.manifest_file));

    auto dag = workflow_from_json(
        nlohmann::json::parse(pipeline::read_file(out.workflow_files[0])));
    REQUIRE(dag.size() == 6);
    auto cluster = cluster_from_json(
        nlohmann::json::parse(pipeline::read_file(out.cluster_files[0])));
    REQUIRE(cluster.regime == HostRegime::NA);
    REQUIRE_FALSE(queue_free_violation(dag, cluster.vms).has_value());

    std::string first = pipeline::read_file(out.workflow_files[0]);
    pipeline::run_generation(cfg);
    REQUIRE(pipeline::read_file(out.workflow_files[0]) == first);
}

TEST_CASE("sampled task counts stay inside the configured range") {
    fs::path dir = fresh_dir("gen_sampled");
    RunConfig cfg = tiny_gen_config(dir);
    cfg.generation.params.n_tasks = 0;
    cfg.generation.n_tasks_range = {6, 9};
    cfg.generation.seeds = {0, 1, 2, 3, 4, 5};
    auto out = pipeline::run_generation(cfg);
    for (const auto& path : out.workflow_files) {
        auto dag = workflow_from_json(nlohmann::json::parse(pipeline::read_file(path)));
        REQUIRE(dag.size() >= 6);
        REQUIRE(dag.size() <= 9);
    }
}

TEST_CASE("train pipeline produces logs and loadable checkpoints") {
    fs::path dir = fresh_dir("train");
    RunConfig cfg;
    cfg.training.topology = "longcp";
    cfg.training.regime = "NA";
    cfg.training.n_vms = 2;
    cfg.training.n_tasks = 5;
    cfg.training.train_seeds = {0, 1, 2};
    cfg.training.out_dir = dir.string();
    cfg.training.ppo.total_timesteps = 64;
    cfg.training.ppo.n_envs = 2;
    cfg.training.ppo.steps_per_env = 8;
    cfg.training.ppo.minibatches = 2;
    cfg.training.ppo.epochs = 2;
    cfg.training.ppo.hidden = 8;
    cfg.training.ppo.checkpoint_every = 32;

    auto out = pipeline::run_training(cfg);
    REQUIRE(fs::exists(out.log_file));
    REQUIRE(fs::exists(out.final_checkpoint_file));
    REQUIRE(out.checkpoint_files.size() == 2);

    std::string log = pipeline::read_file(out.log_file);
    REQUIRE(log.rfind("step,mean_ep_reward,", 0) == 0);
    REQUIRE(std::count(log.begin(), log.end(), '\n') == 5);  // header + 4 iterations

    auto net = nn::PolicyNet::from_checkpoint(
        nlohmann::json::parse(pipeline::read_file(out.final_checkpoint_file)));
    REQUIRE(net.hidden() == 8);
    std::string ckpts = pipeline::read_file(out.checkpoints_file);
    REQUIRE(std::count(ckpts.begin(), ckpts.end(), '\n') == 3);
}

TEST_CASE("eval pipeline covers the configured matrix with baselines") {
    fs::path dir = fresh_dir("eval");
    RunConfig cfg;
    cfg.evaluation.regimes = {"HS", "NA"};
    cfg.evaluation.families = {"wide"};
    cfg.evaluation.eval_seeds = {1000, 1001};
    cfg.evaluation.n_vms = 2;
    cfg.evaluation.checkpoint_dir = (dir / "no_checkpoints").string();
    cfg.evaluation.out_dir = dir.string();
    cfg.generation.params.n_tasks = 6;

    auto out = pipeline::run_evaluation(cfg);
    // specialists absent, 3 baselines x 2 regimes x 1 family x 2 seeds
    REQUIRE(out.records.size() == 12);
    REQUIRE(fs::exists(out.results_file));
    REQUIRE(fs::exists(out.summary_text_file));
    REQUIRE(fs::exists(out.summary_csv_file));

    auto parsed = pipeline::parse_results_csv(pipeline::read_file(out.results_file));
    REQUIRE(parsed.size() == out.records.size());
    REQUIRE(parsed[0].makespan == out.records[0].makespan);

    auto report = pipeline::run_report(out.results_file, {});
    REQUIRE(report.summary_text.find("Host cfg") != std::string::npos);
}

TEST_CASE("landscape pipeline enumerates the built-in scenario") {
    fs::path dir = fresh_dir("landscape");
    RunConfig cfg;
    cfg.landscape.out_dir = dir.string();
    auto out = pipeline::run_landscape(cfg);
    REQUIRE(out.sequence_count > 0);
    REQUIRE(fs::exists(out.csv_file));
    std::string csv = pipeline::read_file(out.csv_file);
    REQUIRE(csv.rfind("d,x,y,energy,makespan\n", 0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == out.sequence_count + 1);
}

TEST_CASE("report computes pareto-front correlation from checkpoint logs") {
    fs::path dir = fresh_dir("report");
    RunConfig cfg = tiny_gen_config(fresh_dir("report_gen"));
    // a made-up results file via the record writer
    std::vector<RunRecord> records;
    RunRecord r;
    r.regime = "NA";
    r.train_topology = "wide";
    r.eval_topology = "wide";
    r.workflow_seed = 1;
    r.makespan = 2.0;
    r.active_energy = 10.0;
    r.total_energy = 20.0;
    records.push_back(r);
    fs::path results = dir / "results.csv";
    pipeline::write_file(results, run_records_csv(records));

    fs::path ckpts = dir / "checkpoints.csv";
    // full trajectory is positively coupled; the non-dominated front is a
    // 3-point descending line
    pipeline::write_file(ckpts,
                         "step,eval_makespan,eval_active_energy\n"
                         "1,1.0,6.0\n2,2.0,4.0\n3,3.0,2.0\n4,4.0,7.0\n5,5.0,8.0\n");
    auto report = pipeline::run_report(results.string(), {ckpts.string()});
    REQUIRE(report.correlation_text.find("all checkpoints: 5 points") != std::string::npos);
    REQUIRE(report.correlation_text.find("pareto checkpoints: 3 points, r = -1.0000") !=
            std::string::npos);
}
