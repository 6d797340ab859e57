// schedlab command-line front end: gen / train / eval / landscape / report.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "schedlab/pipeline.hpp"

namespace {

using namespace schedlab;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    auto range_pos = text.find("..");
    if (range_pos != std::string::npos) {
        std::uint64_t lo = std::stoull(text.substr(0, range_pos));
        std::uint64_t hi = std::stoull(text.substr(range_pos + 2));
        if (hi < lo) throw CLI::ValidationError("seeds", "descending range " + text);
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
    if (seeds.empty()) throw CLI::ValidationError("seeds", "empty seed list");
    return seeds;
}

bool quiet() {
    const char* level = std::getenv("SCHEDLAB_LOG");
    return level && std::string(level) == "quiet";
}

// Every command announces the fully-resolved configuration it runs with.
void print_header(const RunConfig& cfg, const std::string& command) {
    if (quiet()) return;
    std::cout << "schedlab " << kVersion << " | command=" << command
              << " | root_seed=" << cfg.root_seed << " | config_hash=" << config_hash(cfg)
              << "\n"
              << to_json(cfg).dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"schedlab: a queue-free workflow-scheduling laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values")
        ->check(CLI::ExistingFile);

    RunConfig cfg;
    // load the file before binding flags so flag defaults show resolved values
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") {
            try {
                cfg = config_from_json(
                    nlohmann::json::parse(pipeline::read_file(argv[i + 1])));
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 1;
            }
        }

    app.add_option("--seed", cfg.root_seed, "root seed for all derived randomness");

    std::string gen_family = "both", gen_regime = "all", gen_seeds, eval_seeds;
    auto* gen = app.add_subcommand("gen", "generate workflow and cluster instances");
    gen->add_option("--family", gen_family, "wide|longcp|both")
        ->check(CLI::IsMember({"wide", "longcp", "both"}));
    gen->add_option("--regime", gen_regime, "HS|HP|AL|NA|all")
        ->check(CLI::IsMember({"HS", "HP", "AL", "NA", "all"}));
    gen->add_option("--seeds", gen_seeds, "seed list: 0..9 or 1,2,3");
    gen->add_option("--n-vms", cfg.generation.n_vms, "cluster size");
    gen->add_option("--n-tasks", cfg.generation.params.n_tasks,
                    "fixed task count (0 samples from n_tasks_range)");
    gen->add_option("--out", cfg.generation.out_dir, "output directory");

    auto* train = app.add_subcommand("train", "train a specialist policy with PPO");
    train->add_option("--topology", cfg.training.topology, "wide|longcp")
        ->check(CLI::IsMember({"wide", "longcp"}));
    train->add_option("--regime", cfg.training.regime, "HS|HP|AL|NA")
        ->check(CLI::IsMember({"HS", "HP", "AL", "NA"}));
    train->add_option("--steps", cfg.training.ppo.total_timesteps, "total environment steps");
    train->add_option("--hidden", cfg.training.ppo.hidden, "embedding width");
    train->add_option("--n-envs", cfg.training.ppo.n_envs, "parallel environments");
    train->add_option("--n-tasks", cfg.training.n_tasks, "fixed task count for training set");
    train->add_option("--n-vms", cfg.training.n_vms, "cluster size");
    train->add_option("--checkpoint-every", cfg.training.ppo.checkpoint_every,
                      "checkpoint cadence in steps");
    train->add_option("--out", cfg.training.out_dir, "output directory");

    bool matrix = true, no_baselines = false;
    auto* eval_cmd = app.add_subcommand("eval", "run the cross-topology x regime matrix");
    eval_cmd->add_flag("--matrix", matrix, "evaluate the full 2x2x4 matrix (default)");
    eval_cmd->add_option("--checkpoints", cfg.evaluation.checkpoint_dir,
                         "directory holding <topology>_<regime>/checkpoint_final.json");
    eval_cmd->add_option("--regimes", cfg.evaluation.regimes, "subset of HS HP AL NA");
    eval_cmd->add_option("--families", cfg.evaluation.families, "subset of wide longcp");
    eval_cmd->add_option("--eval-seeds", eval_seeds, "seed list: 1000..1099 or 1,2,3");
    eval_cmd->add_option("--n-vms", cfg.evaluation.n_vms, "cluster size");
    eval_cmd->add_flag("--eaf", cfg.evaluation.write_eaf, "dump EAF grids per panel");
    eval_cmd->add_flag("--no-baselines", no_baselines, "skip ect/energy-greedy/random rows");
    eval_cmd->add_option("--out", cfg.evaluation.out_dir, "output directory");

    auto* landscape = app.add_subcommand("landscape", "exhaustively enumerate a small instance");
    landscape->add_option("--workflow", cfg.landscape.workflow_path, "workflow JSON")
        ->check(CLI::ExistingFile);
    landscape->add_option("--cluster", cfg.landscape.cluster_path, "cluster JSON")
        ->check(CLI::ExistingFile);
    landscape->add_option("--guard", cfg.landscape.guard, "feasible-sequence cap");
    landscape->add_option("--out", cfg.landscape.out_dir, "output directory");

    std::string report_results;
    std::vector<std::string> report_checkpoints;
    std::string report_out;
    auto* report = app.add_subcommand("report", "summarize results and checkpoint fronts");
    report->add_option("--results", report_results, "results.csv from eval")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("--checkpoints", report_checkpoints,
                       "checkpoints.csv files for Pareto correlation");
    report->add_option("--out", report_out, "directory for summary files (default: print)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            if (gen_family != "both") cfg.generation.families = {gen_family};
            if (gen_regime != "all") cfg.generation.regimes = {gen_regime};
            if (!gen_seeds.empty()) cfg.generation.seeds = parse_seed_list(gen_seeds);
            print_header(cfg, "gen");
            auto out = pipeline::run_generation(cfg);
            std::cout << "wrote " << out.workflow_files.size() << " workflows, "
                      << out.cluster_files.size() << " clusters under "
                      << cfg.generation.out_dir << "\n";
        } else if (*train) {
            print_header(cfg, "train");
            auto out = pipeline::run_training(cfg);
            std::cout << "training complete: " << out.run_dir << "\n"
                      << "  log:        " << out.log_file << "\n"
                      << "  checkpoint: " << out.final_checkpoint_file << "\n";
        } else if (*eval_cmd) {
            if (!eval_seeds.empty()) cfg.evaluation.eval_seeds = parse_seed_list(eval_seeds);
            if (no_baselines) cfg.evaluation.include_baselines = false;
            print_header(cfg, "eval");
            auto out = pipeline::run_evaluation(cfg);
            std::cout << pipeline::read_file(out.summary_text_file)
                      << "results: " << out.results_file << "\n";
        } else if (*landscape) {
            print_header(cfg, "landscape");
            auto out = pipeline::run_landscape(cfg);
            std::cout << "enumerated " << out.sequence_count << " sequences (Hilbert order "
                      << out.hilbert_order << ") -> " << out.csv_file << "\n";
        } else if (*report) {
            print_header(cfg, "report");
            auto out = pipeline::run_report(report_results, report_checkpoints);
            if (report_out.empty()) {
                std::cout << out.summary_text << out.correlation_text;
            } else {
                pipeline::write_file(std::filesystem::path(report_out) / "summary.txt",
                                     out.summary_text + out.correlation_text);
                pipeline::write_file(std::filesystem::path(report_out) / "summary.csv",
                                     out.summary_csv);
                std::cout << "wrote summary under " << report_out << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
