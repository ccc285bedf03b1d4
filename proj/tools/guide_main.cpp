#include <iostream>
#include <ostream>
#include <streambuf>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "guide/cli.hpp"
#include "guide/config.hpp"

namespace {

struct NullBuffer : std::streambuf {
    int overflow(int c) override { return c; }
};

int dispatch(const std::string& command, guide::RunConfig& cfg, std::ostream& log,
             const std::string& target_path, const std::string& designs_path,
             const std::string& out_dir) {
    using namespace guide::cli;
    if (command == "gen-data") return cmd_gen_data(cfg, log);
    if (command == "train") return cmd_train(cfg, log);
    if (command == "design") return cmd_design(cfg, log, target_path, out_dir);
    if (command == "evaluate") {
        const std::string target = target_path.empty() ? cfg.paths.target : target_path;
        return cmd_evaluate(cfg, log, designs_path, target);
    }
    if (command == "benchmark") {
        if (!out_dir.empty()) cfg.paths.out_dir = out_dir;
        return cmd_benchmark(cfg, log);
    }
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GUIDe: uncertainty-informed inverse design for functional responses"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> seed_overrides;
    std::string out_dir;
    bool quiet = false;

    app.add_option("--config", config_path, "Run configuration JSON")->required();
    app.add_option("--seed-override", seed_overrides,
                   "Override a named seed, NAME=VALUE (data|train|design)");
    app.add_option("--out", out_dir, "Output directory override");
    app.add_flag("--quiet", quiet, "Suppress progress output");

    auto* design = app.add_subcommand("design", "Generate designs for a target response");
    std::string target_path;
    design->add_option("--target", target_path, "Target spec JSON (overrides paths.target)");

    auto* evaluate = app.add_subcommand("evaluate", "Oracle-validate designs and compute metrics");
    std::string designs_path;
    evaluate->add_option("--designs", designs_path, "Designs CSV")->required();
    evaluate->add_option("--target", target_path, "Target spec JSON (overrides paths.target)");

    app.add_subcommand("gen-data", "Generate train/val/test datasets");
    app.add_subcommand("train", "Train the surrogate ensemble");
    app.add_subcommand("benchmark", "Run the GUIDe-vs-GA benchmark over test targets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : guide::cli::kExitUsage;
    }

    NullBuffer null_buffer;
    std::ostream null_stream(&null_buffer);
    std::ostream& log = quiet ? null_stream : std::cout;

    try {
        guide::RunConfig cfg = guide::load_run_config(config_path);
        for (const auto& ov : seed_overrides) guide::apply_seed_override(cfg, ov);
        if (!out_dir.empty()) cfg.paths.out_dir = out_dir;
        const std::string command = app.get_subcommands().front()->get_name();
        return dispatch(command, cfg, log, target_path, designs_path, out_dir);
    } catch (const guide::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return guide::cli::kExitUsage;
    } catch (const guide::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return guide::cli::kExitUsage;
    } catch (const guide::RangesInfeasible& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return guide::cli::kExitData;
    } catch (const guide::TrainingFailed& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return guide::cli::kExitTraining;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
