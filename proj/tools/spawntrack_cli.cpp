#include "spawntrack/spawntrack.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

namespace {

using spawntrack::io::ExperimentConfig;

/// Loads the config file if given and applies command-line overrides.
ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed,
                      const std::optional<int>& mc_runs) {
    ExperimentConfig c = path.empty() ? ExperimentConfig{} : spawntrack::io::load_config(path);
    if (seed) c.base_seed = *seed;
    if (mc_runs) c.mc_runs = *mc_runs;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Nonparametric multi-object tracking with spawning"};
    cli.set_version_flag("--version", std::string("spawntrack ") + spawntrack::version);
    cli.require_subcommand(1);

    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> mc_runs;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Flat key = value configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override base_seed");
    };

    auto* simulate = cli.add_subcommand("simulate", "Generate a scenario file");
    common(simulate);
    simulate->add_option("--out", out, "Scenario file to write")->required();

    std::string scenario_path;
    auto* track = cli.add_subcommand("track", "Run the tracker on a scenario file");
    common(track);
    track->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
    track->add_option("--out", out, "Output directory")->required();

    std::string estimates_path;
    auto* evaluate = cli.add_subcommand("evaluate", "Score estimates against a scenario");
    common(evaluate);
    evaluate->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--estimates", estimates_path, "Estimates CSV")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", out, "Metrics CSV to write")->required();

    auto* experiment = cli.add_subcommand("experiment", "Run a Monte-Carlo experiment");
    common(experiment);
    experiment->add_option("--mc-runs", mc_runs, "Override mc_runs");
    experiment->add_option("--out", out, "Override output_dir");

    CLI11_PARSE(cli, argc, argv);

    try {
        ExperimentConfig config = load(config_path, seed, mc_runs);
        if (*simulate) {
            spawntrack::app::cmd_simulate(config, out, std::cout);
        } else if (*track) {
            spawntrack::app::cmd_track(scenario_path, config, out, std::cout);
        } else if (*evaluate) {
            spawntrack::app::cmd_evaluate(scenario_path, estimates_path, config.metric, out, std::cout);
        } else if (*experiment) {
            if (!out.empty()) config.output_dir = out;
            spawntrack::app::cmd_experiment(config, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
