// ionreadout: simulate trapped-ion readout data, fit discriminators, report
// detection fidelities.

#include "ionreadout/commands.hpp"
#include "ionreadout/config.hpp"

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

namespace {

using namespace ionreadout::cli;

struct Overrides {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_data;
    std::optional<std::uint64_t> seed_train;
    std::string strategies;
    std::string dataset;
    std::string model;
};

void add_common(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--config", o.config_path, "Config file (key = value lines); defaults apply when omitted");
    cmd->add_option("--out", o.out_dir, "Output directory");
    cmd->add_option("--seed-data", o.seed_data, "Override the data seed");
    cmd->add_option("--seed-train", o.seed_train, "Override the training/split seed");
    cmd->add_option("--strategies", o.strategies, "Comma-separated subset of FT,AT,NN,NN+,TNN,TNN+,RNN");
}

ExperimentConfig resolve(const Overrides& o)
{
    ExperimentConfig config = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
    if (o.seed_data) {
        config.data_seed = *o.seed_data;
    }
    if (o.seed_train) {
        config.training.seed = *o.seed_train;
    }
    if (!o.strategies.empty()) {
        config.strategies = parse_strategy_list(o.strategies);
    }
    if (!o.dataset.empty()) {
        config.dataset_file = o.dataset;
    }
    config.validate();
    return config;
}

std::filesystem::path model_path(const Overrides& o)
{
    return o.model.empty() ? std::filesystem::path(o.out_dir) / "model_RNN.json" : std::filesystem::path(o.model);
}

int fail(const std::string& kind, const std::string& message)
{
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Trapped-ion readout simulator and discriminator benchmark"};
    app.require_subcommand(1);
    Overrides o;

    auto* generate = app.add_subcommand("generate", "Simulate a labeled dataset");
    add_common(generate, o);

    auto* run = app.add_subcommand("run", "Fit every strategy on one shared split and report fidelities");
    add_common(run, o);
    run->add_option("--dataset", o.dataset, "Read this dataset instead of simulating");

    auto* probe = app.add_subcommand("probe", "Single-photon arrival-time probe of a trained RNN");
    add_common(probe, o);
    probe->add_option("--model", o.model, "RNN model file (default OUT/model_RNN.json)");

    auto* sweep = app.add_subcommand("sweep-time", "RNN fidelity against detection time");
    add_common(sweep, o);
    sweep->add_option("--model", o.model, "RNN model file (default OUT/model_RNN.json)");
    sweep->add_option("--dataset", o.dataset, "Read this dataset instead of simulating");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        const ExperimentConfig config = resolve(o);
        if (generate->parsed()) {
            std::cout << cmd_generate(config, o.out_dir).summary.dump(2) << '\n';
        } else if (run->parsed()) {
            const auto out = cmd_run(config, o.out_dir);
            std::cout << out.summary.dump(2) << '\n';
            for (const auto& r : out.result.outcomes) {
                if (!r.ok) {
                    return fail("strategy", std::string(strategy_name(r.strategy)) + ": " + r.error);
                }
            }
        } else if (probe->parsed()) {
            for (const auto& p : cmd_probe(config, model_path(o), o.out_dir)) {
                std::cout << p.bin << ' ' << p.t_us << ' ' << p.p_bright << '\n';
            }
        } else if (sweep->parsed()) {
            for (const auto& p : cmd_sweep_time(config, model_path(o), o.out_dir)) {
                std::cout << p.detection_time_us << ' ' << p.report.average << ' ' << p.report.average_std_error
                          << '\n';
            }
        }
    } catch (const ConfigError& e) {
        return fail("config", e.what());
    } catch (const std::exception& e) {
        return fail("runtime", e.what());
    }
    return 0;
}
