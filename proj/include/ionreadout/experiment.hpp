#pragma once

#include "ionreadout/config.hpp"
#include "ionreadout/eval.hpp"
#include "ionreadout/lstm.hpp"
#include "ionreadout/readout_sim.hpp"
#include "ionreadout/training.hpp"

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace ionreadout::cli {

/// A dataset with its class indices and the split every strategy shares.
struct PreparedData {
    sim::Dataset dataset;
    std::vector<std::size_t> labels;
    eval::Split split;
};

/// Reads config.dataset_file when set, otherwise simulates. The split is
/// drawn from the training seed.
PreparedData prepare_data(const ExperimentConfig& config);
PreparedData prepare_data(const ExperimentConfig& config, sim::Dataset dataset);

features::FeatureSpec feature_spec(Strategy strategy, const ExperimentConfig& config,
                                   const sim::DetectorGeometry& geometry);

struct StrategyOutcome {
    Strategy strategy = Strategy::FT;
    bool ok = false;
    std::string error;
    eval::FidelityReport report;
    std::vector<std::size_t> predictions;  // test split order
    nlohmann::json model;
    std::vector<nn::EpochRecord> history;
    std::optional<rnn::LstmModel> lstm;
    // adaptive threshold only
    std::size_t unconverged = 0;
    double mean_iterations = 0.0;
    double seconds = 0.0;
};

/// Fits or trains one strategy on the train split and scores it on the test
/// split. Failures are captured in the outcome rather than thrown.
StrategyOutcome run_strategy(Strategy strategy, const ExperimentConfig& config, const PreparedData& data);

struct RunResult {
    std::vector<StrategyOutcome> outcomes;

    const StrategyOutcome* find(Strategy s) const;
};

RunResult run_experiment(const ExperimentConfig& config, const PreparedData& data);

/// JSON summary: seeds, split sizes, per-strategy averages, improvements over
/// FT and AT where both are present, failures.
nlohmann::json summarize(const ExperimentConfig& config, const PreparedData& data, const RunResult& result);

struct SweepPoint {
    double detection_time_us = 0.0;
    int bins = 0;
    eval::FidelityReport report;
};

/// Scores the model on every prefix 0..rnn_bins of the test sequences.
std::vector<SweepPoint> sweep_detection_time(const rnn::LstmModel& model, const ExperimentConfig& config,
                                             const PreparedData& data);

/// Feature row of the probed ion's own channel in the RNN input.
int probe_channel_row(const ExperimentConfig& config, const sim::DetectorGeometry& geometry);

}  // namespace ionreadout::cli
