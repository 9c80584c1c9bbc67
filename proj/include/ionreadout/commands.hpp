#pragma once

#include "ionreadout/config.hpp"
#include "ionreadout/experiment.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace ionreadout::cli {

// Each command writes into `out_dir` (created if needed) and returns what
// it wrote. CSV outputs start with a "# data_seed=... train_seed=..." line.

struct GenerateOutput {
    std::filesystem::path dataset_path;
    /// Per label: mean clicks on each recorded channel, ascending channel.
    nlohmann::json summary;
};

/// dataset.jsonl plus generate_summary.json.
GenerateOutput cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct RunOutput {
    RunResult result;
    nlohmann::json summary;
};

/// report.csv, summary.json, model_<tag>.json and history_<tag>.csv per
/// trained strategy.
RunOutput cmd_run(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Loads a model file written by cmd_run. Throws std::runtime_error when the
/// file is missing or holds no LSTM.
rnn::LstmModel load_rnn_model(const std::filesystem::path& path);

struct ProbePoint {
    int bin = 0;
    double t_us = 0.0;  // bin centre
    double p_bright = 0.0;
};

/// probe.csv: bin,t_us,p_bright for a single photon on the probed ion's
/// channel.
std::vector<ProbePoint> cmd_probe(const ExperimentConfig& config, const std::filesystem::path& model_path,
                                  const std::filesystem::path& out_dir);

/// sweep_time.csv: detection_time_us,fidelity,std_error on the test split.
std::vector<SweepPoint> cmd_sweep_time(const ExperimentConfig& config, const std::filesystem::path& model_path,
                                       const std::filesystem::path& out_dir);

}  // namespace ionreadout::cli
