#pragma once

#include "ionreadout/features.hpp"
#include "ionreadout/readout_sim.hpp"
#include "ionreadout/training.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ionreadout::cli {

enum class Strategy { FT, AT, NN, NNPlus, TNN, TNNPlus, RNN };

std::string_view strategy_name(Strategy s);
/// Name usable in file names ("NN+" -> "NNplus").
std::string strategy_file_tag(Strategy s);
Strategy parse_strategy(std::string_view name);
/// Comma-separated list, e.g. "FT,AT,TNN+".
std::vector<Strategy> parse_strategy_list(std::string_view list);

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything one reproduction run needs. The file form is flat
/// `key = value` lines; `#` starts a comment; lists are comma separated.
struct ExperimentConfig {
    // physics
    sim::EmissionModel physics;

    // geometry
    int n_ions = 3;
    int n_channels = 5;
    std::vector<int> ion_channels;  // empty: every other channel, or all channels when n_channels == n_ions
    std::vector<double> crosstalk_row = sim::default_alternating_row();
    bool intermediate_channels = true;

    // dataset
    std::size_t samples_per_label = 8000;
    std::uint64_t data_seed = 2018;
    bool pool_resampling = false;
    unsigned generate_threads = 1;
    std::string dataset_file;  // empty: generate on the fly

    // strategies and features
    std::vector<Strategy> strategies{Strategy::FT, Strategy::AT, Strategy::NN, Strategy::NNPlus,
                                     Strategy::TNN, Strategy::TNNPlus};
    int tnn_bins = 5;   // 30 us bins over 150 us
    int rnn_bins = 15;  // 10 us bins over 150 us
    features::Normalization normalization = features::Normalization::training_max;

    // thresholds
    bool shared_threshold = true;
    std::size_t adaptive_min_context_samples = 100;
    int adaptive_max_iterations = 10;

    // training; training.seed is the training seed
    nn::TrainConfig training{128, 50, {}, 7};
    std::array<int, 2> hidden_nn{8, 8};
    std::array<int, 2> hidden_nn_plus{16, 16};
    std::array<int, 2> hidden_tnn{24, 24};
    std::array<int, 2> hidden_tnn_plus{40, 40};
    int rnn_hidden = 32;
    int rnn_epochs = 50;

    // probe
    int probe_ion = 0;

    /// Throws ConfigError when the parts do not fit together.
    void validate() const;

    sim::DetectorGeometry geometry() const;
    std::vector<int> resolved_ion_channels() const;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Unknown or repeated keys and malformed values are ConfigErrors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_string(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Every key, canonical order, shortest round-trip number formatting.
std::string serialize_config(const ExperimentConfig& config);

/// Documented keys, in serialization order.
const std::vector<std::string>& config_keys();

}  // namespace ionreadout::cli
