#pragma once

#include "ionreadout/features.hpp"
#include "ionreadout/training.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

namespace ionreadout::rnn {

/// LSTM over per-bin count vectors with a softmax readout of the final
/// hidden state. Gate rows are stacked in the order input, forget, output,
/// candidate, each block `hidden` rows tall. No peepholes.
struct LstmModel {
    int input_width = 0;
    int hidden = 0;
    int classes = 0;
    Eigen::MatrixXd input_weights;      // 4H x M
    Eigen::MatrixXd recurrent_weights;  // 4H x H
    Eigen::VectorXd gate_bias;          // 4H
    Eigen::MatrixXd readout_weights;    // C x H
    Eigen::VectorXd readout_bias;       // C
    Eigen::VectorXd input_scale;        // M, raw counts are divided by this

    static LstmModel zeros(int input_width, int hidden, int classes);
    /// Glorot-uniform weights, zero biases except the forget gate at 1.
    static LstmModel glorot(int input_width, int hidden, int classes, std::uint64_t seed);

    int n_ions() const;
    void validate() const;
};

struct LstmState {
    Eigen::VectorXd hidden;
    Eigen::VectorXd cell;
};

LstmState initial_state(const LstmModel& model);

/// Advances the recurrence over `sequence` starting from `start`.
/// Throws std::invalid_argument on a width mismatch.
LstmState lstm_run(const LstmModel& model, const features::Sequence& sequence, LstmState start);

Eigen::VectorXd lstm_readout(const LstmModel& model, const LstmState& state);

/// Class probabilities after the whole sequence. An empty sequence yields
/// the readout of the initial state.
Eigen::VectorXd lstm_forward(const LstmModel& model, const features::Sequence& sequence);

struct LstmGradients {
    Eigen::MatrixXd input_weights;
    Eigen::MatrixXd recurrent_weights;
    Eigen::VectorXd gate_bias;
    Eigen::MatrixXd readout_weights;
    Eigen::VectorXd readout_bias;

    static LstmGradients zeros_like(const LstmModel& model);
};

// Batched routines take one sequence per row, time-major: columns
// [t * M, (t + 1) * M) hold bin t. The number of steps is cols / M.

Eigen::MatrixXd forward_batch(const LstmModel& model, const Eigen::MatrixXd& sequences);
std::vector<std::size_t> predict_batch(const LstmModel& model, const Eigen::MatrixXd& sequences);

/// Mean cross-entropy and its gradient by backpropagation through time.
double batch_gradients(const LstmModel& model, const Eigen::MatrixXd& sequences,
                       std::span<const std::size_t> labels, LstmGradients& grads);

LstmGradients lstm_backward(const LstmModel& model, const features::Sequence& sequence, std::size_t label);

/// Flattens sequences of equal length into time-major rows.
Eigen::MatrixXd stack_sequences(std::span<const features::Sequence> sequences, int width);

struct LstmTrainResult {
    LstmModel model;
    std::vector<nn::EpochRecord> history;
};

/// Full-sequence training with mini-batch ADADELTA; `sequences` rows are
/// time-major as above.
LstmTrainResult lstm_train(const Eigen::MatrixXd& sequences, int input_width, std::span<const std::size_t> labels,
                           int hidden, int n_ions, const nn::TrainConfig& config,
                           features::Normalization normalization = features::Normalization::training_max);

/// P(ion bright) for a synthetic shot holding one photon in `bin` on
/// feature row `channel_row` and nothing else: the softmax mass of every
/// label with that ion's bit set.
double probe_arrival_time(const LstmModel& model, int num_bins, int bin, int channel_row, int ion);

/// probe_arrival_time for bins 0..num_bins-1.
std::vector<double> probe_curve(const LstmModel& model, int num_bins, int channel_row, int ion);

nlohmann::json to_json(const LstmModel& model);
LstmModel lstm_from_json(const nlohmann::json& j);

}  // namespace ionreadout::rnn
