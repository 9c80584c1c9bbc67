#pragma once

#include "ionreadout/features.hpp"
#include "ionreadout/training.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ionreadout::nn {

/// Feed-forward classifier: input -> rectifier -> rectifier -> softmax.
/// Each neuron outputs f(sum_k w_k x_k + b).
struct MlpModel {
    static constexpr int kMinHidden = 8;
    static constexpr int kMaxHidden = 40;

    std::vector<int> layer_sizes;           // {input, hidden1, hidden2, classes}
    std::vector<Eigen::MatrixXd> weights;   // weights[l] is layer_sizes[l+1] x layer_sizes[l]
    std::vector<Eigen::VectorXd> biases;
    Eigen::VectorXd input_scale;            // raw features are divided by this

    /// All parameters zero, unit input scale.
    static MlpModel zeros(std::vector<int> layer_sizes);
    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    static MlpModel glorot(std::vector<int> layer_sizes, std::uint64_t seed);

    int input_width() const { return layer_sizes.front(); }
    int num_classes() const { return layer_sizes.back(); }
    int n_ions() const;

    /// Throws std::invalid_argument on a malformed architecture: anything
    /// but two hidden layers of width 8..40, or a class count that is not a
    /// power of two.
    void validate() const;
};

/// Max-subtracted softmax.
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

/// -ln(max(p_true, 1e-12)).
double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& probabilities, std::size_t label);

/// Class probabilities for one raw feature vector. Rejects non-finite input.
Eigen::VectorXd forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// One row of probabilities per row of `x`.
Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& x);

struct MlpGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static MlpGradients zeros_like(const MlpModel& model);
};

/// Exact gradients of cross_entropy(forward(x), label). The rectifier's
/// derivative at 0 is taken as 0.
MlpGradients backward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t label);

/// Mean cross-entropy over the rows of `x` and its gradient.
double batch_gradients(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const std::size_t> labels,
                       MlpGradients& grads);

/// Most probable class (lowest index on ties).
std::size_t predict_index(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
std::string predict(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
std::vector<std::size_t> predict_batch(const MlpModel& model, const Eigen::MatrixXd& x);

struct MlpTrainResult {
    MlpModel model;
    std::vector<EpochRecord> history;
};

/// Mini-batch ADADELTA on cross-entropy. Input scaling is fitted on `x`
/// (the training split) and stored in the model. Deterministic for a given
/// config seed.
MlpTrainResult train(const Eigen::MatrixXd& x, std::span<const std::size_t> labels,
                     std::array<int, 2> hidden, int n_ions, const TrainConfig& config,
                     features::Normalization normalization = features::Normalization::training_max);

nlohmann::json to_json(const MlpModel& model);
MlpModel mlp_from_json(const nlohmann::json& j);

}  // namespace ionreadout::nn
