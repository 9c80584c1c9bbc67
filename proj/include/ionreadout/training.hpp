#pragma once

#include "ionreadout/adadelta.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ionreadout::nn {

struct TrainConfig {
    std::size_t batch_size = 128;
    int epochs = 50;
    AdadeltaConfig adadelta;
    std::uint64_t seed = 1;
    /// Fraction of the dataset used for training; the rest is the test split.
    double train_fraction = 0.8;
    /// Fraction of the training split held out to pick the best epoch.
    /// Zero trains on everything and keeps the last epoch.
    double validation_fraction = 0.1;
    /// Epochs without a validation improvement before stopping; 0 disables.
    int patience = 5;

    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double validation_fidelity = std::numeric_limits<double>::quiet_NaN();
};

/// Raised when the loss stops being finite.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// CSV: epoch,train_loss,validation_fidelity
void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

/// Stratified hold-out of `fraction` of the rows for validation.
struct HoldOut {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> validation;
};
HoldOut hold_out(std::span<const std::size_t> labels, double fraction, std::uint64_t seed);

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows);
std::vector<std::size_t> gather(std::span<const std::size_t> values, std::span<const std::size_t> rows);

/// Average detection fidelity of predicted vs true class indices.
double average_fidelity(int n_ions, std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(const Eigen::Ref<const Eigen::VectorXd>& values);

/// Model-specific pieces of the mini-batch loop.
///   double Ops::batch_gradients(const Model&, const MatrixXd& x, span<const size_t> y, Gradients&)
///       fills Gradients with the mean-loss gradient and returns the mean loss
///   std::vector<std::span<double>> Ops::parameters(Model&)
///   std::vector<std::span<const double>> Ops::gradients(const Gradients&)
///   std::vector<std::size_t> Ops::predict(const Model&, const MatrixXd& x)
template <typename Model, typename Gradients, typename Ops>
std::vector<EpochRecord> run_adadelta(Model& model, Gradients& grads, const Eigen::MatrixXd& x,
                                      std::span<const std::size_t> labels, int n_ions,
                                      const TrainConfig& config, Ops& ops)
{
    config.validate();
    HoldOut parts;
    if (config.validation_fraction > 0.0) {
        parts = hold_out(labels, config.validation_fraction, config.seed ^ 0x76616c6964ULL);
    } else {
        parts.fit.resize(labels.size());
        std::iota(parts.fit.begin(), parts.fit.end(), std::size_t{0});
    }
    const Eigen::MatrixXd x_fit = gather_rows(x, parts.fit);
    const std::vector<std::size_t> y_fit = gather(labels, parts.fit);
    const Eigen::MatrixXd x_val = gather_rows(x, parts.validation);
    const std::vector<std::size_t> y_val = gather(labels, parts.validation);

    std::vector<std::size_t> sizes;
    for (const auto& p : ops.parameters(model)) {
        sizes.push_back(p.size());
    }
    AdadeltaState optimizer(sizes, config.adadelta);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(parts.fit.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<EpochRecord> history;
    Model best = model;
    double best_fidelity = -1.0;
    int stale = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            const Eigen::MatrixXd xb = gather_rows(x_fit, rows);
            const std::vector<std::size_t> yb = gather(y_fit, rows);
            const double loss = ops.batch_gradients(model, xb, yb, grads);
            if (!std::isfinite(loss)) {
                throw TrainingError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batches) + " (batch size " +
                                    std::to_string(rows.size()) + ")");
            }
            auto params = ops.parameters(model);
            const auto g = ops.gradients(grads);
            for (std::size_t slot = 0; slot < params.size(); ++slot) {
                optimizer.step(slot, params[slot], g[slot]);
            }
            loss_sum += loss;
            ++batches;
        }
        EpochRecord record{epoch, loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1))};
        if (!y_val.empty()) {
            record.validation_fidelity = average_fidelity(n_ions, ops.predict(model, x_val), y_val);
            if (record.validation_fidelity > best_fidelity) {
                best_fidelity = record.validation_fidelity;
                best = model;
                stale = 0;
            } else {
                ++stale;
            }
        }
        history.push_back(record);
        if (config.patience > 0 && stale >= config.patience) {
            break;
        }
    }
    if (!y_val.empty()) {
        model = std::move(best);
    }
    return history;
}

}  // namespace ionreadout::nn
