#include "ionreadout/training.hpp"

#include "ionreadout/eval.hpp"

#include <ostream>

namespace ionreadout::nn {

void TrainConfig::validate() const
{
    adadelta.validate();
    if (batch_size < 1) {
        throw std::invalid_argument("train config: batch_size must be >= 1");
    }
    if (epochs < 1) {
        throw std::invalid_argument("train config: epochs must be >= 1");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train config: train_fraction must lie in (0, 1)");
    }
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("train config: validation_fraction must lie in [0, 1)");
    }
    if (patience < 0) {
        throw std::invalid_argument("train config: patience must be >= 0");
    }
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history)
{
    const auto old_precision = out.precision(10);
    out << "epoch,train_loss,validation_fidelity\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << r.train_loss << ',';
        if (std::isfinite(r.validation_fidelity)) {
            out << r.validation_fidelity;
        }
        out << '\n';
    }
    out.precision(old_precision);
}

HoldOut hold_out(std::span<const std::size_t> labels, double fraction, std::uint64_t seed)
{
    // eval::split keeps `fraction` of each label; here that part is the fit set.
    auto parts = eval::split(labels, 1.0 - fraction, seed);
    return {std::move(parts.train), std::move(parts.test)};
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

std::vector<std::size_t> gather(std::span<const std::size_t> values, std::span<const std::size_t> rows)
{
    std::vector<std::size_t> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) {
        out.push_back(values[r]);
    }
    return out;
}

double average_fidelity(int n_ions, std::span<const std::size_t> predicted, std::span<const std::size_t> truth)
{
    return eval::fidelity(eval::confusion(n_ions, predicted, truth)).average;
}

std::size_t argmax(const Eigen::Ref<const Eigen::VectorXd>& values)
{
    std::size_t best = 0;
    for (Eigen::Index k = 1; k < values.size(); ++k) {
        if (values(k) > values(static_cast<Eigen::Index>(best))) {
            best = static_cast<std::size_t>(k);
        }
    }
    return best;
}

}  // namespace ionreadout::nn
