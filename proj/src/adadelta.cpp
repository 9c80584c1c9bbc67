#include "ionreadout/adadelta.hpp"

#include <cmath>
#include <stdexcept>

namespace ionreadout::nn {

void AdadeltaConfig::validate() const
{
    if (!(rho > 0.0 && rho < 1.0)) {
        throw std::invalid_argument("adadelta: rho must lie in (0, 1)");
    }
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw std::invalid_argument("adadelta: epsilon must be positive");
    }
}

void adadelta_step(AdadeltaAccumulator& acc, std::span<double> params, std::span<const double> grads,
                   const AdadeltaConfig& config)
{
    if (params.size() != grads.size() || params.size() != acc.mean_sq_grad.size()) {
        throw std::invalid_argument("adadelta: parameter, gradient and accumulator sizes differ");
    }
    const double rho = config.rho;
    const double eps = config.epsilon;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grads[k];
        acc.mean_sq_grad[k] = rho * acc.mean_sq_grad[k] + (1.0 - rho) * g * g;
        const double dx = -std::sqrt(acc.mean_sq_update[k] + eps) / std::sqrt(acc.mean_sq_grad[k] + eps) * g;
        acc.mean_sq_update[k] = rho * acc.mean_sq_update[k] + (1.0 - rho) * dx * dx;
        params[k] += dx;
    }
}

AdadeltaState::AdadeltaState(std::span<const std::size_t> tensor_sizes, AdadeltaConfig config)
    : config_(config)
{
    config_.validate();
    for (std::size_t n : tensor_sizes) {
        slots_.emplace_back(n);
    }
}

}  // namespace ionreadout::nn
