#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ionreadout::nn {

struct AdadeltaConfig {
    double rho = 0.95;     // accumulator decay, in (0, 1)
    double epsilon = 1e-6;  // > 0

    void validate() const;

    bool operator==(const AdadeltaConfig&) const = default;
};

/// Decayed second moments for one parameter tensor.
struct AdadeltaAccumulator {
    std::vector<double> mean_sq_grad;    // E[g^2]
    std::vector<double> mean_sq_update;  // E[dx^2]

    explicit AdadeltaAccumulator(std::size_t size = 0) : mean_sq_grad(size, 0.0), mean_sq_update(size, 0.0) {}
};

/// One ADADELTA update, elementwise:
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   dx      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
///   x       <- x + dx
void adadelta_step(AdadeltaAccumulator& acc, std::span<double> params, std::span<const double> grads,
                   const AdadeltaConfig& config);

/// Accumulators for every tensor of a model, addressed by slot.
class AdadeltaState {
public:
    AdadeltaState(std::span<const std::size_t> tensor_sizes, AdadeltaConfig config);

    void step(std::size_t slot, std::span<double> params, std::span<const double> grads)
    {
        adadelta_step(slots_.at(slot), params, grads, config_);
    }

    const AdadeltaAccumulator& slot(std::size_t i) const { return slots_.at(i); }
    const AdadeltaConfig& config() const { return config_; }

private:
    std::vector<AdadeltaAccumulator> slots_;
    AdadeltaConfig config_;
};

}  // namespace ionreadout::nn
