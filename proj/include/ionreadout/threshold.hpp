#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ionreadout::threshold {

/// Total photon counts on each ion's own channel, ion order.
using CountVector = std::vector<int>;

/// Count-cutoff discriminator: ion i reads bright iff count_i > thresholds[i].
struct FixedThresholdModel {
    std::vector<int> thresholds;

    bool operator==(const FixedThresholdModel&) const = default;
};

struct FixedFitOptions {
    /// One threshold shared by every ion, fitted on the pooled marginals.
    /// When false each ion channel gets its own.
    bool shared = true;
};

/// Threshold minimizing P(bright read dark) + P(dark read bright) over the
/// integers 0..max(observed count); ties go to the smaller threshold.
/// Throws std::invalid_argument if either class is empty.
int best_threshold(std::span<const int> bright_counts, std::span<const int> dark_counts);

/// `labels` are class indices (see labels.hpp). Throws when an ion never
/// appears in one of its two states.
FixedThresholdModel fit_fixed(std::span<const CountVector> counts, std::span<const std::size_t> labels,
                              int n_ions, const FixedFitOptions& options = {});

std::string classify_fixed(const FixedThresholdModel& model, std::span<const int> counts);
std::size_t classify_fixed_index(const FixedThresholdModel& model, std::span<const int> counts);

/// Neighbor-conditioned thresholds. Each ion's neighbors are the adjacent
/// ions in the chain; a context is their joint bit state written as a
/// bitstring in chain order (left neighbor first).
struct AdaptiveThresholdModel {
    FixedThresholdModel initial;
    std::vector<std::vector<int>> neighbors;           // per ion
    std::vector<std::vector<int>> context_thresholds;  // [ion][context index]
    int max_iterations = 10;
    /// "ion:context" entries that fell back to the fixed threshold.
    std::vector<std::string> starved_contexts;

    int num_ions() const { return static_cast<int>(neighbors.size()); }
    int threshold(int ion, const std::string& context) const;

    bool operator==(const AdaptiveThresholdModel&) const = default;
};

struct AdaptiveFitOptions {
    std::size_t min_context_samples = 100;
    int max_iterations = 10;
    FixedFitOptions fixed;
};

std::vector<int> chain_neighbors(int ion, int n_ions);

AdaptiveThresholdModel fit_adaptive(std::span<const CountVector> counts, std::span<const std::size_t> labels,
                                    int n_ions, const AdaptiveFitOptions& options = {});

struct AdaptiveResult {
    std::string label;
    int iterations = 0;
    bool converged = false;
};

/// Starts from the fixed-threshold label and re-thresholds every ion
/// synchronously using the context implied by the current label, until the
/// label stops changing or the iteration cap is hit.
AdaptiveResult classify_adaptive(const AdaptiveThresholdModel& model, std::span<const int> counts);

nlohmann::json to_json(const FixedThresholdModel& model);
nlohmann::json to_json(const AdaptiveThresholdModel& model);
FixedThresholdModel fixed_from_json(const nlohmann::json& j);
AdaptiveThresholdModel adaptive_from_json(const nlohmann::json& j);

}  // namespace ionreadout::threshold
