#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ionreadout::eval {

/// 2^N x 2^N tallies; rows are prepared labels, columns measured labels.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int n_ions);

    void add(std::size_t prepared, std::size_t measured, long long count = 1);

    int n_ions() const { return n_ions_; }
    std::size_t size() const { return classes_; }
    long long at(std::size_t prepared, std::size_t measured) const;
    long long row_sum(std::size_t prepared) const;
    long long total() const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    int n_ions_;
    std::size_t classes_;
    std::vector<long long> counts_;
};

/// Throws std::invalid_argument on length mismatches or malformed labels.
ConfusionMatrix confusion(std::span<const std::string> predictions, std::span<const std::string> truths);
ConfusionMatrix confusion(int n_ions, std::span<const std::size_t> predictions,
                          std::span<const std::size_t> truths);

/// Per-state detection fidelities p(measured i | prepared i) and their
/// unweighted mean over all basis states.
struct FidelityReport {
    std::string strategy;
    int n_ions = 0;
    std::vector<double> state_fidelity;
    std::vector<double> state_std_error;  // binomial sqrt(p(1-p)/n)
    std::vector<long long> state_count;
    double average = 0.0;
    double average_std_error = 0.0;  // sqrt(sum se_i^2) / 2^N
};

/// Throws std::invalid_argument if a prepared state has no samples.
FidelityReport fidelity(const ConfusionMatrix& matrix, std::string strategy = {});

/// Relative reduction of the average detection error,
/// ((1 - F_base) - (1 - F_cand)) / (1 - F_base). Undefined when the baseline
/// has no error.
struct Improvement {
    bool defined = false;
    double value = 0.0;
    double std_error = 0.0;
};

Improvement improvement(const FidelityReport& baseline, const FidelityReport& candidate);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Stratified split of sample indices by class label. Within every label a
/// seeded shuffle is cut at round(fraction * count); both index lists come
/// back sorted. Throws if fraction is outside (0, 1) or leaves a label with an
/// empty train or test part.
Split split(std::span<const std::size_t> labels, double fraction, std::uint64_t seed);

/// CSV: strategy,state,fidelity,std_error; one row per state plus an
/// "average" row per strategy.
void write_report_csv(std::ostream& out, std::span<const FidelityReport> reports);

nlohmann::json to_json(const FidelityReport& report);
nlohmann::json to_json(const Improvement& improvement);

}  // namespace ionreadout::eval
