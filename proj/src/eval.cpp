#include "ionreadout/eval.hpp"

#include "ionreadout/labels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace ionreadout::eval {

ConfusionMatrix::ConfusionMatrix(int n_ions)
    : n_ions_(n_ions), classes_(num_classes(n_ions)), counts_(classes_ * classes_, 0)
{
}

void ConfusionMatrix::add(std::size_t prepared, std::size_t measured, long long count)
{
    if (prepared >= classes_ || measured >= classes_) {
        throw std::out_of_range("confusion matrix: label index out of range");
    }
    counts_[prepared * classes_ + measured] += count;
}

long long ConfusionMatrix::at(std::size_t prepared, std::size_t measured) const
{
    return counts_.at(prepared * classes_ + measured);
}

long long ConfusionMatrix::row_sum(std::size_t prepared) const
{
    const auto begin = counts_.begin() + static_cast<std::ptrdiff_t>(prepared * classes_);
    return std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(classes_), 0LL);
}

long long ConfusionMatrix::total() const
{
    return std::accumulate(counts_.begin(), counts_.end(), 0LL);
}

ConfusionMatrix confusion(std::span<const std::string> predictions, std::span<const std::string> truths)
{
    if (predictions.size() != truths.size() || truths.empty()) {
        throw std::invalid_argument("confusion: need equal-length, non-empty prediction and truth lists");
    }
    const std::size_t width = truths.front().size();
    ConfusionMatrix matrix(static_cast<int>(width));
    for (std::size_t k = 0; k < truths.size(); ++k) {
        if (truths[k].size() != width || predictions[k].size() != width) {
            throw std::invalid_argument("confusion: label length mismatch at position " + std::to_string(k));
        }
        matrix.add(index_from_label(truths[k]), index_from_label(predictions[k]));
    }
    return matrix;
}

ConfusionMatrix confusion(int n_ions, std::span<const std::size_t> predictions,
                          std::span<const std::size_t> truths)
{
    if (predictions.size() != truths.size()) {
        throw std::invalid_argument("confusion: prediction and truth lists differ in length");
    }
    ConfusionMatrix matrix(n_ions);
    for (std::size_t k = 0; k < truths.size(); ++k) {
        matrix.add(truths[k], predictions[k]);
    }
    return matrix;
}

FidelityReport fidelity(const ConfusionMatrix& matrix, std::string strategy)
{
    FidelityReport report;
    report.strategy = std::move(strategy);
    report.n_ions = matrix.n_ions();
    double variance_sum = 0.0;
    double fidelity_sum = 0.0;
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        const long long n = matrix.row_sum(i);
        if (n <= 0) {
            throw std::invalid_argument("fidelity: no samples prepared in state " +
                                        label_from_index(i, matrix.n_ions()));
        }
        const double p = static_cast<double>(matrix.at(i, i)) / static_cast<double>(n);
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        report.state_fidelity.push_back(p);
        report.state_std_error.push_back(se);
        report.state_count.push_back(n);
        fidelity_sum += p;
        variance_sum += se * se;
    }
    const auto states = static_cast<double>(matrix.size());
    report.average = fidelity_sum / states;
    report.average_std_error = std::sqrt(variance_sum) / states;
    return report;
}

Improvement improvement(const FidelityReport& baseline, const FidelityReport& candidate)
{
    if (baseline.n_ions != candidate.n_ions) {
        throw std::invalid_argument("improvement: reports cover different qubit counts");
    }
    Improvement out;
    const double base_error = 1.0 - baseline.average;
    const double cand_error = 1.0 - candidate.average;
    if (base_error <= 0.0) {
        return out;
    }
    out.defined = true;
    out.value = (base_error - cand_error) / base_error;
    const double d_cand = candidate.average_std_error / base_error;
    const double d_base = cand_error * baseline.average_std_error / (base_error * base_error);
    out.std_error = std::sqrt(d_cand * d_cand + d_base * d_base);
    return out;
}

Split split(std::span<const std::size_t> labels, double fraction, std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("split: fraction must lie in (0, 1)");
    }
    std::size_t classes = 0;
    for (std::size_t label : labels) {
        classes = std::max(classes, label + 1);
    }
    std::vector<std::vector<std::size_t>> by_label(classes);
    for (std::size_t k = 0; k < labels.size(); ++k) {
        by_label[labels[k]].push_back(k);
    }
    std::mt19937_64 rng(seed);
    Split out;
    for (std::size_t label = 0; label < classes; ++label) {
        auto& members = by_label[label];
        if (members.empty()) {
            continue;
        }
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_train =
            static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
        if (n_train == 0 || n_train >= members.size()) {
            throw std::invalid_argument("split: fraction leaves label " + std::to_string(label) +
                                        " with an empty train or test part");
        }
        out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

void write_report_csv(std::ostream& out, std::span<const FidelityReport> reports)
{
    const auto old_precision = out.precision(10);
    out << "strategy,state,fidelity,std_error\n";
    for (const auto& r : reports) {
        for (std::size_t i = 0; i < r.state_fidelity.size(); ++i) {
            out << r.strategy << ',' << label_from_index(i, r.n_ions) << ',' << r.state_fidelity[i] << ','
                << r.state_std_error[i] << '\n';
        }
        out << r.strategy << ",average," << r.average << ',' << r.average_std_error << '\n';
    }
    out.precision(old_precision);
}

nlohmann::json to_json(const FidelityReport& report)
{
    nlohmann::json states = nlohmann::json::object();
    for (std::size_t i = 0; i < report.state_fidelity.size(); ++i) {
        states[label_from_index(i, report.n_ions)] = {{"fidelity", report.state_fidelity[i]},
                                                       {"std_error", report.state_std_error[i]},
                                                       {"count", report.state_count[i]}};
    }
    return {{"strategy", report.strategy},
            {"n_ions", report.n_ions},
            {"average_fidelity", report.average},
            {"average_std_error", report.average_std_error},
            {"states", std::move(states)}};
}

nlohmann::json to_json(const Improvement& improvement)
{
    if (!improvement.defined) {
        return {{"defined", false}};
    }
    return {{"defined", true}, {"value", improvement.value}, {"std_error", improvement.std_error}};
}

}  // namespace ionreadout::eval
