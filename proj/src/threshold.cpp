#include "ionreadout/threshold.hpp"

#include "ionreadout/labels.hpp"

#include <algorithm>
#include <stdexcept>

namespace ionreadout::threshold {

namespace {

std::string context_string(std::size_t context, std::size_t n_neighbors)
{
    std::string s(n_neighbors, '0');
    for (std::size_t k = 0; k < n_neighbors; ++k) {
        if ((context >> (n_neighbors - 1 - k)) & 1U) {
            s[k] = '1';
        }
    }
    return s;
}

template <typename BitOf>
std::size_t context_of(const std::vector<int>& neighbors, BitOf bit_of)
{
    std::size_t context = 0;
    for (int nb : neighbors) {
        context = (context << 1U) | static_cast<std::size_t>(bit_of(nb));
    }
    return context;
}

void check_inputs(std::span<const CountVector> counts, std::span<const std::size_t> labels, int n_ions)
{
    if (counts.size() != labels.size()) {
        throw std::invalid_argument("threshold fit: counts and labels differ in length");
    }
    const std::size_t classes = num_classes(n_ions);
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k].size() != static_cast<std::size_t>(n_ions)) {
            throw std::invalid_argument("threshold fit: count vector width does not match ion count");
        }
        if (labels[k] >= classes) {
            throw std::invalid_argument("threshold fit: label index out of range");
        }
    }
}

}  // namespace

int best_threshold(std::span<const int> bright_counts, std::span<const int> dark_counts)
{
    if (bright_counts.empty() || dark_counts.empty()) {
        throw std::invalid_argument("threshold fit: both bright and dark samples are required");
    }
    int max_count = 0;
    for (int c : bright_counts) {
        max_count = std::max(max_count, c);
    }
    for (int c : dark_counts) {
        max_count = std::max(max_count, c);
    }
    std::vector<long long> bright_hist(static_cast<std::size_t>(max_count) + 1, 0);
    std::vector<long long> dark_hist(bright_hist.size(), 0);
    for (int c : bright_counts) {
        ++bright_hist[static_cast<std::size_t>(c)];
    }
    for (int c : dark_counts) {
        ++dark_hist[static_cast<std::size_t>(c)];
    }

    // Compare error rates exactly: fb/nb + fd/nd  ~  fb*nd + fd*nb.
    const auto nb = static_cast<long long>(bright_counts.size());
    const auto nd = static_cast<long long>(dark_counts.size());
    long long bright_at_or_below = 0;
    long long dark_above = nd;
    long long best_error = -1;
    int best = 0;
    for (int theta = 0; theta <= max_count; ++theta) {
        bright_at_or_below += bright_hist[static_cast<std::size_t>(theta)];
        dark_above -= dark_hist[static_cast<std::size_t>(theta)];
        const long long error = bright_at_or_below * nd + dark_above * nb;
        if (best_error < 0 || error < best_error) {
            best_error = error;
            best = theta;
        }
    }
    return best;
}

FixedThresholdModel fit_fixed(std::span<const CountVector> counts, std::span<const std::size_t> labels,
                              int n_ions, const FixedFitOptions& options)
{
    check_inputs(counts, labels, n_ions);
    const auto n = static_cast<std::size_t>(n_ions);
    std::vector<std::vector<int>> bright(n);
    std::vector<std::vector<int>> dark(n);
    for (std::size_t k = 0; k < counts.size(); ++k) {
        for (int ion = 0; ion < n_ions; ++ion) {
            const auto i = static_cast<std::size_t>(ion);
            (ion_bit(labels[k], ion, n_ions) ? bright[i] : dark[i]).push_back(counts[k][i]);
        }
    }
    for (int ion = 0; ion < n_ions; ++ion) {
        const auto i = static_cast<std::size_t>(ion);
        if (bright[i].empty() || dark[i].empty()) {
            throw std::invalid_argument("threshold fit: ion " + std::to_string(ion) +
                                        " is only observed in one state");
        }
    }

    FixedThresholdModel model;
    if (options.shared) {
        std::vector<int> all_bright;
        std::vector<int> all_dark;
        for (std::size_t i = 0; i < n; ++i) {
            all_bright.insert(all_bright.end(), bright[i].begin(), bright[i].end());
            all_dark.insert(all_dark.end(), dark[i].begin(), dark[i].end());
        }
        model.thresholds.assign(n, best_threshold(all_bright, all_dark));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            model.thresholds.push_back(best_threshold(bright[i], dark[i]));
        }
    }
    return model;
}

std::size_t classify_fixed_index(const FixedThresholdModel& model, std::span<const int> counts)
{
    if (counts.size() != model.thresholds.size()) {
        throw std::invalid_argument("classify_fixed: count vector width does not match the model");
    }
    std::size_t index = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        index = (index << 1U) | static_cast<std::size_t>(counts[i] > model.thresholds[i]);
    }
    return index;
}

std::string classify_fixed(const FixedThresholdModel& model, std::span<const int> counts)
{
    return label_from_index(classify_fixed_index(model, counts), static_cast<int>(counts.size()));
}

int AdaptiveThresholdModel::threshold(int ion, const std::string& context) const
{
    const auto& table = context_thresholds.at(static_cast<std::size_t>(ion));
    if (context.size() != neighbors.at(static_cast<std::size_t>(ion)).size()) {
        throw std::invalid_argument("adaptive threshold: context '" + context + "' has the wrong width");
    }
    std::size_t index = 0;
    for (char c : context) {
        index = (index << 1U) | static_cast<std::size_t>(c == '1');
    }
    return table.at(index);
}

std::vector<int> chain_neighbors(int ion, int n_ions)
{
    std::vector<int> out;
    if (ion > 0) {
        out.push_back(ion - 1);
    }
    if (ion + 1 < n_ions) {
        out.push_back(ion + 1);
    }
    return out;
}

AdaptiveThresholdModel fit_adaptive(std::span<const CountVector> counts, std::span<const std::size_t> labels,
                                    int n_ions, const AdaptiveFitOptions& options)
{
    if (options.max_iterations < 1) {
        throw std::invalid_argument("adaptive threshold: max_iterations must be >= 1");
    }
    AdaptiveThresholdModel model;
    model.initial = fit_fixed(counts, labels, n_ions, options.fixed);
    model.max_iterations = options.max_iterations;

    for (int ion = 0; ion < n_ions; ++ion) {
        const auto i = static_cast<std::size_t>(ion);
        auto nbs = chain_neighbors(ion, n_ions);
        const std::size_t n_contexts = std::size_t{1} << nbs.size();
        std::vector<std::vector<int>> bright(n_contexts);
        std::vector<std::vector<int>> dark(n_contexts);
        for (std::size_t k = 0; k < counts.size(); ++k) {
            const std::size_t ctx =
                context_of(nbs, [&](int nb) { return ion_bit(labels[k], nb, n_ions); });
            (ion_bit(labels[k], ion, n_ions) ? bright[ctx] : dark[ctx]).push_back(counts[k][i]);
        }
        std::vector<int> table(n_contexts, model.initial.thresholds[i]);
        for (std::size_t ctx = 0; ctx < n_contexts; ++ctx) {
            const std::size_t seen = bright[ctx].size() + dark[ctx].size();
            if (seen < options.min_context_samples || bright[ctx].empty() || dark[ctx].empty()) {
                model.starved_contexts.push_back(std::to_string(ion) + ":" + context_string(ctx, nbs.size()));
                continue;
            }
            table[ctx] = best_threshold(bright[ctx], dark[ctx]);
        }
        model.neighbors.push_back(std::move(nbs));
        model.context_thresholds.push_back(std::move(table));
    }
    return model;
}

AdaptiveResult classify_adaptive(const AdaptiveThresholdModel& model, std::span<const int> counts)
{
    const int n_ions = model.num_ions();
    std::size_t current = classify_fixed_index(model.initial, counts);
    AdaptiveResult result;
    for (int iter = 1; iter <= model.max_iterations; ++iter) {
        std::size_t next = 0;
        for (int ion = 0; ion < n_ions; ++ion) {
            const auto i = static_cast<std::size_t>(ion);
            const std::size_t ctx =
                context_of(model.neighbors[i], [&](int nb) { return ion_bit(current, nb, n_ions); });
            const bool bright = counts[i] > model.context_thresholds[i][ctx];
            next = (next << 1U) | static_cast<std::size_t>(bright);
        }
        result.iterations = iter;
        const bool fixed_point = next == current;
        current = next;
        if (fixed_point) {
            result.converged = true;
            break;
        }
    }
    result.label = label_from_index(current, n_ions);
    return result;
}

nlohmann::json to_json(const FixedThresholdModel& model)
{
    return {{"kind", "fixed"}, {"thresholds", model.thresholds}};
}

nlohmann::json to_json(const AdaptiveThresholdModel& model)
{
    nlohmann::json ions = nlohmann::json::array();
    for (int ion = 0; ion < model.num_ions(); ++ion) {
        const auto i = static_cast<std::size_t>(ion);
        nlohmann::json contexts = nlohmann::json::object();
        for (std::size_t ctx = 0; ctx < model.context_thresholds[i].size(); ++ctx) {
            contexts[context_string(ctx, model.neighbors[i].size())] = model.context_thresholds[i][ctx];
        }
        ions.push_back({{"ion", ion}, {"neighbors", model.neighbors[i]}, {"contexts", std::move(contexts)}});
    }
    return {{"kind", "adaptive"},
            {"initial", model.initial.thresholds},
            {"max_iterations", model.max_iterations},
            {"ions", std::move(ions)},
            {"starved_contexts", model.starved_contexts}};
}

FixedThresholdModel fixed_from_json(const nlohmann::json& j)
{
    if (j.at("kind") != "fixed") {
        throw std::invalid_argument("expected a fixed threshold model");
    }
    return {j.at("thresholds").get<std::vector<int>>()};
}

AdaptiveThresholdModel adaptive_from_json(const nlohmann::json& j)
{
    if (j.at("kind") != "adaptive") {
        throw std::invalid_argument("expected an adaptive threshold model");
    }
    AdaptiveThresholdModel model;
    model.initial.thresholds = j.at("initial").get<std::vector<int>>();
    model.max_iterations = j.at("max_iterations").get<int>();
    model.starved_contexts = j.at("starved_contexts").get<std::vector<std::string>>();
    for (const auto& entry : j.at("ions")) {
        auto nbs = entry.at("neighbors").get<std::vector<int>>();
        std::vector<int> table(std::size_t{1} << nbs.size());
        for (std::size_t ctx = 0; ctx < table.size(); ++ctx) {
            table[ctx] = entry.at("contexts").at(context_string(ctx, nbs.size())).get<int>();
        }
        model.neighbors.push_back(std::move(nbs));
        model.context_thresholds.push_back(std::move(table));
    }
    return model;
}

}  // namespace ionreadout::threshold
