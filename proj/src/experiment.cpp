#include "ionreadout/experiment.hpp"

#include "ionreadout/dataset_io.hpp"
#include "ionreadout/features.hpp"
#include "ionreadout/labels.hpp"
#include "ionreadout/mlp.hpp"
#include "ionreadout/threshold.hpp"

#include <algorithm>
#include <chrono>

namespace ionreadout::cli {

namespace {

bool uses_intermediate(Strategy s)
{
    return s == Strategy::NNPlus || s == Strategy::TNNPlus;
}

std::vector<threshold::CountVector> totals(const PreparedData& data, std::span<const std::size_t> rows)
{
    std::vector<threshold::CountVector> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) {
        out.push_back(features::ion_totals(data.dataset.samples[r], data.dataset.geometry));
    }
    return out;
}

std::array<int, 2> hidden_for(Strategy s, const ExperimentConfig& config)
{
    switch (s) {
    case Strategy::NN:
        return config.hidden_nn;
    case Strategy::NNPlus:
        return config.hidden_nn_plus;
    case Strategy::TNN:
        return config.hidden_tnn;
    default:
        return config.hidden_tnn_plus;
    }
}

void run_fixed(StrategyOutcome& out, const ExperimentConfig& config, const PreparedData& data, int n_ions)
{
    const auto train_counts = totals(data, data.split.train);
    const auto train_labels = nn::gather(data.labels, data.split.train);
    const auto model = threshold::fit_fixed(train_counts, train_labels, n_ions, {config.shared_threshold});
    for (const auto& c : totals(data, data.split.test)) {
        out.predictions.push_back(threshold::classify_fixed_index(model, c));
    }
    out.model = threshold::to_json(model);
}

void run_adaptive(StrategyOutcome& out, const ExperimentConfig& config, const PreparedData& data, int n_ions)
{
    const auto train_counts = totals(data, data.split.train);
    const auto train_labels = nn::gather(data.labels, data.split.train);
    threshold::AdaptiveFitOptions options;
    options.min_context_samples = config.adaptive_min_context_samples;
    options.max_iterations = config.adaptive_max_iterations;
    options.fixed.shared = config.shared_threshold;
    const auto model = threshold::fit_adaptive(train_counts, train_labels, n_ions, options);
    long long iterations = 0;
    for (const auto& c : totals(data, data.split.test)) {
        const auto r = threshold::classify_adaptive(model, c);
        out.predictions.push_back(index_from_label(r.label));
        iterations += r.iterations;
        out.unconverged += r.converged ? 0 : 1;
    }
    out.mean_iterations =
        static_cast<double>(iterations) / static_cast<double>(std::max<std::size_t>(out.predictions.size(), 1));
    out.model = threshold::to_json(model);
}

void run_mlp(StrategyOutcome& out, const ExperimentConfig& config, const PreparedData& data, int n_ions)
{
    const auto& geometry = data.dataset.geometry;
    const auto spec = feature_spec(out.strategy, config, geometry);
    const auto x_train = features::design_matrix(data.dataset.samples, data.split.train, spec, geometry);
    const auto y_train = nn::gather(data.labels, data.split.train);
    auto trained = nn::train(x_train, y_train, hidden_for(out.strategy, config), n_ions, config.training,
                             spec.normalization);
    const auto x_test = features::design_matrix(data.dataset.samples, data.split.test, spec, geometry);
    out.predictions = nn::predict_batch(trained.model, x_test);
    out.model = nn::to_json(trained.model);
    out.history = std::move(trained.history);
}

void run_rnn(StrategyOutcome& out, const ExperimentConfig& config, const PreparedData& data, int n_ions)
{
    const auto& geometry = data.dataset.geometry;
    const auto spec = feature_spec(out.strategy, config, geometry);
    const int width = static_cast<int>(features::select_channels(spec, geometry).size());
    const auto x_train = features::sequence_matrix(data.dataset.samples, data.split.train, spec, geometry);
    const auto y_train = nn::gather(data.labels, data.split.train);
    nn::TrainConfig training = config.training;
    training.epochs = config.rnn_epochs;
    auto trained = rnn::lstm_train(x_train, width, y_train, config.rnn_hidden, n_ions, training, spec.normalization);
    const auto x_test = features::sequence_matrix(data.dataset.samples, data.split.test, spec, geometry);
    out.predictions = rnn::predict_batch(trained.model, x_test);
    out.model = rnn::to_json(trained.model);
    out.history = std::move(trained.history);
    out.lstm = std::move(trained.model);
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config)
{
    if (!config.dataset_file.empty()) {
        return prepare_data(config, sim::read_dataset(config.dataset_file));
    }
    sim::GenerateOptions options;
    options.pool_resampling = config.pool_resampling;
    options.threads = config.generate_threads;
    return prepare_data(config, sim::generate_dataset(config.geometry(), config.physics, config.samples_per_label,
                                                      config.data_seed, options));
}

PreparedData prepare_data(const ExperimentConfig& config, sim::Dataset dataset)
{
    if (dataset.geometry.num_ions() != config.n_ions) {
        throw ConfigError("dataset holds " + std::to_string(dataset.geometry.num_ions()) +
                          " ions but the config asks for " + std::to_string(config.n_ions));
    }
    std::vector<std::size_t> labels;
    labels.reserve(dataset.samples.size());
    for (const auto& s : dataset.samples) {
        labels.push_back(index_from_label(s.label));
    }
    auto parts = eval::split(labels, config.training.train_fraction, config.training.seed);
    return {std::move(dataset), std::move(labels), std::move(parts)};
}

features::FeatureSpec feature_spec(Strategy strategy, const ExperimentConfig& config,
                                   const sim::DetectorGeometry& geometry)
{
    features::FeatureSpec spec;
    spec.normalization = config.normalization;
    switch (strategy) {
    case Strategy::NN:
    case Strategy::NNPlus:
        spec.num_bins = 1;
        break;
    case Strategy::TNN:
    case Strategy::TNNPlus:
        spec.num_bins = config.tnn_bins;
        break;
    case Strategy::RNN:
        spec.num_bins = config.rnn_bins;
        spec.include_intermediate = geometry.intermediate_channels_present();
        return spec;
    default:
        break;
    }
    spec.include_intermediate = uses_intermediate(strategy);
    return spec;
}

StrategyOutcome run_strategy(Strategy strategy, const ExperimentConfig& config, const PreparedData& data)
{
    StrategyOutcome out;
    out.strategy = strategy;
    const int n_ions = data.dataset.geometry.num_ions();
    const auto start = std::chrono::steady_clock::now();
    try {
        switch (strategy) {
        case Strategy::FT:
            run_fixed(out, config, data, n_ions);
            break;
        case Strategy::AT:
            run_adaptive(out, config, data, n_ions);
            break;
        case Strategy::RNN:
            run_rnn(out, config, data, n_ions);
            break;
        default:
            run_mlp(out, config, data, n_ions);
            break;
        }
        const auto truth = nn::gather(data.labels, data.split.test);
        out.report =
            eval::fidelity(eval::confusion(n_ions, out.predictions, truth), std::string(strategy_name(strategy)));
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

const StrategyOutcome* RunResult::find(Strategy s) const
{
    for (const auto& o : outcomes) {
        if (o.strategy == s && o.ok) {
            return &o;
        }
    }
    return nullptr;
}

RunResult run_experiment(const ExperimentConfig& config, const PreparedData& data)
{
    RunResult result;
    for (Strategy s : config.strategies) {
        result.outcomes.push_back(run_strategy(s, config, data));
    }
    return result;
}

nlohmann::json summarize(const ExperimentConfig& config, const PreparedData& data, const RunResult& result)
{
    nlohmann::json j;
    j["data_seed"] = data.dataset.seed;
    j["train_seed"] = config.training.seed;
    j["n_ions"] = data.dataset.geometry.num_ions();
    j["samples_per_label"] = data.dataset.samples_per_label;
    j["train_samples"] = data.split.train.size();
    j["test_samples"] = data.split.test.size();
    j["train_fraction"] = config.training.train_fraction;
    j["dataset_file"] = config.dataset_file;

    const StrategyOutcome* ft = result.find(Strategy::FT);
    const StrategyOutcome* at = result.find(Strategy::AT);
    auto& strategies = j["strategies"];
    strategies = nlohmann::json::array();
    for (const auto& o : result.outcomes) {
        nlohmann::json s;
        s["strategy"] = strategy_name(o.strategy);
        s["ok"] = o.ok;
        s["seconds"] = o.seconds;
        if (!o.ok) {
            s["error"] = o.error;
            strategies.push_back(s);
            continue;
        }
        s["average_fidelity"] = o.report.average;
        s["average_std_error"] = o.report.average_std_error;
        if (ft) {
            s["improvement_vs_FT"] = eval::to_json(eval::improvement(ft->report, o.report));
        }
        if (at) {
            s["improvement_vs_AT"] = eval::to_json(eval::improvement(at->report, o.report));
        }
        if (o.strategy == Strategy::AT) {
            s["unconverged"] = o.unconverged;
            s["mean_iterations"] = o.mean_iterations;
        }
        if (!o.history.empty()) {
            s["epochs_run"] = o.history.size();
        }
        strategies.push_back(s);
    }
    return j;
}

std::vector<SweepPoint> sweep_detection_time(const rnn::LstmModel& model, const ExperimentConfig& config,
                                             const PreparedData& data)
{
    const auto& geometry = data.dataset.geometry;
    const auto spec = feature_spec(Strategy::RNN, config, geometry);
    const int width = static_cast<int>(features::select_channels(spec, geometry).size());
    if (width != model.input_width) {
        throw std::invalid_argument("model input width " + std::to_string(model.input_width) +
                                    " does not match the configured RNN features (" + std::to_string(width) + ")");
    }
    const auto x = features::sequence_matrix(data.dataset.samples, data.split.test, spec, geometry);
    const auto truth = nn::gather(data.labels, data.split.test);
    const double bin_us = data.dataset.model.window_us / spec.num_bins;
    std::vector<SweepPoint> out;
    for (int k = 0; k <= spec.num_bins; ++k) {
        const Eigen::MatrixXd prefix = x.leftCols(static_cast<Eigen::Index>(k) * width);
        const auto predictions = rnn::predict_batch(model, prefix);
        SweepPoint p;
        p.bins = k;
        p.detection_time_us = k == spec.num_bins ? data.dataset.model.window_us : k * bin_us;
        p.report = eval::fidelity(eval::confusion(geometry.num_ions(), predictions, truth), "RNN");
        out.push_back(std::move(p));
    }
    return out;
}

int probe_channel_row(const ExperimentConfig& config, const sim::DetectorGeometry& geometry)
{
    const auto spec = feature_spec(Strategy::RNN, config, geometry);
    const auto channels = features::select_channels(spec, geometry);
    const int target = geometry.ion_channels().at(static_cast<std::size_t>(config.probe_ion));
    const auto it = std::find(channels.begin(), channels.end(), target);
    return static_cast<int>(it - channels.begin());
}

}  // namespace ionreadout::cli
