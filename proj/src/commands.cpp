#include "ionreadout/commands.hpp"

#include "ionreadout/dataset_io.hpp"
#include "ionreadout/labels.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace ionreadout::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    return out;
}

void prepare_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
    }
}

void write_seed_line(std::ostream& out, const ExperimentConfig& config)
{
    out << "# data_seed=" << config.data_seed << " train_seed=" << config.training.seed << '\n';
}

void write_json(const fs::path& path, const nlohmann::json& j)
{
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

}  // namespace

GenerateOutput cmd_generate(const ExperimentConfig& config, const fs::path& out_dir)
{
    prepare_dir(out_dir);
    sim::GenerateOptions options;
    options.pool_resampling = config.pool_resampling;
    options.threads = config.generate_threads;
    const auto dataset =
        sim::generate_dataset(config.geometry(), config.physics, config.samples_per_label, config.data_seed, options);

    GenerateOutput result;
    result.dataset_path = out_dir / "dataset.jsonl";
    {
        auto out = open_output(result.dataset_path);
        sim::write_dataset(out, dataset);
    }

    const auto channels = dataset.geometry.recorded_channels();
    const std::size_t classes = num_classes(dataset.geometry.num_ions());
    std::vector<std::vector<double>> sums(classes, std::vector<double>(channels.size(), 0.0));
    std::vector<std::size_t> shots(classes, 0);
    for (const auto& s : dataset.samples) {
        const std::size_t label = index_from_label(s.label);
        ++shots[label];
        for (const auto& e : s.events) {
            const auto it = std::lower_bound(channels.begin(), channels.end(), e.channel);
            sums[label][static_cast<std::size_t>(it - channels.begin())] += 1.0;
        }
    }
    nlohmann::json per_label = nlohmann::json::object();
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> means(channels.size());
        for (std::size_t m = 0; m < channels.size(); ++m) {
            means[m] = shots[c] ? sums[c][m] / static_cast<double>(shots[c]) : 0.0;
        }
        per_label[label_from_index(c, dataset.geometry.num_ions())] = means;
    }
    result.summary = {{"dataset", result.dataset_path.string()},
                      {"data_seed", config.data_seed},
                      {"train_seed", config.training.seed},
                      {"samples", dataset.samples.size()},
                      {"channels", channels},
                      {"mean_counts", per_label}};
    write_json(out_dir / "generate_summary.json", result.summary);
    return result;
}

RunOutput cmd_run(const ExperimentConfig& config, const fs::path& out_dir)
{
    prepare_dir(out_dir);
    const PreparedData data = prepare_data(config);
    RunOutput output;
    output.result = run_experiment(config, data);
    output.summary = summarize(config, data, output.result);

    std::vector<eval::FidelityReport> reports;
    for (const auto& o : output.result.outcomes) {
        if (!o.ok) {
            continue;
        }
        reports.push_back(o.report);
        const std::string tag = strategy_file_tag(o.strategy);
        write_json(out_dir / ("model_" + tag + ".json"), {{"strategy", strategy_name(o.strategy)},
                                                          {"data_seed", config.data_seed},
                                                          {"train_seed", config.training.seed},
                                                          {"model", o.model}});
        if (!o.history.empty()) {
            auto out = open_output(out_dir / ("history_" + tag + ".csv"));
            write_seed_line(out, config);
            nn::write_history_csv(out, o.history);
        }
    }
    {
        auto out = open_output(out_dir / "report.csv");
        write_seed_line(out, config);
        eval::write_report_csv(out, reports);
    }
    write_json(out_dir / "summary.json", output.summary);
    return output;
}

rnn::LstmModel load_rnn_model(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open model file '" + path.string() + "' (run the RNN strategy first)");
    }
    const auto j = nlohmann::json::parse(in);
    if (!j.contains("model") || j.value("strategy", "") != "RNN") {
        throw std::runtime_error("'" + path.string() + "' does not hold a trained RNN model");
    }
    return rnn::lstm_from_json(j.at("model"));
}

std::vector<ProbePoint> cmd_probe(const ExperimentConfig& config, const fs::path& model_path, const fs::path& out_dir)
{
    const auto model = load_rnn_model(model_path);
    const auto geometry = config.geometry();
    const int row = probe_channel_row(config, geometry);
    const int expected_width =
        static_cast<int>(features::select_channels(feature_spec(Strategy::RNN, config, geometry), geometry).size());
    if (model.input_width != expected_width || model.n_ions() != geometry.num_ions()) {
        throw std::runtime_error("model shape does not match the configured geometry");
    }
    prepare_dir(out_dir);
    const auto curve = rnn::probe_curve(model, config.rnn_bins, row, config.probe_ion);
    const double bin_us = config.physics.window_us / config.rnn_bins;
    std::vector<ProbePoint> points;
    for (int b = 0; b < config.rnn_bins; ++b) {
        points.push_back({b, (b + 0.5) * bin_us, curve[static_cast<std::size_t>(b)]});
    }
    auto out = open_output(out_dir / "probe.csv");
    write_seed_line(out, config);
    out.precision(10);
    out << "bin,t_us,p_bright\n";
    for (const auto& p : points) {
        out << p.bin << ',' << p.t_us << ',' << p.p_bright << '\n';
    }
    return points;
}

std::vector<SweepPoint> cmd_sweep_time(const ExperimentConfig& config, const fs::path& model_path,
                                       const fs::path& out_dir)
{
    const auto model = load_rnn_model(model_path);
    const PreparedData data = prepare_data(config);
    const auto points = sweep_detection_time(model, config, data);
    prepare_dir(out_dir);
    auto out = open_output(out_dir / "sweep_time.csv");
    write_seed_line(out, config);
    out.precision(10);
    out << "detection_time_us,fidelity,std_error\n";
    for (const auto& p : points) {
        out << p.detection_time_us << ',' << p.report.average << ',' << p.report.average_std_error << '\n';
    }
    return points;
}

}  // namespace ionreadout::cli
