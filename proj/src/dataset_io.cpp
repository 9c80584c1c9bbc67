#include "ionreadout/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace ionreadout::sim {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "ionreadout-dataset";
constexpr int kVersion = 1;
}  // namespace

json to_json(const EmissionModel& model)
{
    return json{{"bright_rate", model.bright_rate},
                {"pump_bright_to_dark_rate", model.pump_bright_to_dark_rate},
                {"pump_dark_to_bright_rate", model.pump_dark_to_bright_rate},
                {"background_scatter_rate", model.background_scatter_rate},
                {"detector_dark_rate", model.detector_dark_rate},
                {"window_us", model.window_us}};
}

EmissionModel emission_model_from_json(const json& j)
{
    EmissionModel model;
    model.bright_rate = j.at("bright_rate").get<double>();
    model.pump_bright_to_dark_rate = j.at("pump_bright_to_dark_rate").get<double>();
    model.pump_dark_to_bright_rate = j.at("pump_dark_to_bright_rate").get<double>();
    model.background_scatter_rate = j.at("background_scatter_rate").get<double>();
    model.detector_dark_rate = j.at("detector_dark_rate").get<double>();
    model.window_us = j.at("window_us").get<double>();
    model.validate();
    return model;
}

json to_json(const DetectorGeometry& geometry)
{
    return json{{"num_channels", geometry.num_channels()},
                {"ion_channels", geometry.ion_channels()},
                {"crosstalk", geometry.crosstalk()},
                {"intermediate_channels_present", geometry.intermediate_channels_present()}};
}

DetectorGeometry geometry_from_json(const json& j)
{
    return DetectorGeometry(j.at("num_channels").get<int>(), j.at("ion_channels").get<std::vector<int>>(),
                            j.at("crosstalk").get<std::vector<std::vector<double>>>(),
                            j.at("intermediate_channels_present").get<bool>());
}

json to_json(const ReadoutSample& sample)
{
    json events = json::array();
    for (const auto& e : sample.events) {
        events.push_back(json::array({e.channel, e.arrival_us}));
    }
    return json{{"label", sample.label}, {"window_us", sample.window_us}, {"events", std::move(events)}};
}

ReadoutSample sample_from_json(const json& j)
{
    ReadoutSample sample;
    sample.label = j.at("label").get<std::string>();
    sample.window_us = j.at("window_us").get<double>();
    for (const auto& e : j.at("events")) {
        if (!e.is_array() || e.size() != 2) {
            throw std::runtime_error("event must be a [channel, arrival_us] pair");
        }
        sample.events.push_back({e[0].get<int>(), e[1].get<double>()});
    }
    return sample;
}

void write_dataset(std::ostream& out, const Dataset& dataset)
{
    const json header{{"format", kFormat},
                      {"version", kVersion},
                      {"seed", dataset.seed},
                      {"samples_per_label", dataset.samples_per_label},
                      {"pool_resampling", dataset.pool_resampling},
                      {"geometry", to_json(dataset.geometry)},
                      {"model", to_json(dataset.model)}};
    out << header.dump() << '\n';
    for (const auto& sample : dataset.samples) {
        out << to_json(sample).dump() << '\n';
    }
}

void write_dataset(const std::string& path, const Dataset& dataset)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    write_dataset(out, dataset);
    if (!out) {
        throw std::runtime_error("failed writing dataset to '" + path + "'");
    }
}

Dataset read_dataset(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("dataset: missing header line");
    }
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("dataset: malformed header: ") + e.what());
    }
    if (header.value("format", "") != kFormat || header.value("version", 0) != kVersion) {
        throw std::runtime_error("dataset: unsupported format or version");
    }
    Dataset dataset{{},
                    geometry_from_json(header.at("geometry")),
                    emission_model_from_json(header.at("model")),
                    header.at("seed").get<std::uint64_t>(),
                    header.at("samples_per_label").get<std::size_t>(),
                    header.value("pool_resampling", false)};
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            dataset.samples.push_back(sample_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return dataset;
}

Dataset read_dataset(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open dataset '" + path + "'");
    }
    return read_dataset(in);
}

}  // namespace ionreadout::sim
