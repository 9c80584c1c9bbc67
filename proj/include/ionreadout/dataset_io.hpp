#pragma once

#include "ionreadout/readout_sim.hpp"

#include <iosfwd>
#include <string>

#include "json.hpp"

namespace ionreadout::sim {

// Dataset files are line oriented. The first line is a JSON header with the
// geometry, emission model, seed and samples_per_label; each following line
// is one sample:
//   {"label":"011","window_us":150.0,"events":[[channel,arrival_us],...]}

nlohmann::json to_json(const EmissionModel& model);
EmissionModel emission_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DetectorGeometry& geometry);
DetectorGeometry geometry_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ReadoutSample& sample);
ReadoutSample sample_from_json(const nlohmann::json& j);

void write_dataset(std::ostream& out, const Dataset& dataset);
void write_dataset(const std::string& path, const Dataset& dataset);

/// Throws std::runtime_error on malformed input, naming the offending line.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::string& path);

}  // namespace ionreadout::sim
