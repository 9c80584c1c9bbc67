#pragma once

#include "ionreadout/readout_sim.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace ionreadout::features {

enum class Normalization {
    none,
    training_max,  // divide each feature by its maximum over the training split
};

struct FeatureSpec {
    bool include_intermediate = false;
    int num_bins = 1;
    Normalization normalization = Normalization::training_max;
};

/// Channel x time-bin photon counts for one shot.
struct CountImage {
    std::vector<int> channel_ids;  // row order
    int num_bins = 0;
    double bin_width_us = 0.0;
    std::vector<int> counts;  // row-major, channel_ids.size() x num_bins

    int rows() const { return static_cast<int>(channel_ids.size()); }
    int at(int row, int bin) const { return counts[static_cast<std::size_t>(row * num_bins + bin)]; }
    int& at(int row, int bin) { return counts[static_cast<std::size_t>(row * num_bins + bin)]; }
    int row_total(int row) const;
    long total() const;

    bool operator==(const CountImage&) const = default;
};

/// Per-bin count vectors in time order, each of width channel_ids.size().
using Sequence = std::vector<std::vector<double>>;

/// Channels fed to a classifier: ion channels in ion order, or every
/// recorded channel ascending when intermediate channels are requested.
/// Throws std::invalid_argument if the geometry does not record them.
std::vector<int> select_channels(const FeatureSpec& spec, const sim::DetectorGeometry& geometry);

/// Bin of an arrival time. Bins are left-closed/right-open except the last,
/// which also takes t == window.
int bin_index(double arrival_us, double window_us, int num_bins);

CountImage bin_sample(const sim::ReadoutSample& sample, const FeatureSpec& spec,
                      const sim::DetectorGeometry& geometry);

/// Column-by-column view of bin_sample. `truncate` keeps the first
/// `prefix_bins` bins, which models a shorter detection window.
Sequence to_sequence(const sim::ReadoutSample& sample, const FeatureSpec& spec,
                     const sim::DetectorGeometry& geometry);
Sequence truncate(const Sequence& sequence, std::size_t prefix_bins);

/// Row-major (channel-major) flattening.
std::vector<double> flatten(const CountImage& image);
CountImage unflatten(std::span<const double> values, std::vector<int> channel_ids, int num_bins,
                     double bin_width_us);

/// Total counts on each ion's own channel, ion order.
std::vector<int> ion_totals(const sim::ReadoutSample& sample, const sim::DetectorGeometry& geometry);

/// One flattened CountImage per row, for the listed samples.
Eigen::MatrixXd design_matrix(std::span<const sim::ReadoutSample> samples,
                              std::span<const std::size_t> indices, const FeatureSpec& spec,
                              const sim::DetectorGeometry& geometry);

/// One sequence per row, time-major: column t * width + m holds channel m of
/// bin t.
Eigen::MatrixXd sequence_matrix(std::span<const sim::ReadoutSample> samples,
                                std::span<const std::size_t> indices, const FeatureSpec& spec,
                                const sim::DetectorGeometry& geometry);

/// Per-column divisor: the column maximum, or 1 for an all-zero column.
/// Returns all ones for Normalization::none.
Eigen::VectorXd fit_scale(const Eigen::MatrixXd& training, Normalization normalization);

/// Per-channel divisor for time-major sequence rows (max over all bins).
Eigen::VectorXd fit_sequence_scale(const Eigen::MatrixXd& training, int width,
                                   Normalization normalization);

}  // namespace ionreadout::features
