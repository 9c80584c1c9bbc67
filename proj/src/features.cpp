#include "ionreadout/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ionreadout::features {

int CountImage::row_total(int row) const
{
    const auto begin = counts.begin() + row * num_bins;
    return std::accumulate(begin, begin + num_bins, 0);
}

long CountImage::total() const
{
    return std::accumulate(counts.begin(), counts.end(), 0L);
}

std::vector<int> select_channels(const FeatureSpec& spec, const sim::DetectorGeometry& geometry)
{
    if (!spec.include_intermediate) {
        return geometry.ion_channels();
    }
    if (!geometry.intermediate_channels_present()) {
        throw std::invalid_argument("feature spec requests intermediate channels but the geometry does not record them");
    }
    return geometry.recorded_channels();
}

int bin_index(double arrival_us, double window_us, int num_bins)
{
    if (!(arrival_us >= 0.0) || arrival_us > window_us) {
        throw std::invalid_argument("arrival time " + std::to_string(arrival_us) + " outside the window");
    }
    const double width = window_us / num_bins;
    auto bin = static_cast<int>(std::floor(arrival_us / width));
    // Undo division rounding right at an edge.
    if (bin > 0 && arrival_us < bin * width) {
        --bin;
    } else if (arrival_us >= (bin + 1) * width) {
        ++bin;
    }
    return std::clamp(bin, 0, num_bins - 1);
}

CountImage bin_sample(const sim::ReadoutSample& sample, const FeatureSpec& spec,
                      const sim::DetectorGeometry& geometry)
{
    if (spec.num_bins < 1) {
        throw std::invalid_argument("feature spec: num_bins must be >= 1");
    }
    CountImage image;
    image.channel_ids = select_channels(spec, geometry);
    image.num_bins = spec.num_bins;
    image.bin_width_us = sample.window_us / spec.num_bins;
    image.counts.assign(image.channel_ids.size() * static_cast<std::size_t>(spec.num_bins), 0);

    std::vector<int> row_of(static_cast<std::size_t>(geometry.num_channels()), -1);
    for (std::size_t r = 0; r < image.channel_ids.size(); ++r) {
        row_of[static_cast<std::size_t>(image.channel_ids[r])] = static_cast<int>(r);
    }
    for (const auto& e : sample.events) {
        if (e.channel < 0 || e.channel >= geometry.num_channels()) {
            throw std::invalid_argument("event on unknown channel " + std::to_string(e.channel));
        }
        const int row = row_of[static_cast<std::size_t>(e.channel)];
        if (row >= 0) {
            ++image.at(row, bin_index(e.arrival_us, sample.window_us, spec.num_bins));
        }
    }
    return image;
}

Sequence to_sequence(const sim::ReadoutSample& sample, const FeatureSpec& spec,
                     const sim::DetectorGeometry& geometry)
{
    const CountImage image = bin_sample(sample, spec, geometry);
    Sequence sequence(static_cast<std::size_t>(image.num_bins),
                      std::vector<double>(image.channel_ids.size(), 0.0));
    for (int b = 0; b < image.num_bins; ++b) {
        for (int r = 0; r < image.rows(); ++r) {
            sequence[static_cast<std::size_t>(b)][static_cast<std::size_t>(r)] = image.at(r, b);
        }
    }
    return sequence;
}

Sequence truncate(const Sequence& sequence, std::size_t prefix_bins)
{
    const auto n = std::min(prefix_bins, sequence.size());
    return Sequence(sequence.begin(), sequence.begin() + static_cast<std::ptrdiff_t>(n));
}

std::vector<double> flatten(const CountImage& image)
{
    return {image.counts.begin(), image.counts.end()};
}

CountImage unflatten(std::span<const double> values, std::vector<int> channel_ids, int num_bins,
                     double bin_width_us)
{
    if (num_bins < 1 || values.size() != channel_ids.size() * static_cast<std::size_t>(num_bins)) {
        throw std::invalid_argument("unflatten: value count does not match the image shape");
    }
    CountImage image{std::move(channel_ids), num_bins, bin_width_us, {}};
    image.counts.reserve(values.size());
    for (double v : values) {
        if (v < 0.0 || v != std::floor(v)) {
            throw std::invalid_argument("unflatten: counts must be non-negative integers");
        }
        image.counts.push_back(static_cast<int>(v));
    }
    return image;
}

std::vector<int> ion_totals(const sim::ReadoutSample& sample, const sim::DetectorGeometry& geometry)
{
    std::vector<int> totals(static_cast<std::size_t>(geometry.num_ions()), 0);
    for (const auto& e : sample.events) {
        const int ion = geometry.ion_on_channel(e.channel);
        if (ion >= 0) {
            ++totals[static_cast<std::size_t>(ion)];
        }
    }
    return totals;
}

Eigen::MatrixXd design_matrix(std::span<const sim::ReadoutSample> samples,
                              std::span<const std::size_t> indices, const FeatureSpec& spec,
                              const sim::DetectorGeometry& geometry)
{
    const auto width = static_cast<Eigen::Index>(select_channels(spec, geometry).size()) * spec.num_bins;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(indices.size()), width);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const CountImage image = bin_sample(samples[indices[r]], spec, geometry);
        for (Eigen::Index c = 0; c < width; ++c) {
            x(static_cast<Eigen::Index>(r), c) = image.counts[static_cast<std::size_t>(c)];
        }
    }
    return x;
}

Eigen::MatrixXd sequence_matrix(std::span<const sim::ReadoutSample> samples,
                                std::span<const std::size_t> indices, const FeatureSpec& spec,
                                const sim::DetectorGeometry& geometry)
{
    const int width = static_cast<int>(select_channels(spec, geometry).size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(indices.size()), width * spec.num_bins);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const CountImage image = bin_sample(samples[indices[r]], spec, geometry);
        for (int b = 0; b < image.num_bins; ++b) {
            for (int m = 0; m < width; ++m) {
                x(static_cast<Eigen::Index>(r), b * width + m) = image.at(m, b);
            }
        }
    }
    return x;
}

Eigen::VectorXd fit_scale(const Eigen::MatrixXd& training, Normalization normalization)
{
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(training.cols());
    if (normalization == Normalization::none || training.rows() == 0) {
        return scale;
    }
    for (Eigen::Index c = 0; c < training.cols(); ++c) {
        const double m = training.col(c).maxCoeff();
        if (m > 0.0) {
            scale(c) = m;
        }
    }
    return scale;
}

Eigen::VectorXd fit_sequence_scale(const Eigen::MatrixXd& training, int width, Normalization normalization)
{
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(width);
    if (normalization == Normalization::none || training.rows() == 0) {
        return scale;
    }
    for (int m = 0; m < width; ++m) {
        double best = 0.0;
        for (Eigen::Index c = m; c < training.cols(); c += width) {
            best = std::max(best, training.col(c).maxCoeff());
        }
        if (best > 0.0) {
            scale(m) = best;
        }
    }
    return scale;
}

}  // namespace ionreadout::features
