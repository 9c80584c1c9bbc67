#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ionreadout::sim {

using Rng = std::mt19937_64;

/// Arrival times are recorded on a 0.1 us grid.
inline constexpr double kArrivalResolutionUs = 0.1;

/// Phenomenological state-dependent fluorescence model. All rates are per
/// microsecond.
///
/// A bright ion emits detected photons as a Poisson process at
/// `bright_rate` until it is (possibly) pumped dark at an exponentially
/// distributed time. A dark ion emits nothing unless it is pumped bright,
/// after which it behaves like a bright ion for the rest of the window.
/// Background clicks (laser scatter + detector dark counts) arrive on every
/// channel uniformly in time.
struct EmissionModel {
    double bright_rate = 0.06;  // 9 detected photons in 150 us
    double pump_bright_to_dark_rate = 1.46e-4;
    double pump_dark_to_bright_rate = 3.43e-5;
    double background_scatter_rate = 2.0e-5;  // 20 counts/s
    double detector_dark_rate = 2.0e-6;       // 2 counts/s
    double window_us = 150.0;

    /// Throws std::invalid_argument when a rate is negative or non-finite,
    /// bright_rate is not strictly positive, or the window is not positive.
    void validate() const;

    double background_rate() const { return background_scatter_rate + detector_dark_rate; }
    double mean_bright_counts() const { return bright_rate * window_us; }

    bool operator==(const EmissionModel&) const = default;
};

/// Which detector channel each ion is imaged onto and how photons from an ion
/// spread over the channels.
class DetectorGeometry {
public:
    /// `crosstalk[i][m]` is the probability that a photon from ion i lands on
    /// channel m. Rows must sum to 1 within 1e-12 and ion channels must be
    /// distinct and in range.
    DetectorGeometry(int num_channels, std::vector<int> ion_channels,
                     std::vector<std::vector<double>> crosstalk, bool intermediate_channels_present);

    /// Builds the crosstalk matrix from a centered point-spread row. `row`
    /// has odd length 2K+1; `row[K + d]` is the weight on the channel at
    /// offset d from the ion's own channel. Weight falling off the detector
    /// edge is dropped and the remaining row renormalized.
    static DetectorGeometry from_point_spread(int num_channels, std::vector<int> ion_channels,
                                              std::span<const double> row,
                                              bool intermediate_channels_present);

    /// One ion on one channel, no crosstalk.
    static DetectorGeometry single_ion();

    /// Ions on every other channel (0, 2, 4, ...) with the unused channels in
    /// between recorded.
    static DetectorGeometry alternating(int num_ions, std::span<const double> row);

    /// Ions on neighboring channels, no intermediate channels.
    static DetectorGeometry adjacent(int num_ions, std::span<const double> row);

    int num_ions() const { return static_cast<int>(ion_channels_.size()); }
    int num_channels() const { return num_channels_; }
    const std::vector<int>& ion_channels() const { return ion_channels_; }
    int ion_channel(int ion) const { return ion_channels_.at(static_cast<std::size_t>(ion)); }
    const std::vector<std::vector<double>>& crosstalk() const { return crosstalk_; }
    bool intermediate_channels_present() const { return intermediate_; }

    /// Ion index imaged on `channel`, or -1 for an intermediate channel.
    int ion_on_channel(int channel) const;
    bool is_ion_channel(int channel) const { return ion_on_channel(channel) >= 0; }

    /// Channels that end up in recorded samples, ascending.
    std::vector<int> recorded_channels() const;

    bool operator==(const DetectorGeometry&) const = default;

private:
    int num_channels_;
    std::vector<int> ion_channels_;
    std::vector<std::vector<double>> crosstalk_;
    bool intermediate_;
};

/// Default point-spread rows.
std::vector<double> default_alternating_row();
std::vector<double> default_adjacent_row();

struct PhotonEvent {
    int channel = 0;
    double arrival_us = 0.0;

    bool operator==(const PhotonEvent&) const = default;
};

struct ReadoutSample {
    std::string label;
    std::vector<PhotonEvent> events;  // ascending arrival time, ties by channel
    double window_us = 0.0;

    bool operator==(const ReadoutSample&) const = default;
};

struct Dataset {
    std::vector<ReadoutSample> samples;
    DetectorGeometry geometry;
    EmissionModel model;
    std::uint64_t seed = 0;
    std::size_t samples_per_label = 0;
    bool pool_resampling = false;
};

/// Signal photon arrival times (us, sorted, quantized) for one ion prepared
/// in `state` (0 dark, 1 bright). Background is not included.
std::vector<double> simulate_ion(int state, const EmissionModel& model, Rng& rng);

/// Assigns each signal photon of ion i to a channel drawn from crosstalk row
/// i, adds background clicks on every channel and returns the merged,
/// time-sorted event list. Events on intermediate channels are dropped when
/// the geometry does not record them.
std::vector<PhotonEvent> route_events(std::span<const std::vector<double>> signal_times,
                                      const DetectorGeometry& geometry, const EmissionModel& model,
                                      Rng& rng);

struct GenerateOptions {
    /// Superimpose pre-recorded single-ion shots instead of simulating every
    /// ion afresh for every sample.
    bool pool_resampling = false;
    /// Records per (ion, state) pool; 0 means samples_per_label.
    std::size_t pool_size = 0;
    unsigned threads = 1;
    /// Upper bound on 2^N * samples_per_label.
    std::size_t max_samples = std::size_t{1} << 24;
};

/// Generates `samples_per_label` shots for every N-bit label. Samples are
/// ordered by label index, then sample index. Each sample draws from its own
/// stream derived from (seed, label, index), so the output does not depend
/// on the thread count.
Dataset generate_dataset(const DetectorGeometry& geometry, const EmissionModel& model,
                         std::size_t samples_per_label, std::uint64_t seed,
                         const GenerateOptions& options = {});

/// Seed of the random stream used for one sample.
std::uint64_t sample_stream_seed(std::uint64_t seed, std::uint64_t label_index,
                                 std::uint64_t sample_index);

}  // namespace ionreadout::sim
