#include "ionreadout/readout_sim.hpp"

#include "ionreadout/labels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace ionreadout::sim {

namespace {

void require_rate(double value, const char* name, bool strictly_positive = false)
{
    if (!std::isfinite(value) || value < 0.0 || (strictly_positive && value == 0.0)) {
        throw std::invalid_argument(std::string("emission model: ") + name + " must be finite and " +
                                    (strictly_positive ? "> 0" : ">= 0") + ", got " +
                                    std::to_string(value));
    }
}

double quantize(double t, double window)
{
    // k / 10.0 is the closest double to k tenths, so values print cleanly.
    constexpr double kTicksPerUs = 1.0 / kArrivalResolutionUs;
    double q = std::floor(t * kTicksPerUs) / kTicksPerUs;
    if (q >= window) {
        q = std::max(0.0, q - kArrivalResolutionUs);
    }
    return q;
}

// Homogeneous Poisson process on [begin, end) by exponential gaps.
void poisson_process(double rate, double begin, double end, double window, Rng& rng,
                     std::vector<double>& out)
{
    if (rate <= 0.0 || end <= begin) {
        return;
    }
    std::exponential_distribution<double> gap(rate);
    double t = begin + gap(rng);
    while (t < end) {
        out.push_back(quantize(t, window));
        t += gap(rng);
    }
}

double draw_flip_time(double rate, Rng& rng)
{
    if (rate <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::exponential_distribution<double>(rate)(rng);
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

void sort_events(std::vector<PhotonEvent>& events)
{
    std::stable_sort(events.begin(), events.end(), [](const PhotonEvent& a, const PhotonEvent& b) {
        if (a.arrival_us != b.arrival_us) {
            return a.arrival_us < b.arrival_us;
        }
        return a.channel < b.channel;
    });
}

void drop_unrecorded(std::vector<PhotonEvent>& events, const DetectorGeometry& geometry)
{
    if (geometry.intermediate_channels_present()) {
        return;
    }
    std::erase_if(events, [&](const PhotonEvent& e) { return !geometry.is_ion_channel(e.channel); });
}

constexpr std::uint64_t kPoolStreamTag = 0x706f6f6c5f726563ULL;

}  // namespace

void EmissionModel::validate() const
{
    require_rate(bright_rate, "bright_rate", true);
    require_rate(pump_bright_to_dark_rate, "pump_bright_to_dark_rate");
    require_rate(pump_dark_to_bright_rate, "pump_dark_to_bright_rate");
    require_rate(background_scatter_rate, "background_scatter_rate");
    require_rate(detector_dark_rate, "detector_dark_rate");
    require_rate(window_us, "window_us", true);
}

DetectorGeometry::DetectorGeometry(int num_channels, std::vector<int> ion_channels,
                                   std::vector<std::vector<double>> crosstalk,
                                   bool intermediate_channels_present)
    : num_channels_(num_channels),
      ion_channels_(std::move(ion_channels)),
      crosstalk_(std::move(crosstalk)),
      intermediate_(intermediate_channels_present)
{
    const int n = static_cast<int>(ion_channels_.size());
    if (n < 1 || n > kMaxIons) {
        throw std::invalid_argument("geometry: number of ions must be in [1, 12]");
    }
    if (num_channels_ < n) {
        throw std::invalid_argument("geometry: need at least as many channels as ions");
    }
    std::vector<bool> used(static_cast<std::size_t>(num_channels_), false);
    for (int ch : ion_channels_) {
        if (ch < 0 || ch >= num_channels_) {
            throw std::invalid_argument("geometry: ion channel " + std::to_string(ch) + " out of range");
        }
        if (used[static_cast<std::size_t>(ch)]) {
            throw std::invalid_argument("geometry: ion channel " + std::to_string(ch) + " assigned twice");
        }
        used[static_cast<std::size_t>(ch)] = true;
    }
    if (crosstalk_.size() != ion_channels_.size()) {
        throw std::invalid_argument("geometry: need one crosstalk row per ion");
    }
    for (const auto& row : crosstalk_) {
        if (row.size() != static_cast<std::size_t>(num_channels_)) {
            throw std::invalid_argument("geometry: crosstalk row length must equal channel count");
        }
        double sum = 0.0;
        for (double p : row) {
            if (!std::isfinite(p) || p < 0.0) {
                throw std::invalid_argument("geometry: crosstalk probabilities must be finite and >= 0");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw std::invalid_argument("geometry: crosstalk row sums to " + std::to_string(sum));
        }
    }
}

DetectorGeometry DetectorGeometry::from_point_spread(int num_channels, std::vector<int> ion_channels,
                                                     std::span<const double> row,
                                                     bool intermediate_channels_present)
{
    if (row.empty() || row.size() % 2 == 0) {
        throw std::invalid_argument("geometry: point-spread row must have odd length");
    }
    const int half = static_cast<int>(row.size() / 2);
    std::vector<std::vector<double>> crosstalk;
    for (int ch : ion_channels) {
        std::vector<double> weights(static_cast<std::size_t>(std::max(num_channels, 0)), 0.0);
        for (int d = -half; d <= half; ++d) {
            const int m = ch + d;
            if (m >= 0 && m < num_channels) {
                weights[static_cast<std::size_t>(m)] = row[static_cast<std::size_t>(half + d)];
            }
        }
        const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (!(sum > 0.0)) {
            throw std::invalid_argument("geometry: point-spread row puts no weight on the detector");
        }
        for (double& w : weights) {
            w /= sum;
        }
        crosstalk.push_back(std::move(weights));
    }
    return DetectorGeometry(num_channels, std::move(ion_channels), std::move(crosstalk),
                            intermediate_channels_present);
}

DetectorGeometry DetectorGeometry::single_ion()
{
    return DetectorGeometry(1, {0}, {{1.0}}, false);
}

DetectorGeometry DetectorGeometry::alternating(int num_ions, std::span<const double> row)
{
    std::vector<int> channels;
    for (int i = 0; i < num_ions; ++i) {
        channels.push_back(2 * i);
    }
    return from_point_spread(2 * num_ions - 1, std::move(channels), row, true);
}

DetectorGeometry DetectorGeometry::adjacent(int num_ions, std::span<const double> row)
{
    std::vector<int> channels(static_cast<std::size_t>(std::max(num_ions, 0)));
    std::iota(channels.begin(), channels.end(), 0);
    return from_point_spread(num_ions, std::move(channels), row, false);
}

int DetectorGeometry::ion_on_channel(int channel) const
{
    for (std::size_t i = 0; i < ion_channels_.size(); ++i) {
        if (ion_channels_[i] == channel) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

std::vector<int> DetectorGeometry::recorded_channels() const
{
    std::vector<int> out;
    for (int m = 0; m < num_channels_; ++m) {
        if (intermediate_ || is_ion_channel(m)) {
            out.push_back(m);
        }
    }
    return out;
}

std::vector<double> default_alternating_row()
{
    return {0.02, 0.05, 0.86, 0.05, 0.02};
}

std::vector<double> default_adjacent_row()
{
    return {0.12, 0.76, 0.12};
}

std::vector<double> simulate_ion(int state, const EmissionModel& model, Rng& rng)
{
    model.validate();
    if (state != 0 && state != 1) {
        throw std::invalid_argument("simulate_ion: state must be 0 or 1");
    }
    const double window = model.window_us;
    std::vector<double> times;
    if (state == 1) {
        const double flip = draw_flip_time(model.pump_bright_to_dark_rate, rng);
        poisson_process(model.bright_rate, 0.0, std::min(flip, window), window, rng, times);
    } else {
        const double flip = draw_flip_time(model.pump_dark_to_bright_rate, rng);
        if (flip < window) {
            poisson_process(model.bright_rate, flip, window, window, rng, times);
        }
    }
    return times;
}

std::vector<PhotonEvent> route_events(std::span<const std::vector<double>> signal_times,
                                      const DetectorGeometry& geometry, const EmissionModel& model,
                                      Rng& rng)
{
    if (signal_times.size() != static_cast<std::size_t>(geometry.num_ions())) {
        throw std::invalid_argument("route_events: need one arrival list per ion");
    }
    std::vector<PhotonEvent> events;
    for (std::size_t ion = 0; ion < signal_times.size(); ++ion) {
        const auto& row = geometry.crosstalk()[ion];
        std::discrete_distribution<int> channel(row.begin(), row.end());
        for (double t : signal_times[ion]) {
            events.push_back({channel(rng), t});
        }
    }
    std::vector<double> background;
    for (int m = 0; m < geometry.num_channels(); ++m) {
        background.clear();
        poisson_process(model.background_rate(), 0.0, model.window_us, model.window_us, rng, background);
        for (double t : background) {
            events.push_back({m, t});
        }
    }
    drop_unrecorded(events, geometry);
    sort_events(events);
    return events;
}

std::uint64_t sample_stream_seed(std::uint64_t seed, std::uint64_t label_index, std::uint64_t sample_index)
{
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ label_index);
    return splitmix64(h ^ (sample_index * 0xd1b54a32d192ed03ULL));
}

Dataset generate_dataset(const DetectorGeometry& geometry, const EmissionModel& model,
                         std::size_t samples_per_label, std::uint64_t seed,
                         const GenerateOptions& options)
{
    model.validate();
    const int n_ions = geometry.num_ions();
    const std::size_t classes = num_classes(n_ions);
    if (samples_per_label < 1) {
        throw std::invalid_argument("generate_dataset: samples_per_label must be >= 1");
    }
    if (samples_per_label > options.max_samples / classes) {
        throw std::invalid_argument("generate_dataset: " + std::to_string(classes) + " labels x " +
                                    std::to_string(samples_per_label) +
                                    " samples exceeds the configured sample budget");
    }

    // Pool mode records single-ion shots (each with its own background on
    // every channel) and superimposes one record per ion.
    std::vector<std::vector<PhotonEvent>> pool;
    const std::size_t pool_size = options.pool_size == 0 ? samples_per_label : options.pool_size;
    if (options.pool_resampling) {
        pool.resize(static_cast<std::size_t>(n_ions) * 2 * pool_size);
        std::vector<std::vector<double>> signal(static_cast<std::size_t>(n_ions));
        for (int ion = 0; ion < n_ions; ++ion) {
            for (int state = 0; state < 2; ++state) {
                const std::size_t slot = static_cast<std::size_t>(ion * 2 + state);
                for (std::size_t r = 0; r < pool_size; ++r) {
                    Rng rng(sample_stream_seed(seed ^ kPoolStreamTag, slot, r));
                    for (auto& s : signal) {
                        s.clear();
                    }
                    signal[static_cast<std::size_t>(ion)] = simulate_ion(state, model, rng);
                    pool[slot * pool_size + r] = route_events(signal, geometry, model, rng);
                }
            }
        }
    }

    Dataset dataset{{}, geometry, model, seed, samples_per_label, options.pool_resampling};
    const std::size_t total = classes * samples_per_label;
    dataset.samples.resize(total);

    auto make_sample = [&](std::size_t k) {
        const std::size_t label_index = k / samples_per_label;
        const std::size_t sample_index = k % samples_per_label;
        Rng rng(sample_stream_seed(seed, label_index, sample_index));
        ReadoutSample& sample = dataset.samples[k];
        sample.label = label_from_index(label_index, n_ions);
        sample.window_us = model.window_us;
        if (options.pool_resampling) {
            std::uniform_int_distribution<std::size_t> pick(0, pool_size - 1);
            for (int ion = 0; ion < n_ions; ++ion) {
                const std::size_t slot =
                    static_cast<std::size_t>(ion * 2 + ion_bit(label_index, ion, n_ions));
                const auto& record = pool[slot * pool_size + pick(rng)];
                sample.events.insert(sample.events.end(), record.begin(), record.end());
            }
            drop_unrecorded(sample.events, geometry);
            sort_events(sample.events);
        } else {
            std::vector<std::vector<double>> signal;
            signal.reserve(static_cast<std::size_t>(n_ions));
            for (int ion = 0; ion < n_ions; ++ion) {
                signal.push_back(simulate_ion(ion_bit(label_index, ion, n_ions), model, rng));
            }
            sample.events = route_events(signal, geometry, model, rng);
        }
    };

    const unsigned threads = std::max(1U, options.threads);
    if (threads == 1) {
        for (std::size_t k = 0; k < total; ++k) {
            make_sample(k);
        }
    } else {
        std::vector<std::jthread> workers;
        for (unsigned w = 0; w < threads; ++w) {
            workers.emplace_back([&, w] {
                for (std::size_t k = w; k < total; k += threads) {
                    make_sample(k);
                }
            });
        }
    }
    return dataset;
}

}  // namespace ionreadout::sim
