#include "ionreadout/dataset_io.hpp"
#include "ionreadout/labels.hpp"
#include "ionreadout/readout_sim.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/poisson.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <map>
#include <sstream>

using namespace ionreadout;
using namespace ionreadout::sim;

namespace {

EmissionModel no_pumping()
{
    EmissionModel m;
    m.pump_bright_to_dark_rate = 0.0;
    m.pump_dark_to_bright_rate = 0.0;
    return m;
}

std::string serialize(const Dataset& d)
{
    std::ostringstream out;
    write_dataset(out, d);
    return out.str();
}

}  // namespace

TEST(Labels, IndexRoundTrip)
{
    EXPECT_EQ(index_from_label("000"), 0u);
    EXPECT_EQ(index_from_label("001"), 1u);
    EXPECT_EQ(index_from_label("100"), 4u);
    EXPECT_EQ(index_from_label("111"), 7u);
    for (std::size_t i = 0; i < 32; ++i) {
        EXPECT_EQ(index_from_label(label_from_index(i, 5)), i);
    }
    EXPECT_EQ(ion_bit(index_from_label("100"), 0, 3), 1);
    EXPECT_EQ(ion_bit(index_from_label("100"), 2, 3), 0);
    EXPECT_THROW(index_from_label("012"), std::invalid_argument);
    EXPECT_THROW(index_from_label(""), std::invalid_argument);
    EXPECT_THROW(num_classes(13), std::invalid_argument);
}

TEST(EmissionModel, RejectsBadRates)
{
    EmissionModel m;
    EXPECT_NO_THROW(m.validate());
    m.bright_rate = 0.0;
    EXPECT_THROW(m.validate(), std::invalid_argument);
    m = {};
    m.pump_dark_to_bright_rate = std::nan("");
    EXPECT_THROW(m.validate(), std::invalid_argument);
    m = {};
    m.background_scatter_rate = -1e-6;
    EXPECT_THROW(m.validate(), std::invalid_argument);
    m = {};
    m.window_us = 0.0;
    EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(Geometry, ValidatesRowsAndChannels)
{
    EXPECT_THROW(DetectorGeometry(3, {0, 0}, {{1, 0, 0}, {1, 0, 0}}, true), std::invalid_argument);
    EXPECT_THROW(DetectorGeometry(3, {0, 3}, {{1, 0, 0}, {0, 0, 1}}, true), std::invalid_argument);
    EXPECT_THROW(DetectorGeometry(3, {0, 2}, {{0.5, 0, 0}, {0, 0, 1}}, true), std::invalid_argument);
    const auto g = DetectorGeometry::alternating(3, default_alternating_row());
    EXPECT_EQ(g.num_channels(), 5);
    EXPECT_EQ(g.ion_channels(), (std::vector<int>{0, 2, 4}));
    EXPECT_TRUE(g.intermediate_channels_present());
    for (const auto& row : g.crosstalk()) {
        double sum = 0.0;
        for (double p : row) {
            sum += p;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    // Edge ion: weight beyond channel 0 is dropped and the row renormalized.
    const std::vector<double> row{0.1, 0.8, 0.1};
    const auto adj = DetectorGeometry::adjacent(3, row);
    EXPECT_NEAR(adj.crosstalk()[0][0], 0.8 / 0.9, 1e-12);
    EXPECT_NEAR(adj.crosstalk()[1][0], 0.1, 1e-12);
    EXPECT_FALSE(adj.intermediate_channels_present());
    EXPECT_EQ(adj.ion_on_channel(1), 1);
    EXPECT_EQ(g.ion_on_channel(1), -1);
}

TEST(SimulateIon, DarkWithoutPumpingEmitsNothing)
{
    const auto m = no_pumping();
    Rng rng(5);
    for (int k = 0; k < 2000; ++k) {
        EXPECT_TRUE(simulate_ion(0, m, rng).empty());
    }
}

TEST(SimulateIon, TimesSortedQuantizedAndInWindow)
{
    EmissionModel m;
    m.pump_dark_to_bright_rate = 0.01;
    Rng rng(11);
    for (int k = 0; k < 500; ++k) {
        for (int state : {0, 1}) {
            const auto t = simulate_ion(state, m, rng);
            EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
            for (double x : t) {
                EXPECT_GE(x, 0.0);
                EXPECT_LT(x, m.window_us);
                EXPECT_NEAR(x * 10.0, std::round(x * 10.0), 1e-9);
            }
        }
    }
}

TEST(SimulateIon, BrightCountsArePoisson)
{
    const auto m = no_pumping();
    Rng rng(2024);
    const int shots = 100000;
    std::vector<int> counts(shots);
    double sum = 0.0;
    for (int k = 0; k < shots; ++k) {
        counts[k] = static_cast<int>(simulate_ion(1, m, rng).size());
        sum += counts[k];
    }
    const double mean = sum / shots;
    EXPECT_NEAR(mean, 9.0, 3.0 * std::sqrt(9.0 / shots));
    EXPECT_GT(oracle::poisson_chi_square_p(counts, 9.0), 0.001);
}

TEST(SimulateIon, BrightToDarkPumpingTailMatchesQuadrature)
{
    EmissionModel m = no_pumping();
    m.pump_bright_to_dark_rate = 0.01;
    const double lambda = m.bright_rate;
    const double r = m.pump_bright_to_dark_rate;
    const double w = m.window_us;

    // P(count <= 4) = int_0^W r e^{-r tau} P(Pois(lambda tau) <= 4) dtau + e^{-rW} P(Pois(lambda W) <= 4)
    auto low_tail = [](double mu) {
        return mu == 0.0 ? 1.0 : boost::math::cdf(boost::math::poisson_distribution<double>(mu), 4);
    };
    const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double tau) { return r * std::exp(-r * tau) * low_tail(lambda * tau); }, 0.0, w);
    const double expected = integral + std::exp(-r * w) * low_tail(lambda * w);
    const double pure_poisson = low_tail(lambda * w);

    Rng rng(77);
    const int shots = 100000;
    int low = 0;
    for (int k = 0; k < shots; ++k) {
        low += simulate_ion(1, m, rng).size() <= 4 ? 1 : 0;
    }
    const double frac = static_cast<double>(low) / shots;
    const double sigma = std::sqrt(expected * (1 - expected) / shots);
    EXPECT_NEAR(frac, expected, 3.0 * sigma);
    EXPECT_GT(frac, pure_poisson + 3.0 * sigma);
}

TEST(SimulateIon, DarkPumpedPhotonsArriveLate)
{
    EmissionModel m;
    m.pump_bright_to_dark_rate = 0.005;
    m.pump_dark_to_bright_rate = 0.005;
    Rng rng(3);
    double dark_sum = 0.0;
    double bright_sum = 0.0;
    int dark_n = 0;
    int bright_n = 0;
    for (int k = 0; k < 40000; ++k) {
        const auto d = simulate_ion(0, m, rng);
        if (!d.empty()) {
            dark_sum += d.front();
            ++dark_n;
        }
        const auto b = simulate_ion(1, m, rng);
        if (!b.empty()) {
            bright_sum += b.front();
            ++bright_n;
        }
    }
    ASSERT_GT(dark_n, 100);
    EXPECT_GT(dark_sum / dark_n, bright_sum / bright_n);
}

TEST(RouteEvents, IdentityCrosstalkPreservesCounts)
{
    EmissionModel m = no_pumping();
    m.background_scatter_rate = 0.0;
    m.detector_dark_rate = 0.0;
    const DetectorGeometry g(3, {0, 1, 2}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, false);
    Rng rng(9);
    for (int k = 0; k < 200; ++k) {
        std::vector<std::vector<double>> signal{simulate_ion(1, m, rng), simulate_ion(0, m, rng),
                                                simulate_ion(1, m, rng)};
        const auto events = route_events(signal, g, m, rng);
        std::map<int, std::size_t> per_channel;
        for (const auto& e : events) {
            ++per_channel[e.channel];
        }
        EXPECT_EQ(per_channel[0], signal[0].size());
        EXPECT_EQ(per_channel[1], 0u);
        EXPECT_EQ(per_channel[2], signal[2].size());
        EXPECT_EQ(events.size(), signal[0].size() + signal[2].size());
    }
}

TEST(RouteEvents, BackgroundRateMatchesPerChannelExpectation)
{
    EmissionModel m;  // 22 counts/s per channel
    const DetectorGeometry g(3, {0, 1, 2}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, false);
    Rng rng(15);
    const int shots = 200000;
    long total = 0;
    const std::vector<std::vector<double>> nothing(3);
    for (int k = 0; k < shots; ++k) {
        total += static_cast<long>(route_events(nothing, g, m, rng).size());
    }
    const double expected = 3 * 22e-6 * 150.0;  // 0.0099 clicks per shot
    EXPECT_NEAR(expected, 0.0099, 1e-12);
    EXPECT_NEAR(static_cast<double>(total) / shots, expected, 3.0 * std::sqrt(expected / shots));
}

TEST(RouteEvents, NeighborChannelMeanFollowsThinning)
{
    EmissionModel m = no_pumping();
    m.background_scatter_rate = 0.0;
    m.detector_dark_rate = 0.0;
    const std::vector<double> row{0.05, 0.9, 0.05};
    const auto g = DetectorGeometry::from_point_spread(3, {1}, row, true);
    Rng rng(21);
    const int shots = 100000;
    long left = 0;
    long total = 0;
    long routed = 0;
    for (int k = 0; k < shots; ++k) {
        std::vector<std::vector<double>> signal{simulate_ion(1, m, rng)};
        const auto events = route_events(signal, g, m, rng);
        for (const auto& e : events) {
            left += e.channel == 0 ? 1 : 0;
        }
        total += static_cast<long>(signal[0].size());
        routed += static_cast<long>(events.size());
    }
    EXPECT_EQ(routed, total);  // thinning conserves photons
    const double mean = static_cast<double>(left) / shots;
    EXPECT_NEAR(mean, 0.05 * 9.0, 3.0 * std::sqrt(0.05 * 9.0 / shots));
}

TEST(RouteEvents, DropsUnrecordedChannelsAndSortsByTimeThenChannel)
{
    EmissionModel m = no_pumping();
    m.background_scatter_rate = 0.0;
    m.detector_dark_rate = 0.0;
    const std::vector<double> row{0.3, 0.4, 0.3};
    const auto g = DetectorGeometry::from_point_spread(3, {0, 2}, row, false);
    Rng rng(4);
    for (int k = 0; k < 200; ++k) {
        std::vector<std::vector<double>> signal{simulate_ion(1, m, rng), simulate_ion(1, m, rng)};
        const auto events = route_events(signal, g, m, rng);
        for (std::size_t i = 0; i < events.size(); ++i) {
            EXPECT_NE(events[i].channel, 1);
            if (i > 0) {
                const auto& a = events[i - 1];
                const auto& b = events[i];
                EXPECT_TRUE(a.arrival_us < b.arrival_us || (a.arrival_us == b.arrival_us && a.channel <= b.channel));
            }
        }
    }
}

TEST(GenerateDataset, CountsLabelsAndOrder)
{
    const auto g = DetectorGeometry::alternating(3, default_alternating_row());
    const auto d = generate_dataset(g, EmissionModel{}, 2, 1);
    ASSERT_EQ(d.samples.size(), 16u);
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_EQ(d.samples[i].label, label_from_index(i / 2, 3));
        EXPECT_EQ(d.samples[i].window_us, 150.0);
    }
    EXPECT_THROW(generate_dataset(DetectorGeometry::adjacent(12, default_adjacent_row()), EmissionModel{}, 0, 1),
                 std::invalid_argument);
}

TEST(GenerateDataset, RejectsMoreThanTwelveIons)
{
    std::vector<double> row{1.0};
    EXPECT_THROW(DetectorGeometry::adjacent(13, row), std::invalid_argument);
}

TEST(GenerateDataset, ReproducibleAcrossRunsAndThreads)
{
    const auto g = DetectorGeometry::alternating(3, default_alternating_row());
    GenerateOptions one;
    GenerateOptions four;
    four.threads = 4;
    const auto a = serialize(generate_dataset(g, EmissionModel{}, 300, 42, one));
    const auto b = serialize(generate_dataset(g, EmissionModel{}, 300, 42, one));
    const auto c = serialize(generate_dataset(g, EmissionModel{}, 300, 42, four));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_NE(a, serialize(generate_dataset(g, EmissionModel{}, 300, 43, one)));

    GenerateOptions pool = one;
    pool.pool_resampling = true;
    GenerateOptions pool4 = pool;
    pool4.threads = 3;
    EXPECT_EQ(serialize(generate_dataset(g, EmissionModel{}, 300, 42, pool)),
              serialize(generate_dataset(g, EmissionModel{}, 300, 42, pool4)));
}

TEST(GenerateDataset, SingleIonMeans)
{
    const auto g = DetectorGeometry::single_ion();
    const EmissionModel m;
    const auto d = generate_dataset(g, m, 100000, 8);
    double dark = 0.0;
    double bright = 0.0;
    for (const auto& s : d.samples) {
        (s.label == "1" ? bright : dark) += static_cast<double>(s.events.size());
    }
    bright /= 100000.0;
    dark /= 100000.0;
    // Pumping pulls the bright mean slightly below 9; the dark mean is
    // background plus rare dark-to-bright pumping.
    EXPECT_NEAR(bright, 9.0, 0.03 + 9.0 * 0.5 * m.pump_bright_to_dark_rate * m.window_us);
    const double background = m.background_rate() * m.window_us;
    EXPECT_GT(dark, background * 0.8);
    EXPECT_LT(dark, background + 9.0 * 0.5 * m.pump_dark_to_bright_rate * m.window_us + 0.01);
}

TEST(GenerateDataset, PoolModeSuperimposesSingleIonShots)
{
    EmissionModel m = no_pumping();
    m.background_scatter_rate = 0.0;
    m.detector_dark_rate = 0.0;
    const DetectorGeometry g(2, {0, 1}, {{1, 0}, {0, 1}}, false);
    GenerateOptions pool;
    pool.pool_resampling = true;
    pool.pool_size = 50;
    const auto d = generate_dataset(g, m, 200, 3, pool);
    for (const auto& s : d.samples) {
        for (const auto& e : s.events) {
            const int bit = s.label[static_cast<std::size_t>(e.channel)] - '0';
            EXPECT_EQ(bit, 1);
        }
    }
}

TEST(DatasetIo, RoundTrip)
{
    const auto g = DetectorGeometry::alternating(2, default_alternating_row());
    const auto d = generate_dataset(g, EmissionModel{}, 20, 6);
    std::stringstream buf;
    write_dataset(buf, d);
    const auto back = read_dataset(buf);
    EXPECT_EQ(back.samples, d.samples);
    EXPECT_EQ(back.geometry, d.geometry);
    EXPECT_EQ(back.model, d.model);
    EXPECT_EQ(back.seed, d.seed);
    EXPECT_EQ(back.samples_per_label, d.samples_per_label);
    EXPECT_EQ(serialize(back), serialize(d));
}

TEST(DatasetIo, MalformedLineNamed)
{
    const auto d = generate_dataset(DetectorGeometry::single_ion(), EmissionModel{}, 2, 6);
    std::string text = serialize(d) + "{not json\n";
    std::istringstream in(text);
    try {
        read_dataset(in);
        FAIL() << "expected a parse error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos) << e.what();
    }
}
