#include "ionreadout/labels.hpp"
#include "ionreadout/threshold.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ionreadout;
using namespace ionreadout::threshold;

namespace {

struct Labeled {
    std::vector<CountVector> counts;
    std::vector<std::size_t> labels;
};

/// Each ion: Poisson(bright) or Poisson(dark) on its own channel plus
/// `leak` x bright-mean leaking in from each bright chain neighbor.
Labeled poisson_chain(int n_ions, double bright, double dark, double leak, int per_label, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    Labeled out;
    const std::size_t classes = num_classes(n_ions);
    for (std::size_t c = 0; c < classes; ++c) {
        for (int k = 0; k < per_label; ++k) {
            CountVector v(static_cast<std::size_t>(n_ions));
            for (int i = 0; i < n_ions; ++i) {
                double mean = ion_bit(c, i, n_ions) ? bright : dark;
                for (int j : {i - 1, i + 1}) {
                    if (j >= 0 && j < n_ions && ion_bit(c, j, n_ions)) {
                        mean += leak * bright;
                    }
                }
                v[static_cast<std::size_t>(i)] = std::poisson_distribution<int>(mean)(rng);
            }
            out.counts.push_back(v);
            out.labels.push_back(c);
        }
    }
    return out;
}

/// Histogram samples proportional to the exact pmf, so the empirical
/// marginals are the true distributions up to rounding of 1e7 draws.
std::vector<int> exact_histogram_samples(double mean, double total)
{
    const boost::math::poisson_distribution<double> d(mean);
    std::vector<int> out;
    for (int k = 0; k < 60; ++k) {
        const auto n = static_cast<long>(std::llround(total * boost::math::pdf(d, k)));
        out.insert(out.end(), static_cast<std::size_t>(n), k);
    }
    return out;
}

}  // namespace

TEST(BestThreshold, MatchesExactPoissonOracleOnExactHistograms)
{
    for (auto [bright, dark] : {std::pair{9.0, 0.003}, std::pair{9.0, 0.5}, std::pair{12.0, 2.0},
                                std::pair{6.0, 1.0}, std::pair{20.0, 5.0}}) {
        const auto b = exact_histogram_samples(bright, 1e7);
        const auto d = exact_histogram_samples(dark, 1e7);
        EXPECT_EQ(best_threshold(b, d), oracle::poisson_threshold(bright, dark)) << bright << " vs " << dark;
    }
}

TEST(BestThreshold, MatchesExactPoissonOracleOnSampledShots)
{
    // Cases whose best and second-best errors are far apart relative to the
    // sampling noise of 1e5 shots per class.
    for (auto [bright, dark] : {std::pair{9.0, 0.003}, std::pair{12.0, 2.0}, std::pair{12.0, 1.0}, std::pair{9.0, 2.0}}) {
        ASSERT_GT(oracle::poisson_threshold_margin(bright, dark), 1e-3);
        std::mt19937_64 rng(99);
        std::vector<int> b(100000);
        std::vector<int> d(100000);
        for (auto& x : b) {
            x = std::poisson_distribution<int>(bright)(rng);
        }
        for (auto& x : d) {
            x = std::poisson_distribution<int>(dark)(rng);
        }
        EXPECT_EQ(best_threshold(b, d), oracle::poisson_threshold(bright, dark));
    }
}

TEST(BestThreshold, DisjointSupportsTieBreakToZero)
{
    const std::vector<int> dark(100, 0);
    const std::vector<int> bright{3, 4, 5, 9, 3, 7};
    EXPECT_EQ(best_threshold(bright, dark), 0);
    EXPECT_THROW(best_threshold(bright, {}), std::invalid_argument);
}

TEST(FitFixed, SharedAndPerChannel)
{
    const auto data = poisson_chain(3, 9.0, 0.01, 0.0, 2000, 5);
    const auto shared = fit_fixed(data.counts, data.labels, 3);
    ASSERT_EQ(shared.thresholds.size(), 3u);
    EXPECT_EQ(shared.thresholds[0], shared.thresholds[1]);
    EXPECT_EQ(shared.thresholds[1], shared.thresholds[2]);
    const auto per = fit_fixed(data.counts, data.labels, 3, {false});
    EXPECT_EQ(per.thresholds.size(), 3u);
    // Only 000 present: every ion is always dark.
    std::vector<CountVector> counts{{0, 0, 0}};
    std::vector<std::size_t> labels{0};
    EXPECT_THROW(fit_fixed(counts, labels, 3), std::invalid_argument);
}

TEST(FitFixed, CrosstalkRaisesThreshold)
{
    const auto single = poisson_chain(1, 9.0, 0.01, 0.0, 20000, 6);
    const auto chain = poisson_chain(3, 9.0, 0.01, 0.15, 5000, 6);
    EXPECT_GE(fit_fixed(chain.counts, chain.labels, 3).thresholds[0],
              fit_fixed(single.counts, single.labels, 1).thresholds[0]);
}

TEST(ClassifyFixed, BoundaryAndTruthTable)
{
    const FixedThresholdModel m{{3, 3, 3}};
    EXPECT_EQ(classify_fixed(m, CountVector{12, 0, 11}), "101");
    EXPECT_EQ(classify_fixed(m, CountVector{3, 4, 3}), "010");

    const FixedThresholdModel two{{2, 5}};
    for (int a = 0; a <= 20; ++a) {
        for (int b = 0; b <= 20; ++b) {
            const std::string expected = std::string(1, a > 2 ? '1' : '0') + (b > 5 ? '1' : '0');
            EXPECT_EQ(classify_fixed(two, CountVector{a, b}), expected);
            EXPECT_EQ(classify_fixed_index(two, CountVector{a, b}), index_from_label(expected));
        }
    }
}

TEST(ClassifyFixed, MonotoneInOwnCount)
{
    const FixedThresholdModel m{{1, 4, 2}};
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 15; ++c) {
            CountVector lo{5, 5, 5};
            CountVector hi = lo;
            lo[static_cast<std::size_t>(i)] = c;
            hi[static_cast<std::size_t>(i)] = c + 1;
            const auto a = classify_fixed(m, lo);
            const auto b = classify_fixed(m, hi);
            EXPECT_LE(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]);
        }
    }
}

TEST(FitAdaptive, ContextCountsAndNoCrosstalk)
{
    const auto data = poisson_chain(3, 9.0, 0.01, 0.0, 3000, 7);
    const auto model = fit_adaptive(data.counts, data.labels, 3);
    ASSERT_EQ(model.context_thresholds.size(), 3u);
    EXPECT_EQ(model.context_thresholds[0].size(), 2u);
    EXPECT_EQ(model.context_thresholds[1].size(), 4u);
    EXPECT_EQ(model.context_thresholds[2].size(), 2u);
    EXPECT_EQ(chain_neighbors(1, 3), (std::vector<int>{0, 2}));
    EXPECT_EQ(chain_neighbors(0, 3), (std::vector<int>{1}));
    // Without neighbor dependence every context threshold lands on the fixed one.
    for (int i = 0; i < 3; ++i) {
        for (int t : model.context_thresholds[static_cast<std::size_t>(i)]) {
            EXPECT_EQ(t, model.initial.thresholds[static_cast<std::size_t>(i)]);
        }
    }
    EXPECT_TRUE(model.starved_contexts.empty());
}

TEST(FitAdaptive, LeakageRaisesBrightNeighborContext)
{
    // Dark mean 0.05 becomes 0.05 + 0.3 * 9 with a bright neighbor.
    const auto data = poisson_chain(2, 9.0, 0.05, 0.3, 20000, 8);
    const auto model = fit_adaptive(data.counts, data.labels, 2, {100, 10, {false}});
    const int dark_ctx = model.threshold(0, "0");
    const int bright_ctx = model.threshold(0, "1");
    EXPECT_GT(bright_ctx, dark_ctx);
    EXPECT_EQ(dark_ctx, oracle::poisson_threshold(9.0, 0.05));
    EXPECT_EQ(bright_ctx, oracle::poisson_threshold(9.0 + 0.3 * 9.0, 0.05 + 0.3 * 9.0));
}

TEST(FitAdaptive, StarvedContextsFallBack)
{
    auto data = poisson_chain(2, 9.0, 0.05, 0.3, 150, 9);
    const auto model = fit_adaptive(data.counts, data.labels, 2, {1000, 10, {}});
    EXPECT_EQ(model.starved_contexts.size(), 4u);
    for (const auto& row : model.context_thresholds) {
        for (int t : row) {
            EXPECT_EQ(t, model.initial.thresholds[0]);
        }
    }
}

TEST(ClassifyAdaptive, EqualThresholdsCollapseToFixed)
{
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> count(0, 15);
    for (int n = 1; n <= 4; ++n) {
        AdaptiveThresholdModel m;
        m.initial.thresholds.assign(static_cast<std::size_t>(n), 3);
        for (int i = 0; i < n; ++i) {
            m.neighbors.push_back(chain_neighbors(i, n));
            m.context_thresholds.emplace_back(std::size_t{1} << m.neighbors.back().size(), 3);
        }
        for (int k = 0; k < 2000; ++k) {
            CountVector c(static_cast<std::size_t>(n));
            for (auto& x : c) {
                x = count(rng);
            }
            const auto r = classify_adaptive(m, c);
            EXPECT_EQ(r.label, classify_fixed(m.initial, c));
            EXPECT_TRUE(r.converged);
            EXPECT_EQ(r.iterations, 1);
        }
    }
}

TEST(ClassifyAdaptive, HandBuiltTwoIonFixedPoint)
{
    AdaptiveThresholdModel m;
    m.initial.thresholds = {4, 4};
    m.neighbors = {{1}, {0}};
    // Ion 0 with a bright neighbor uses a lower cut.
    m.context_thresholds = {{4, 2}, {4, 4}};
    const CountVector counts{4, 12};
    const auto r = classify_adaptive(m, counts);
    EXPECT_EQ(r.label, "11");
    EXPECT_EQ(r.iterations, 2);
    EXPECT_TRUE(r.converged);

    // Exhaustive search over all four labels for self-consistent ones.
    std::vector<std::string> fixed_points;
    for (std::size_t idx = 0; idx < 4; ++idx) {
        const auto label = label_from_index(idx, 2);
        bool consistent = true;
        for (int i = 0; i < 2; ++i) {
            const std::string ctx(1, label[static_cast<std::size_t>(1 - i)]);
            const bool bright = counts[static_cast<std::size_t>(i)] > m.threshold(i, ctx);
            consistent = consistent && (bright == (label[static_cast<std::size_t>(i)] == '1'));
        }
        if (consistent) {
            fixed_points.push_back(label);
        }
    }
    ASSERT_EQ(fixed_points.size(), 1u);
    EXPECT_EQ(fixed_points[0], r.label);
}

TEST(ClassifyAdaptive, OscillationHitsCapAndIsFlagged)
{
    AdaptiveThresholdModel m;
    m.initial.thresholds = {4, 4};
    m.neighbors = {{1}, {0}};
    // Each ion reads bright only when its neighbor reads dark: 01 <-> 10.
    m.context_thresholds = {{3, 9}, {3, 9}};
    m.max_iterations = 10;
    const auto r = classify_adaptive(m, CountVector{5, 5});
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 10);
}

TEST(ThresholdJson, RoundTrip)
{
    const auto data = poisson_chain(3, 9.0, 0.05, 0.1, 500, 12);
    const auto fixed = fit_fixed(data.counts, data.labels, 3);
    EXPECT_EQ(fixed_from_json(to_json(fixed)), fixed);
    const auto adaptive = fit_adaptive(data.counts, data.labels, 3, {300, 7, {}});
    EXPECT_EQ(adaptive_from_json(to_json(adaptive)), adaptive);
}
