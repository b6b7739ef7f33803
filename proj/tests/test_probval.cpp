#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "smpcval/error.hpp"
#include "smpcval/probval.hpp"

using namespace smpcval;

TEST(GeneralizedMax, SmallExamples) {
    const std::vector<double> v{3, 1, 2};
    EXPECT_EQ(generalized_max(v, 1), 3);
    EXPECT_EQ(generalized_max(v, 3), 1);
    const std::vector<double> ties{5, 5, 2, 1};
    EXPECT_EQ(generalized_max(ties, 2), 5);
    EXPECT_EQ(OrderedSample(ties).generalized_max(3), 2);
}

TEST(GeneralizedMax, OutOfRange) {
    const std::vector<double> v{1, 2};
    EXPECT_THROW(generalized_max(v, 0), std::out_of_range);
    EXPECT_THROW(generalized_max(v, 3), std::out_of_range);
}

TEST(GeneralizedMax, MatchesFullSort) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v(1 + rng() % 300);
        for (double& x : v) x = std::round(4.0 * g(rng)) / 4.0;  // plenty of ties
        const auto r = static_cast<std::int64_t>(1 + rng() % v.size());
        EXPECT_EQ(generalized_max(v, r), oracle::rth_largest(v, r));
        const OrderedSample s(v);
        EXPECT_EQ(s.generalized_max(r), oracle::rth_largest(v, r));
        EXPECT_TRUE(std::is_sorted(s.sorted().begin(), s.sorted().end(), std::greater<>()));
        EXPECT_EQ(s.values(), v);
    }
}

TEST(BinomialTail, SingleTerm) {
    EXPECT_NEAR(binomial_tail(40, 1, 0.1), std::pow(0.9, 40), 1e-15);
}

TEST(BinomialTail, TwoTerms) {
    EXPECT_NEAR(binomial_tail(10, 2, 0.1), std::pow(0.9, 10) + 10 * 0.1 * std::pow(0.9, 9), 1e-14);
    EXPECT_NEAR(binomial_tail(10, 2, 0.1), 0.7361, 1e-4);
}

TEST(BinomialTail, ExampleLevels) {
    const double tail = binomial_tail(2448, 60, 0.05);
    EXPECT_LE(tail, 1e-6 / 48);
    EXPECT_NEAR(tail, static_cast<double>(oracle::binomial_tail(2448, 60, 0.05L)), 1e-9 * 1e-6);
}

TEST(BinomialTail, MatchesSeriesOracle) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ue(0.01, 0.5);
    for (int t = 0; t < 300; ++t) {
        const auto S = static_cast<std::int64_t>(1 + rng() % 5000);
        const auto r = static_cast<std::int64_t>(1 + rng() % std::min<std::int64_t>(S, 150));
        const double eps = ue(rng);
        const double ref = static_cast<double>(oracle::binomial_tail(S, r, eps));
        EXPECT_NEAR(binomial_tail(S, r, eps), ref, 1e-10 * std::max(ref, 1e-300) + 1e-300)
            << "S=" << S << " r=" << r << " eps=" << eps;
    }
}

TEST(SampleComplexity, ExampleTightening) {
    EXPECT_EQ(sample_complexity({0.05, 1e-6, 60, 48}), 2448);
}

TEST(SampleComplexity, SingleDiscard) {
    EXPECT_EQ(sample_complexity({0.05, 1e-6, 1, 1}),
              static_cast<std::int64_t>(std::ceil(std::log(1e6) / 0.05)));
    EXPECT_EQ(sample_complexity({0.05, 1e-6, 1, 1}), 277);
    EXPECT_EQ(sample_complexity({0.5, 0.5, 1, 1}), 2);
}

TEST(SampleComplexity, SweepLevels) {
    // (1/eps)(r - 1 + L + sqrt(2 (r - 1) L)) with L = ln(100 / 1e-6)
    const double L = std::log(100.0 / 1e-6);
    const double bound = (59.0 + L + std::sqrt(2.0 * 59.0 * L)) / 0.05;
    EXPECT_EQ(sample_complexity({0.05, 1e-6, 60, 100}), static_cast<std::int64_t>(std::ceil(bound)));
    EXPECT_EQ(sample_complexity({0.05, 1e-6, 60, 100}), 2481);
}

TEST(SampleComplexity, RejectsBadLevels) {
    EXPECT_THROW(sample_complexity({1.5, 1e-6, 1, 1}), ConfigError);
    EXPECT_THROW(sample_complexity({0.05, 0.0, 1, 1}), ConfigError);
    EXPECT_THROW(sample_complexity({0.05, 1e-6, 0, 1}), ConfigError);
    EXPECT_THROW(sample_complexity({0.05, 1e-6, 1, 0}), ConfigError);
}

TEST(SampleComplexity, ExplicitBoundImpliesBinomialCondition) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ue(0.01, 0.3);
    std::uniform_real_distribution<double> ld(std::log(1e-9), std::log(0.1));
    for (int t = 0; t < 300; ++t) {
        ProbabilisticLevels lv;
        lv.epsilon = ue(rng);
        lv.delta = std::exp(ld(rng));
        lv.r = static_cast<std::int64_t>(1 + rng() % 100);
        lv.multiplicity = static_cast<std::int64_t>(1 + rng() % 1000);
        const std::int64_t S = sample_complexity(lv);
        const long double target = lv.delta / static_cast<long double>(lv.multiplicity);
        EXPECT_LE(oracle::binomial_tail(S, lv.r, lv.epsilon), target);
        const std::int64_t exact = min_sample_size_exact(lv.epsilon, lv.delta / lv.multiplicity, lv.r);
        EXPECT_LE(exact, S);
        EXPECT_LE(oracle::binomial_tail(exact, lv.r, lv.epsilon), target * (1.0L + 1e-9L));
        if (exact > lv.r) EXPECT_GT(oracle::binomial_tail(exact - 1, lv.r, lv.epsilon), target * (1.0L - 1e-9L));
    }
}

TEST(MinSampleSizeExact, Examples) {
    EXPECT_LE(min_sample_size_exact(0.05, 1e-6 / 48, 60), 2448);
    EXPECT_EQ(min_sample_size_exact(0.3, 1.0, 7), 7);
    EXPECT_EQ(min_sample_size_exact(0.5, 0.25, 1), 2);
}

TEST(DiscardingFromRatio, KeepsRatio) {
    for (double ratio : {0.005, 0.01, 0.02, 0.04}) {
        const std::int64_t r = discarding_from_ratio(0.05, 1e-6, 48, ratio);
        ASSERT_GE(r, 1);
        const std::int64_t S = sample_complexity({0.05, 1e-6, r, 48});
        if (r > 1) EXPECT_LE(static_cast<double>(r) / static_cast<double>(S), ratio);
        const std::int64_t S_next = sample_complexity({0.05, 1e-6, r + 1, 48});
        EXPECT_GT(static_cast<double>(r + 1) / static_cast<double>(S_next), ratio);
    }
    EXPECT_THROW(discarding_from_ratio(0.05, 1e-6, 48, 0.06), ConfigError);
}
