#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "smpcval/error.hpp"
#include "smpcval/uncertainty.hpp"

using namespace smpcval;

TEST(Disturbance, TruncationBoundHolds) {
    const DisturbanceModel m = oracle::paper_disturbance(7);
    for (std::uint64_t s = 0; s < 200; ++s) {
        const DisturbanceSequence d = draw_disturbance_sequence(m, 50, s);
        for (Eigen::Index k = 0; k < d.length(); ++k) EXPECT_LE(d[k].squaredNorm(), 0.02);
    }
}

TEST(Disturbance, ZeroCovarianceGivesZeros) {
    DisturbanceModel m = oracle::paper_disturbance(7);
    m.covariance.setZero();
    const DisturbanceSequence d = draw_disturbance_sequence(m, 30, 4);
    EXPECT_TRUE(d.entries.isZero(0.0));
}

TEST(Disturbance, TruncatedVarianceMatchesMoment) {
    const DisturbanceModel m = oracle::paper_disturbance(123);
    const double expected = oracle::truncated_disc_variance(0.04, 0.02);
    const int n_seq = 1000, L = 100;  // 10^5 draws
    double s2[2] = {0, 0}, s4[2] = {0, 0};
    for (int s = 0; s < n_seq; ++s) {
        const DisturbanceSequence d = draw_disturbance_sequence(m, L, static_cast<std::uint64_t>(s));
        for (Eigen::Index k = 0; k < L; ++k)
            for (int i = 0; i < 2; ++i) {
                const double w2 = d[k](i) * d[k](i);
                s2[i] += w2;
                s4[i] += w2 * w2;
            }
    }
    const double n = n_seq * L;
    for (int i = 0; i < 2; ++i) {
        const double var = s2[i] / n;
        const double se = std::sqrt((s4[i] / n - var * var) / n);
        EXPECT_NEAR(var, expected, 3.0 * se) << "coordinate " << i;
    }
}

TEST(Disturbance, UniformBallStaysInside) {
    DisturbanceModel m;
    m.kind = DisturbanceKind::UniformBall;
    m.covariance = Matrix::Zero(3, 3);
    m.truncation_radius_sq = 0.25;
    m.seed = 3;
    double max_norm_sq = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const DisturbanceSequence d = draw_disturbance_sequence(m, 20, s);
        for (Eigen::Index k = 0; k < d.length(); ++k) max_norm_sq = std::max(max_norm_sq, d[k].squaredNorm());
    }
    EXPECT_LE(max_norm_sq, 0.25);
    EXPECT_GT(max_norm_sq, 0.2);
}

TEST(Disturbance, UserTableCycles) {
    DisturbanceModel m;
    m.kind = DisturbanceKind::UserTable;
    m.table.resize(3, 1);
    m.table << 1.0, 2.0, 3.0;
    const DisturbanceSequence d0 = draw_disturbance_sequence(m, 2, 0);
    const DisturbanceSequence d1 = draw_disturbance_sequence(m, 2, 1);
    EXPECT_EQ(d0[0](0), 1.0);
    EXPECT_EQ(d0[1](0), 2.0);
    EXPECT_EQ(d1[0](0), 3.0);
    EXPECT_EQ(d1[1](0), 1.0);
}

TEST(Disturbance, StreamsAreReproducibleAndDistinct) {
    const DisturbanceModel m = oracle::paper_disturbance(99);
    const Matrix a = draw_disturbance_sequence(m, 10, 5).entries;
    const Matrix b = draw_disturbance_sequence(m, 10, 5).entries;
    const Matrix c = draw_disturbance_sequence(m, 10, 6).entries;
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(Disturbance, InvalidModels) {
    DisturbanceModel m = oracle::paper_disturbance(1);
    m.covariance(0, 0) = -1.0;
    EXPECT_THROW(m.validate(), ConfigError);
    m = oracle::paper_disturbance(1);
    m.truncation_radius_sq = -0.1;
    EXPECT_THROW(m.validate(), ConfigError);
}

TEST(PropagateError, StartsAtZero) {
    const DisturbanceSequence d = draw_disturbance_sequence(oracle::paper_disturbance(1), 8, 0);
    Matrix AK(2, 2);
    AK << 0.3, 0.1, -0.2, 0.5;
    EXPECT_TRUE(propagate_error(AK, d).col(0).isZero(0.0));
}

TEST(PropagateError, MemorylessClosedLoop) {
    const DisturbanceSequence d = draw_disturbance_sequence(oracle::paper_disturbance(1), 8, 0);
    const Matrix e = propagate_error(Matrix::Zero(2, 2), d);
    for (Eigen::Index l = 1; l <= 8; ++l) EXPECT_EQ(e.col(l), d[l - 1]);
}

TEST(PropagateError, GeometricAccumulation) {
    DisturbanceSequence d{Matrix::Ones(1, 4)};
    const Matrix e = propagate_error(Matrix::Constant(1, 1, 0.5), d);
    const double expected[] = {0.0, 1.0, 1.5, 1.75, 1.875};
    for (int l = 0; l <= 4; ++l) EXPECT_DOUBLE_EQ(e(0, l), expected[l]);
}

TEST(InitialState, AcceptedPointsSatisfyOracle) {
    Box box{Vector::Constant(2, -2.0), Vector::Constant(2, 2.0)};
    auto in_disc = [](const Vector& x) { return x.squaredNorm() <= 1.0; };
    for (std::uint64_t i = 0; i < 300; ++i) {
        const Vector x = sample_feasible_initial_state(in_disc, box, 17, i);
        EXPECT_LE(x.squaredNorm(), 1.0);
        EXPECT_TRUE(box.contains(x));
    }
}

TEST(InitialState, EmptyRegionThrows) {
    Box box{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
    EXPECT_THROW(sample_feasible_initial_state([](const Vector&) { return false; }, box, 1, 0),
                 NumericalError);
}

TEST(ScenarioBatch, IndependentOfThreadCount) {
    Box box{Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)};
    auto any = [](const Vector&) { return true; };
    const DisturbanceModel m = oracle::paper_disturbance(1);
    const ScenarioBatch a = generate_scenario_batch(any, box, m, 64, 20, 77, 1);
    const ScenarioBatch b = generate_scenario_batch(any, box, m, 64, 20, 77, 4);
    EXPECT_EQ(a.hash(), b.hash());
    const ScenarioBatch c = generate_scenario_batch(any, box, m, 64, 20, 78, 1);
    EXPECT_NE(a.hash(), c.hash());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.scenarios[i].x0, b.scenarios[i].x0);
        EXPECT_EQ(a.scenarios[i].disturbances.length(), 20);
    }
}

TEST(DisturbanceTable, ReadsCsvWithComments) {
    const auto path = std::filesystem::temp_directory_path() / "smpcval_table_test.csv";
    {
        std::ofstream out(path);
        out << "# draws\n0.1, -0.2\n0.3,0.4\n";
    }
    const Matrix t = read_disturbance_table(path.string(), 2);
    ASSERT_EQ(t.rows(), 2);
    EXPECT_DOUBLE_EQ(t(0, 1), -0.2);
    EXPECT_DOUBLE_EQ(t(1, 0), 0.3);
    EXPECT_THROW(read_disturbance_table(path.string(), 3), ConfigError);
    std::filesystem::remove(path);
}
