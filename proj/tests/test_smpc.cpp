#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "smpcval/error.hpp"
#include "smpcval/smpc.hpp"

using namespace smpcval;

namespace {

struct Example {
    LtiSystem sys = oracle::paper_system();
    ControllerDesign design = oracle::paper_design(sys);
    TighteningProfile profile =
        compute_tightening(sys, design, oracle::paper_disturbance(1), {0.05, 1e-6, 60, 1});
};

const Example& example() {
    static const Example ex;
    return ex;
}

Vector random_decision(std::mt19937_64& rng, const HorizonLayout& L) {
    std::normal_distribution<double> g;
    Vector y(L.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = g(rng);
    return y;
}

// Points of the state box accepted by the tightened feasibility check.
std::vector<Vector> feasible_states(std::size_t count, std::uint64_t seed) {
    const Example& ex = example();
    QpSolver solver;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u1(-2.0, 2.0), u2(-3.0, 3.0);
    std::vector<Vector> out;
    while (out.size() < count) {
        Vector x(2);
        x << u1(rng), u2(rng);
        if (in_feasible_region(x, ex.sys, ex.design, ex.profile, solver)) out.push_back(x);
    }
    return out;
}

}  // namespace

TEST(HorizonCost, ZeroDecision) {
    const Example& ex = example();
    HorizonDecision d;
    d.z.assign(8, Vector::Zero(2));
    d.v.assign(8, Vector::Zero(1));
    EXPECT_EQ(horizon_cost(ex.sys, ex.design, d), 0.0);
}

TEST(HorizonCost, ScalarOneStep) {
    const LtiSystem sys(Matrix::Constant(1, 1, 0.9), Matrix::Constant(1, 1, 0.5),
                        Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1), Vector::Constant(1, 1.0));
    const ControllerDesign design = make_design(sys, Matrix::Constant(1, 1, 2.0),
                                                Matrix::Constant(1, 1, 3.0), 1,
                                                Matrix::Constant(1, 1, -0.4));
    const double z0 = 0.7, v0 = -0.3;
    HorizonDecision d;
    d.z = {Vector::Constant(1, z0)};
    d.v = {Vector::Constant(1, v0)};
    const double K = -0.4, AK = 0.9 + 0.5 * K, P = design.P()(0, 0);
    const double expected = 2.0 * z0 * z0 + 3.0 * (K * z0 + v0) * (K * z0 + v0) +
                            P * (AK * z0 + 0.5 * v0) * (AK * z0 + 0.5 * v0);
    EXPECT_NEAR(horizon_cost(sys, design, d), expected, 1e-12);
}

TEST(HorizonCost, HessianMatchesLoopSum) {
    const Example& ex = example();
    const HorizonLayout L{8, 2, 1, 0};
    const Matrix H = build_cost(ex.sys, ex.design);
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        const Vector y = random_decision(rng, L);
        const HorizonDecision d = unpack_decision(y, L);
        double J = 0.0;
        for (int l = 0; l < 8; ++l) {
            const Vector u = ex.design.K() * d.z[l] + d.v[l];
            J += oracle::quad(d.z[l], ex.design.Q()) + oracle::quad(u, ex.design.R());
        }
        const Vector xN = ex.design.A_K() * d.z[7] + ex.sys.B() * d.v[7];
        J += oracle::quad(xN, ex.design.P());
        EXPECT_NEAR(horizon_cost(ex.sys, ex.design, d), J, 1e-10 * (1.0 + J));
        EXPECT_NEAR(0.5 * y.dot(H * y), J, 1e-10 * (1.0 + J));
    }
}

TEST(TightenedProblem, OriginWithoutTightening) {
    const Example& ex = example();
    TighteningProfile zero = ex.profile;
    zero.q.setZero();
    const QpSolution s = solve_qp(build_tightened_problem(Vector::Zero(2), ex.sys, ex.design, zero));
    ASSERT_EQ(s.status, QpStatus::Optimal);
    EXPECT_LE(s.y.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(std::abs(s.objective), 1e-12);
}

TEST(TightenedProblem, FarStateIsInfeasible) {
    const Example& ex = example();
    Vector x(2);
    x << 20.0, 30.0;
    const QpSolution s = solve_qp(build_tightened_problem(x, ex.sys, ex.design, ex.profile));
    EXPECT_EQ(s.status, QpStatus::PrimalInfeasible);
    QpSolver solver;
    EXPECT_FALSE(in_feasible_region(x, ex.sys, ex.design, ex.profile, solver));
    EXPECT_TRUE(in_feasible_region(Vector::Zero(2), ex.sys, ex.design, ex.profile, solver));
}

TEST(TightenedProblem, OptimaSatisfyTheConstraints) {
    const Example& ex = example();
    const HorizonLayout L{8, 2, 1, 0};
    QpSolver solver;
    for (const Vector& x : feasible_states(30, 5)) {
        const QpSolution s = solver.solve(build_tightened_problem(x, ex.sys, ex.design, ex.profile));
        ASSERT_EQ(s.status, QpStatus::Optimal);
        const HorizonDecision d = unpack_decision(s.y, L);
        EXPECT_LE((d.z[0] - x).cwiseAbs().maxCoeff(), 1e-6);
        for (int l = 0; l + 1 < 8; ++l)
            EXPECT_LE((d.z[l + 1] - ex.design.A_K() * d.z[l] - ex.sys.B() * d.v[l]).cwiseAbs().maxCoeff(),
                      1e-6);
        EXPECT_LE((ex.design.A_K() * d.z[7] + ex.sys.B() * d.v[7] - d.z[7]).cwiseAbs().maxCoeff(), 1e-6);
        for (int l = 0; l < 8; ++l) {
            const Vector excess = ex.design.C_K() * d.z[l] + ex.sys.D() * d.v[l] - ex.sys.h() +
                                  ex.profile.q.row(l).transpose();
            EXPECT_LE(excess.maxCoeff(), 1e-6);
        }
    }
}

TEST(PenaltyController, OriginGivesZeroInput) {
    const Example& ex = example();
    const PenaltyController c(ex.sys, ex.design, ex.profile, 100.0, oracle::paper_input_set());
    QpSolver solver;
    const PenaltySolution s = solve_penalty(Vector::Zero(2), c, solver);
    EXPECT_LE(s.decision.eta.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(std::abs(s.u(0)), 1e-9);
    EXPECT_LE(std::abs(kappa(Vector::Zero(2), c)(0)), 1e-9);
}

TEST(PenaltyController, LargePenaltyIsExact) {
    const Example& ex = example();
    const PenaltyController c(ex.sys, ex.design, ex.profile, 1e9, oracle::paper_input_set());
    const HorizonLayout L{8, 2, 1, 0};
    QpSolver solver;
    for (const Vector& x : feasible_states(20, 9)) {
        const QpSolution hard = solver.solve(build_tightened_problem(x, ex.sys, ex.design, ex.profile));
        ASSERT_EQ(hard.status, QpStatus::Optimal);
        const PenaltySolution soft = solve_penalty(x, c, solver);
        EXPECT_LE(soft.decision.eta.cwiseAbs().maxCoeff(), 1e-6);
        EXPECT_LE((soft.qp.y.head(L.size()) - hard.y).cwiseAbs().maxCoeff(), 1e-4);
    }
}

TEST(PenaltyController, OutsideRegionUsesSlackButKeepsInputBound) {
    const Example& ex = example();
    const PenaltyController c(ex.sys, ex.design, ex.profile, 100.0, oracle::paper_input_set());
    QpSolver solver;
    Vector x(2);
    x << 1.99, -2.99;
    ASSERT_FALSE(in_feasible_region(x, ex.sys, ex.design, ex.profile, solver));
    const PenaltySolution s = solve_penalty(x, c, solver);
    EXPECT_GT(s.decision.eta.maxCoeff(), 1e-6);
    EXPECT_GE(s.decision.eta.minCoeff(), -1e-9);
    EXPECT_LE(std::abs(s.u(0)), 0.2 + 1e-6);
}

TEST(PenaltyController, SlackShrinksAsRhoGrows) {
    const Example& ex = example();
    QpSolver solver;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u1(-2.0, 2.0), u2(-3.0, 3.0);
    for (int t = 0; t < 20; ++t) {
        Vector x(2);
        x << u1(rng), u2(rng);
        double prev = std::numeric_limits<double>::infinity();
        for (double rho : {1.0, 10.0, 100.0, 1e3, 1e4, 1e6}) {
            const PenaltyController c(ex.sys, ex.design, ex.profile, rho, oracle::paper_input_set());
            const double total = solve_penalty(x, c, solver).decision.eta.sum();
            EXPECT_LE(total, prev + 1e-6) << "rho " << rho;
            prev = total;
        }
    }
}

TEST(PenaltyController, InputBoundOverRandomStates) {
    const Example& ex = example();
    QpSolver solver;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u1(-2.0, 2.0), u2(-3.0, 3.0);
    for (double rho : {10.0, 1e4}) {
        const PenaltyController c(ex.sys, ex.design, ex.profile, rho, oracle::paper_input_set());
        for (int t = 0; t < 300; ++t) {
            Vector x(2);
            x << u1(rng), u2(rng);
            EXPECT_LE(std::abs(kappa(x, c, solver)(0)), 0.2 + 1e-6);
        }
    }
}

TEST(PenaltyController, PerStepSlackLayout) {
    const Example& ex = example();
    const PenaltyController c(ex.sys, ex.design, ex.profile, 50.0, oracle::paper_input_set(),
                              SlackMode::PerStep);
    EXPECT_EQ(c.layout().n_eta, 8 * 6);
    Vector x(2);
    x << 1.9, 2.5;
    QpSolver solver;
    const PenaltySolution s = solve_penalty(x, c, solver);
    EXPECT_EQ(s.decision.eta.size(), 48);
    EXPECT_LE(std::abs(s.u(0)), 0.2 + 1e-6);
}

TEST(PenaltyController, RejectsBadSettings) {
    const Example& ex = example();
    EXPECT_THROW(PenaltyController(ex.sys, ex.design, ex.profile, 0.0, oracle::paper_input_set()),
                 ConfigError);
    EXPECT_THROW(solve_penalty(Vector::Zero(3),
                               PenaltyController(ex.sys, ex.design, ex.profile, 1.0,
                                                 oracle::paper_input_set()),
                               *std::make_unique<QpSolver>()),
                 DimensionError);
}
