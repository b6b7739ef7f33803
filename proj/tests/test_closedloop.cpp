#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "smpcval/closedloop.hpp"
#include "smpcval/error.hpp"

using namespace smpcval;

namespace {

struct Example {
    LtiSystem sys = oracle::paper_system();
    ControllerDesign design = oracle::paper_design(sys);
    TighteningProfile profile =
        compute_tightening(sys, design, oracle::paper_disturbance(1), {0.05, 1e-6, 60, 1});
    PenaltyController controller{sys, design, profile, 100.0, oracle::paper_input_set()};
};

const Example& example() {
    static const Example ex;
    return ex;
}

Scenario zero_scenario(const Vector& x0, Eigen::Index M) {
    return {x0, DisturbanceSequence{Matrix::Zero(x0.size(), M)}};
}

SweepResult stats_only(const std::vector<double>& rho, const std::vector<double>& gamma) {
    SweepResult r;
    for (std::size_t i = 0; i < rho.size(); ++i) r.stats.push_back({rho[i], gamma[i], 0.0, gamma[i], 0.0});
    return r;
}

}  // namespace

TEST(ViolationMeasure, Examples) {
    Vector a(3);
    a << 1.0, -2.0, 3.0;
    EXPECT_EQ(violation_measure(a), 4.0);
    EXPECT_EQ(violation_measure(-a.cwiseAbs()), 0.0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int t = 0; t < 100; ++t) {
        Vector v(7);
        double ref = 0.0;
        for (Eigen::Index i = 0; i < 7; ++i) {
            v(i) = g(rng);
            if (v(i) > 0.0) ref += v(i);
        }
        EXPECT_DOUBLE_EQ(violation_measure(v), ref);
    }
}

TEST(Simulate, OriginStaysPut) {
    const Example& ex = example();
    QpSolver solver;
    const SimulationResult r = simulate(zero_scenario(Vector::Zero(2), 20), ex.controller, solver);
    ASSERT_TRUE(r.ok());
    EXPECT_LE(r.trace.states.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(r.trace.inputs.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(performance_index(r.trace), 0.0);
}

TEST(Simulate, UndisturbedLoopContracts) {
    const Example& ex = example();
    QpSolver solver;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u1(-2.0, 2.0), u2(-3.0, 3.0);
    int checked = 0;
    while (checked < 100) {
        Vector x0(2);
        x0 << u1(rng), u2(rng);
        if (!in_feasible_region(x0, ex.sys, ex.design, ex.profile, solver)) continue;
        const SimulationResult r = simulate(zero_scenario(x0, 20), ex.controller, solver);
        ASSERT_TRUE(r.ok());
        EXPECT_LT(r.trace.states.col(20).norm(), x0.norm());
        ++checked;
    }
}

TEST(Simulate, TraceMatchesDirectRecursion) {
    const Example& ex = example();
    QpSolver solver;
    Scenario s{Vector(2), draw_disturbance_sequence(oracle::paper_disturbance(5), 20, 3)};
    s.x0 << 1.5, -2.0;
    SimulationOptions opts;
    opts.sample_time = 0.02;
    const SimulationResult r = simulate(s, ex.controller, solver, opts, 7);
    ASSERT_TRUE(r.ok());
    const ClosedLoopTrace& t = r.trace;
    EXPECT_EQ(t.scenario_index, 7u);
    EXPECT_EQ(t.sample_time, 0.02);
    EXPECT_EQ(t.rho, 100.0);
    ASSERT_EQ(t.states.cols(), 21);
    ASSERT_EQ(t.inputs.cols(), 20);
    ASSERT_EQ(t.violations.size(), 21);
    double g = 0.0;
    for (Eigen::Index k = 0; k <= 20; ++k) {
        const Vector x = t.states.col(k);
        const Vector u = k < 20 ? Vector(t.inputs.col(k)) : t.final_input;
        if (k < 20)
            EXPECT_LE((t.states.col(k + 1) - (ex.sys.A() * x + ex.sys.B() * u + s.disturbances[k]))
                          .cwiseAbs()
                          .maxCoeff(),
                      1e-12);
        QpSolver fresh;
        EXPECT_NEAR(kappa(x, ex.controller, fresh)(0), u(0), 1e-6);
        // Double loop over rows of C x + D u - h.
        double v = 0.0;
        for (Eigen::Index j = 0; j < ex.sys.nh(); ++j) {
            double row = -ex.sys.h()(j);
            for (Eigen::Index i = 0; i < 2; ++i) row += ex.sys.C()(j, i) * x(i);
            row += ex.sys.D()(j, 0) * u(0);
            v += std::max(row, 0.0);
        }
        EXPECT_NEAR(t.violations(k), v, 1e-12);
        g += v;
    }
    EXPECT_NEAR(performance_index(t), g, 1e-12);
}

TEST(Simulate, ExclusiveSumStopsBeforeM) {
    const Example& ex = example();
    QpSolver solver;
    Vector x0(2);
    x0 << 1.9, 2.9;
    SimulationOptions opts;
    opts.g_sum = GSum::Exclusive;
    const SimulationResult r = simulate(zero_scenario(x0, 20), ex.controller, solver, opts);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.trace.violations.size(), 20);
    EXPECT_EQ(r.trace.final_input.size(), 0);
}

TEST(PerformanceIndex, HandMadeTraces) {
    ClosedLoopTrace t;
    t.violations = Vector::Zero(5);
    EXPECT_EQ(performance_index(t), 0.0);
    t.violations(2) = 0.3;
    EXPECT_DOUBLE_EQ(performance_index(t), 0.3);
}

TEST(RhoGrid, EndpointsAndRatios) {
    const std::vector<double> g = rho_grid(1.0, 1e6, 100);
    ASSERT_EQ(g.size(), 100u);
    EXPECT_EQ(g.front(), 1.0);
    EXPECT_EQ(g.back(), 1e6);
    const double ratio = g[1] / g[0];
    for (std::size_t i = 1; i + 1 < g.size(); ++i) EXPECT_NEAR(g[i + 1] / g[i], ratio, 1e-12);
    EXPECT_NEAR(rho_grid(1.0, 1e6, 3)[1], 1e3, 1e-9);
    EXPECT_THROW(rho_grid(1.0, 2.0, 1), ConfigError);
    EXPECT_THROW(rho_grid(0.0, 1.0, 3), ConfigError);
    EXPECT_THROW(rho_grid(2.0, 1.0, 3), ConfigError);
    EXPECT_THROW(rho_grid(1.0, 2.0, 0), ConfigError);
}

TEST(Sweep, UndisturbedInteriorStartsNeverViolate) {
    const Example& ex = example();
    DisturbanceModel none = oracle::paper_disturbance(3);
    none.covariance.setZero();
    const Box box{Vector::Constant(2, -0.2), Vector::Constant(2, 0.2)};
    SweepSetup setup;
    setup.grid = rho_grid(1.0, 1e6, 4);
    setup.levels = {0.2, 1e-3, 1, 1};
    setup.trace_rhos = {setup.grid[1]};
    const std::size_t S = static_cast<std::size_t>(sample_complexity({0.2, 1e-3, 1, 4}));
    const ScenarioBatch batch =
        generate_scenario_batch([](const Vector&) { return true; }, box, none, S, 20, 3, 1);
    const SweepResult r = sweep(ex.controller, batch, setup);
    ASSERT_EQ(r.stats.size(), 4u);
    for (const RhoStatistics& s : r.stats) {
        EXPECT_EQ(s.gamma, 0.0);
        EXPECT_EQ(s.g_avg, 0.0);
        EXPECT_EQ(s.xi, 0.0);
    }
    EXPECT_EQ(r.levels.multiplicity, 4);
    EXPECT_EQ(r.traces.size(), S);
    EXPECT_EQ(r.g.rows(), static_cast<Eigen::Index>(S));
    EXPECT_EQ(r.terminal.size(), 4u);
}

TEST(Sweep, StatisticsFollowFromTheGMatrix) {
    const Example& ex = example();
    const Box box{Vector::Constant(2, -2.0), Vector::Constant(2, 2.0)};
    auto in_region = [&](const Vector& x) {
        QpSolver s;
        return in_feasible_region(x, ex.sys, ex.design, ex.profile, s);
    };
    SweepSetup setup;
    setup.grid = {1.0, 30.0, 1e4};
    setup.levels = {0.3, 1e-2, 2, 1};
    setup.threads = 2;
    const std::size_t S = static_cast<std::size_t>(sample_complexity({0.3, 1e-2, 2, 3}));
    const ScenarioBatch batch =
        generate_scenario_batch(in_region, box, oracle::paper_disturbance(8), S, 20, 11, 2);
    const SweepResult r = sweep(ex.controller, batch, setup);
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> col(S);
        double sum = 0.0, mx = 0.0;
        int violating = 0;
        for (std::size_t i = 0; i < S; ++i) {
            col[i] = r.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
            sum += col[i];
            mx = std::max(mx, col[i]);
            if (col[i] > 1e-9) ++violating;
        }
        EXPECT_EQ(r.stats[c].gamma, oracle::rth_largest(col, 2));
        EXPECT_NEAR(r.stats[c].g_avg, sum / static_cast<double>(S), 1e-12);
        EXPECT_EQ(r.stats[c].g_max, mx);
        EXPECT_DOUBLE_EQ(r.stats[c].xi, violating / static_cast<double>(S));
        EXPECT_LE(r.stats[c].gamma, r.stats[c].g_max);
    }
    // One scenario re-simulated on its own reproduces its g entry.
    QpSolver solver;
    const SimulationResult single = simulate(batch.scenarios[4], ex.controller.with_rho(30.0), solver);
    EXPECT_NEAR(performance_index(single.trace), r.g(4, 1), 1e-9);
}

TEST(Sweep, RejectsUndersizedBatchesAndForeignTraceRhos) {
    const Example& ex = example();
    const Box box{Vector::Constant(2, -0.1), Vector::Constant(2, 0.1)};
    const ScenarioBatch batch = generate_scenario_batch([](const Vector&) { return true; }, box,
                                                        oracle::paper_disturbance(1), 5, 5, 1, 1);
    SweepSetup setup;
    setup.grid = {1.0, 10.0};
    setup.levels = {0.05, 1e-6, 1, 1};
    EXPECT_THROW(sweep(ex.controller, batch, setup), ConfigError);
    setup.levels = {0.9, 0.5, 1, 1};
    setup.trace_rhos = {3.0};
    EXPECT_THROW(sweep(ex.controller, batch, setup), ConfigError);
}

TEST(SelectRho, MinGammaTieBreak) {
    const SweepResult flat = stats_only({1, 10, 100}, {0.5, 0.5, 0.5});
    EXPECT_EQ(select_rho(flat, {SelectionPolicy::MinGamma, 0}).index, 0u);
    const SweepResult mid = stats_only({1, 10, 100}, {3, 1, 2});
    const SelectedRho s = select_rho(mid, {SelectionPolicy::MinGamma, 0});
    EXPECT_EQ(s.index, 1u);
    EXPECT_EQ(s.rho, 10.0);
    EXPECT_EQ(s.gamma, 1.0);
}

TEST(SelectRho, Threshold) {
    const SweepResult r = stats_only({1, 10, 100, 1000}, {5, 0.06, 0.01, 0.02});
    EXPECT_EQ(select_rho(r, {SelectionPolicy::SmallestRhoBelow, 0.06}).rho, 10.0);
    EXPECT_EQ(select_rho(r, {SelectionPolicy::SmallestRhoBelow, 0.05}).rho, 100.0);
    EXPECT_EQ(select_rho(r, {SelectionPolicy::SmallestRhoBelow, 1e9}).rho, 1.0);
    EXPECT_THROW(select_rho(r, {SelectionPolicy::SmallestRhoBelow, 0.001}), ConfigError);
}

TEST(TerminalHull, Triangle) {
    Matrix p(2, 3);
    p << 0, 1, 0, 0, 0, 1;
    const Matrix h = terminal_hull(p);
    ASSERT_EQ(h.cols(), 3);
    EXPECT_NEAR(polygon_area(h), 0.5, 1e-15);
}

TEST(TerminalHull, IdenticalPoints) {
    const Matrix p = Matrix::Constant(2, 5, 0.3);
    const Matrix h = terminal_hull(p);
    EXPECT_EQ(h.cols(), 1);
    EXPECT_EQ(polygon_area(h), 0.0);
}

TEST(TerminalHull, DropsInteriorAndCollinearPoints) {
    Matrix p(2, 6);
    p << 0, 2, 2, 0, 1, 1, 0, 0, 2, 2, 1, 0;  // square, centre, edge midpoint
    const Matrix h = terminal_hull(p);
    EXPECT_EQ(h.cols(), 4);
    EXPECT_NEAR(polygon_area(h), 4.0, 1e-15);
    EXPECT_THROW(terminal_hull(Matrix::Zero(3, 4)), DimensionError);
}

TEST(TerminalHull, AreaGrowsUnderInsertion) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    Matrix pts(2, 0);
    double prev = 0.0;
    for (int k = 0; k < 200; ++k) {
        pts.conservativeResize(2, pts.cols() + 1);
        pts.col(pts.cols() - 1) << g(rng), g(rng);
        const Matrix h = terminal_hull(pts);
        const double area = polygon_area(h);
        EXPECT_GE(area, prev - 1e-12);
        prev = area;
        // Every point lies inside or on the counter-clockwise hull.
        for (Eigen::Index i = 0; i < pts.cols() && h.cols() >= 3; ++i)
            for (Eigen::Index v = 0; v < h.cols(); ++v) {
                const Vector a = h.col(v), b = h.col((v + 1) % h.cols());
                const double cross = (b(0) - a(0)) * (pts(1, i) - a(1)) - (b(1) - a(1)) * (pts(0, i) - a(0));
                EXPECT_GE(cross, -1e-12);
            }
    }
}
