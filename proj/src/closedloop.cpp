#include "smpcval/closedloop.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smpcval/error.hpp"
#include "smpcval/parallel.hpp"

namespace smpcval {

double violation_measure(const Vector& alpha) { return alpha.cwiseMax(0.0).sum(); }

const char* to_string(GSum variant) {
    return variant == GSum::Inclusive ? "inclusive" : "exclusive";
}

const char* to_string(SelectionPolicy policy) {
    return policy == SelectionPolicy::MinGamma ? "min_gamma" : "smallest_rho_below";
}

SimulationResult simulate(const Scenario& scenario, const PenaltyController& controller,
                          QpSolver& solver, const SimulationOptions& options,
                          std::size_t scenario_index) {
    const LtiSystem& sys = controller.system();
    const ControllerDesign& design = controller.design();
    const Matrix& w = scenario.disturbances.entries;
    if (scenario.x0.size() != sys.nx() || (w.cols() > 0 && w.rows() != sys.nx()))
        throw DimensionError("simulate: scenario dimensions do not match the system");
    const Eigen::Index M = w.cols();
    const Eigen::Index summed = options.g_sum == GSum::Inclusive ? M + 1 : M;

    SimulationResult result;
    ClosedLoopTrace& trace = result.trace;
    trace.scenario_index = scenario_index;
    trace.rho = controller.rho();
    trace.sample_time = options.sample_time;
    trace.g_sum = options.g_sum;
    trace.states = Matrix::Zero(sys.nx(), M + 1);
    trace.inputs = Matrix::Zero(sys.nu(), M);
    trace.stage_costs = Vector::Zero(summed);
    trace.violations = Vector::Zero(summed);
    trace.states.col(0) = scenario.x0;

    WarmStart warm;
    bool have_warm = false;
    for (Eigen::Index k = 0; k < summed; ++k) {
        const Vector x = trace.states.col(k);
        Vector u;
        try {
            PenaltySolution sol = solve_penalty(x, controller, solver, have_warm ? &warm : nullptr);
            warm = WarmStart::from(sol.qp);
            have_warm = true;
            u = std::move(sol.u);
        } catch (const Error& e) {
            result.failure = ScenarioFailure{scenario_index, controller.rho(), k, e.what()};
            return result;
        }
        trace.stage_costs(k) = stage_cost(x, u, design.Q(), design.R());
        trace.violations(k) = violation_measure(sys.C() * x + sys.D() * u - sys.h());
        if (k < M) {
            trace.inputs.col(k) = u;
            trace.states.col(k + 1) = sys.A() * x + sys.B() * u + w.col(k);
        } else {
            trace.final_input = u;
        }
    }
    return result;
}

double performance_index(const ClosedLoopTrace& trace) { return trace.violations.sum(); }

std::vector<double> rho_grid(double rho_min, double rho_max, std::size_t n_C) {
    if (!(rho_min > 0.0) || !(rho_max > rho_min) || !std::isfinite(rho_max))
        throw ConfigError("rho grid: need 0 < rho_min < rho_max");
    if (n_C < 2) throw ConfigError("rho grid: need at least 2 points");
    std::vector<double> grid(n_C);
    const double span = std::log(rho_max / rho_min);
    for (std::size_t l = 0; l < n_C; ++l)
        grid[l] = rho_min * std::exp(static_cast<double>(l) / static_cast<double>(n_C - 1) * span);
    grid.front() = rho_min;
    grid.back() = rho_max;
    return grid;
}

std::vector<double> SweepResult::grid() const {
    std::vector<double> out;
    out.reserve(stats.size());
    for (const auto& s : stats) out.push_back(s.rho);
    return out;
}

namespace {

std::optional<std::size_t> grid_index(const std::vector<double>& grid, double rho) {
    for (std::size_t j = 0; j < grid.size(); ++j)
        if (std::abs(grid[j] - rho) <= 1e-9 * std::abs(grid[j])) return j;
    return std::nullopt;
}

}  // namespace

SweepResult sweep(const PenaltyController& controller, const ScenarioBatch& batch,
                  const SweepSetup& setup) {
    const std::vector<double>& grid = setup.grid;
    const std::size_t n_C = grid.size();
    if (n_C == 0) throw ConfigError("sweep: empty rho grid");
    for (std::size_t j = 0; j < n_C; ++j) {
        if (!(grid[j] > 0.0) || !std::isfinite(grid[j]))
            throw ConfigError("sweep: rho values must be positive and finite");
        if (j > 0 && !(grid[j] > grid[j - 1]))
            throw ConfigError("sweep: rho grid must be strictly increasing");
    }

    ProbabilisticLevels levels = setup.levels;
    levels.multiplicity = static_cast<std::int64_t>(n_C);
    levels.validate();
    const std::size_t S = batch.size();
    const std::int64_t required = sample_complexity(levels);
    if (static_cast<std::int64_t>(S) < required) {
        std::ostringstream os;
        os << "sweep: " << S << " scenarios given, but eps = " << levels.epsilon
           << ", delta = " << levels.delta << ", r = " << levels.r << " over " << n_C
           << " rho values require at least " << required;
        throw ConfigError(os.str());
    }

    std::vector<bool> keep(n_C, false);
    for (double rho : setup.trace_rhos) {
        const auto j = grid_index(grid, rho);
        if (!j) {
            std::ostringstream os;
            os << "sweep: trace rho " << rho << " is not a grid value";
            throw ConfigError(os.str());
        }
        keep[*j] = true;
    }

    std::vector<PenaltyController> controllers;
    controllers.reserve(n_C);
    for (double rho : grid) controllers.push_back(controller.with_rho(rho));

    const Eigen::Index nx = controller.system().nx();
    SweepResult result;
    result.levels = levels;
    result.sample_count = S;
    result.batch_seed = batch.batch_seed;
    result.batch_hash = batch.hash();
    result.slack_mode = controller.slack_mode();
    result.g_sum = setup.simulation.g_sum;
    result.g = Matrix::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(n_C));
    result.terminal.assign(n_C, Matrix::Zero(nx, static_cast<Eigen::Index>(S)));

    std::vector<std::vector<ClosedLoopTrace>> kept(n_C);
    for (std::size_t j = 0; j < n_C; ++j)
        if (keep[j]) kept[j].resize(S);
    std::vector<std::optional<ScenarioFailure>> failures(S * n_C);

    parallel_for(S * n_C, setup.threads, [&](std::size_t item) {
        const std::size_t i = item / n_C;
        const std::size_t j = item % n_C;
        QpSolver solver;
        SimulationResult run = simulate(batch.scenarios[i], controllers[j], solver,
                                        setup.simulation, i);
        if (!run.ok()) {
            failures[item] = std::move(run.failure);
            return;
        }
        const auto row = static_cast<Eigen::Index>(i);
        result.g(row, static_cast<Eigen::Index>(j)) = performance_index(run.trace);
        result.terminal[j].col(row) = run.trace.states.col(run.trace.states.cols() - 1);
        if (keep[j]) kept[j][i] = std::move(run.trace);
    });

    std::size_t failed = 0;
    std::ostringstream diag;
    for (const auto& f : failures) {
        if (!f) continue;
        if (failed < 5)
            diag << "\n  scenario " << f->scenario_index << ", rho " << f->rho << ", step "
                 << f->step << ": " << f->message;
        ++failed;
    }
    if (failed > 0) {
        std::ostringstream os;
        os << "sweep: " << failed << " of " << S * n_C
           << " closed-loop runs failed; order statistics admit no censoring" << diag.str();
        throw NumericalError(os.str());
    }

    for (std::size_t j = 0; j < n_C; ++j) {
        const Vector col = result.g.col(static_cast<Eigen::Index>(j));
        RhoStatistics s;
        s.rho = grid[j];
        s.gamma = generalized_max(std::span<const double>(col.data(), S), levels.r);
        s.g_avg = col.mean();
        s.g_max = col.maxCoeff();
        s.xi = static_cast<double>((col.array() > setup.violation_threshold).count()) /
               static_cast<double>(S);
        result.stats.push_back(s);
        for (auto& t : kept[j]) result.traces.push_back(std::move(t));
    }
    return result;
}

SelectedRho select_rho(const SweepResult& result, const SelectionRule& rule) {
    if (result.stats.empty()) throw ConfigError("select_rho: empty sweep result");
    std::size_t best = 0;
    for (std::size_t j = 1; j < result.stats.size(); ++j)
        if (result.stats[j].gamma < result.stats[best].gamma) best = j;

    if (rule.policy == SelectionPolicy::SmallestRhoBelow) {
        for (std::size_t j = 0; j < result.stats.size(); ++j) {
            if (result.stats[j].gamma <= rule.threshold)
                return {j, result.stats[j].rho, result.stats[j].gamma};
        }
        std::ostringstream os;
        os << "select_rho: no grid value reaches gamma <= " << rule.threshold
           << "; the smallest gamma is " << result.stats[best].gamma << " at rho = "
           << result.stats[best].rho;
        throw ConfigError(os.str());
    }
    return {best, result.stats[best].rho, result.stats[best].gamma};
}

Matrix terminal_hull(const Matrix& points) {
    if (points.rows() != 2) {
        std::ostringstream os;
        os << "terminal_hull: points have dimension " << points.rows()
           << ", only planar states are supported";
        throw DimensionError(os.str());
    }
    std::vector<std::pair<double, double>> pts;
    pts.reserve(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index c = 0; c < points.cols(); ++c) pts.emplace_back(points(0, c), points(1, c));
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() <= 1) {
        Matrix out(2, static_cast<Eigen::Index>(pts.size()));
        if (!pts.empty()) out << pts[0].first, pts[0].second;
        return out;
    }

    auto cross = [](const auto& o, const auto& a, const auto& b) {
        return (a.first - o.first) * (b.second - o.second) -
               (a.second - o.second) * (b.first - o.first);
    };
    std::vector<std::pair<double, double>> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    const std::size_t lower_size = k + 1;
    for (std::size_t i = pts.size() - 1; i-- > 0;) {
        while (k >= lower_size && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);

    Matrix out(2, static_cast<Eigen::Index>(hull.size()));
    for (std::size_t i = 0; i < hull.size(); ++i) {
        out(0, static_cast<Eigen::Index>(i)) = hull[i].first;
        out(1, static_cast<Eigen::Index>(i)) = hull[i].second;
    }
    return out;
}

double polygon_area(const Matrix& vertices) {
    if (vertices.rows() != 2) throw DimensionError("polygon_area: vertices must be 2 x V");
    const Eigen::Index V = vertices.cols();
    double twice = 0.0;
    for (Eigen::Index i = 0; i < V; ++i) {
        const Eigen::Index j = (i + 1) % V;
        twice += vertices(0, i) * vertices(1, j) - vertices(0, j) * vertices(1, i);
    }
    return 0.5 * std::abs(twice);
}

}  // namespace smpcval
