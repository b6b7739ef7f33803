#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smpcval/probval.hpp"
#include "smpcval/smpc.hpp"
#include "smpcval/uncertainty.hpp"

namespace smpcval {

/// Sum of the positive parts of alpha.
double violation_measure(const Vector& alpha);

/// Inclusive sums k = 0..M and evaluates u_M = kappa(x_M) without applying it;
/// Exclusive stops at k = M - 1.
enum class GSum { Inclusive, Exclusive };

const char* to_string(GSum variant);

struct SimulationOptions {
    GSum g_sum = GSum::Inclusive;
    double sample_time = 0.0;  ///< metadata only
};

struct ClosedLoopTrace {
    std::size_t scenario_index = 0;
    double rho = 0.0;
    double sample_time = 0.0;
    GSum g_sum = GSum::Inclusive;
    Matrix states;       ///< n_x x (M+1): x_0 ... x_M
    Matrix inputs;       ///< n_u x M: applied inputs u_0 ... u_{M-1}
    Vector final_input;  ///< kappa(x_M); empty for the exclusive variant
    Vector stage_costs;  ///< L(x_k, u_k) for every summed step
    Vector violations;   ///< [[C x_k + D u_k - h]] for every summed step

    Eigen::Index steps() const noexcept { return inputs.cols(); }
};

struct ScenarioFailure {
    std::size_t scenario_index = 0;
    double rho = 0.0;
    Eigen::Index step = 0;
    std::string message;
};

struct SimulationResult {
    ClosedLoopTrace trace;  ///< filled up to the failing step on failure
    std::optional<ScenarioFailure> failure;

    bool ok() const noexcept { return !failure.has_value(); }
};

/// x_{k+1} = A x_k + B kappa(x_k) + w_k over the scenario's disturbance
/// sequence. Solver errors stop the run and are returned as a failure record.
/// The solver is warm-started from step to step.
SimulationResult simulate(const Scenario& scenario, const PenaltyController& controller,
                          QpSolver& solver, const SimulationOptions& options = {},
                          std::size_t scenario_index = 0);

/// g = sum of the per-step violation measures stored in the trace.
double performance_index(const ClosedLoopTrace& trace);

/// n_C log-equidistant points from rho_min to rho_max, endpoints exact.
std::vector<double> rho_grid(double rho_min, double rho_max, std::size_t n_C);

struct SweepSetup {
    std::vector<double> grid;
    ProbabilisticLevels levels;  ///< multiplicity is forced to grid.size()
    SimulationOptions simulation;
    std::vector<double> trace_rhos;  ///< grid values whose full traces are kept
    unsigned threads = 0;
    double violation_threshold = 1e-9;  ///< g above this counts toward xi
};

struct RhoStatistics {
    double rho = 0.0;
    double gamma = 0.0;
    double g_avg = 0.0;
    double g_max = 0.0;
    double xi = 0.0;
};

struct SweepResult {
    std::vector<RhoStatistics> stats;
    ProbabilisticLevels levels;
    std::size_t sample_count = 0;
    std::uint64_t batch_seed = 0;
    std::string batch_hash;
    SlackMode slack_mode = SlackMode::Shared;
    GSum g_sum = GSum::Inclusive;
    Matrix g;                         ///< S x n_C
    std::vector<Matrix> terminal;     ///< per rho: n_x x S matrix of x_M
    std::vector<ClosedLoopTrace> traces;  ///< ordered by (rho, scenario)

    std::vector<double> grid() const;
};

/// Runs every scenario of the batch at every grid value. The same batch serves
/// all rho values; any scenario failure aborts with NumericalError. Throws
/// ConfigError when the batch is smaller than the sample complexity for
/// (levels, multiplicity = grid size) or a trace rho is not on the grid.
SweepResult sweep(const PenaltyController& controller, const ScenarioBatch& batch,
                  const SweepSetup& setup);

enum class SelectionPolicy { MinGamma, SmallestRhoBelow };

const char* to_string(SelectionPolicy policy);

struct SelectionRule {
    SelectionPolicy policy = SelectionPolicy::MinGamma;
    double threshold = 0.0;  ///< SmallestRhoBelow: gamma <= threshold
};

struct SelectedRho {
    std::size_t index = 0;
    double rho = 0.0;
    double gamma = 0.0;
};

/// Ties go to the smaller rho. Throws ConfigError when no grid point meets the
/// threshold, quoting the smallest gamma reached.
SelectedRho select_rho(const SweepResult& result, const SelectionRule& rule);

/// Convex hull of the columns of a 2 x S matrix, counter-clockwise, without
/// collinear vertices. Throws DimensionError for other row counts.
Matrix terminal_hull(const Matrix& points);

/// Shoelace area of a polygon given as 2 x V vertices.
double polygon_area(const Matrix& vertices);

}  // namespace smpcval
