#pragma once

#include <vector>

#include "smpcval/qpcore.hpp"
#include "smpcval/sysmodel.hpp"
#include "smpcval/tightening.hpp"

namespace smpcval {

/// Shared: one slack vector eta (n_h) bounds the excess of every step.
/// PerStep: one eta_l per step, penalized by the sum of all components.
enum class SlackMode { Shared, PerStep };

const char* to_string(SlackMode mode);

/// Hard constraint {u : A u <= b} on the first applied input.
struct InputSet {
    Matrix A;
    Vector b;
};

/// Index map of the stacked decision vector [z_0..z_{N-1}, v_0..v_{N-1}, eta].
struct HorizonLayout {
    Eigen::Index N = 0, nx = 0, nu = 0, n_eta = 0;

    Eigen::Index z(Eigen::Index l) const noexcept { return l * nx; }
    Eigen::Index v(Eigen::Index l) const noexcept { return N * nx + l * nu; }
    Eigen::Index eta() const noexcept { return N * (nx + nu); }
    Eigen::Index size() const noexcept { return N * (nx + nu) + n_eta; }
};

struct HorizonDecision {
    std::vector<Vector> z;
    std::vector<Vector> v;
    Vector eta;  ///< empty for the tightened problem
};

HorizonDecision unpack_decision(const Vector& y, const HorizonLayout& layout);

/// Hessian over [z; v] such that 1/2 y'Hy equals the finite-horizon cost, the
/// terminal state being A_K z_{N-1} + B v_{N-1}.
Matrix build_cost(const LtiSystem& sys, const ControllerDesign& design);

/// Direct evaluation of the horizon cost (stage costs plus terminal weight).
double horizon_cost(const LtiSystem& sys, const ControllerDesign& design,
                    const HorizonDecision& decision);

/// Tightened problem: initial condition, nominal dynamics, terminal equilibrium
/// and C_K z_l + D v_l <= h - q_l.
QpProblem build_tightened_problem(const Vector& x, const LtiSystem& sys,
                                  const ControllerDesign& design,
                                  const TighteningProfile& profile);

/// x lies in the feasible region of the tightened problem.
bool in_feasible_region(const Vector& x, const LtiSystem& sys, const ControllerDesign& design,
                        const TighteningProfile& profile, QpSolver& solver);

/// Soft-constrained predictive controller with penalty factor rho.
class PenaltyController {
public:
    /// Requires rho > 0, a profile matching the horizon, (A, B) controllable and
    /// N >= n_x so the penalty problem is always feasible.
    PenaltyController(LtiSystem sys, ControllerDesign design, TighteningProfile profile,
                      double rho, InputSet input_set, SlackMode mode = SlackMode::Shared);

    PenaltyController with_rho(double rho) const;

    const LtiSystem& system() const noexcept { return sys_; }
    const ControllerDesign& design() const noexcept { return design_; }
    const TighteningProfile& profile() const noexcept { return profile_; }
    const InputSet& input_set() const noexcept { return input_set_; }
    double rho() const noexcept { return rho_; }
    SlackMode slack_mode() const noexcept { return mode_; }
    const HorizonLayout& layout() const noexcept { return layout_; }

    /// Slack-form penalty problem at state x.
    QpProblem problem_at(const Vector& x) const;

private:
    LtiSystem sys_;
    ControllerDesign design_;
    TighteningProfile profile_;
    InputSet input_set_;
    double rho_;
    SlackMode mode_;
    HorizonLayout layout_;
    Matrix H_;
    Vector f_;
    Matrix G_eq_;
    Matrix G_in_;
    Vector b_in_;
    Eigen::Index input_rows_begin_ = 0;
};

QpProblem build_penalty_problem(const Vector& x, const PenaltyController& controller);

struct PenaltySolution {
    HorizonDecision decision;
    Vector u;  ///< v*_0 + K x
    QpSolution qp;
};

/// Solves the penalty problem; throws NumericalError (with solver diagnostics)
/// unless the solver reports an optimum.
PenaltySolution solve_penalty(const Vector& x, const PenaltyController& controller,
                              QpSolver& solver, const WarmStart* warm = nullptr);

/// Control law u = v*_0 + K x.
Vector kappa(const Vector& x, const PenaltyController& controller);
Vector kappa(const Vector& x, const PenaltyController& controller, QpSolver& solver);

}  // namespace smpcval
