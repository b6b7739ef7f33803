#pragma once

#include <iosfwd>
#include <list>
#include <optional>

#include <Eigen/Cholesky>

#include "smpcval/types.hpp"

namespace smpcval {

/// min 1/2 y'Hy + f'y  s.t.  G_eq y = b_eq,  G_in y <= b_in,  with H PSD.
/// H is symmetrized on construction; all entries must be finite.
class QpProblem {
public:
    QpProblem(Matrix H, Vector f, Matrix G_eq, Vector b_eq, Matrix G_in, Vector b_in);

    const Matrix& H() const noexcept { return H_; }
    const Vector& f() const noexcept { return f_; }
    const Matrix& G_eq() const noexcept { return G_eq_; }
    const Vector& b_eq() const noexcept { return b_eq_; }
    const Matrix& G_in() const noexcept { return G_in_; }
    const Vector& b_in() const noexcept { return b_in_; }

    Eigen::Index num_variables() const noexcept { return H_.rows(); }
    Eigen::Index num_equalities() const noexcept { return G_eq_.rows(); }
    Eigen::Index num_inequalities() const noexcept { return G_in_.rows(); }

    double objective(const Vector& y) const { return 0.5 * y.dot(H_ * y) + f_.dot(y); }

private:
    Matrix H_;
    Vector f_;
    Matrix G_eq_;
    Vector b_eq_;
    Matrix G_in_;
    Vector b_in_;
};

/// Acceptance thresholds of an optimal point. All absolute.
struct KktTolerances {
    double primal = 1e-6;           ///< equality residual and inequality excess
    double stationarity = 1e-5;     ///< ||Hy + f + G_eq'lambda + G_in'mu||_inf
    double multiplier = 1e-8;       ///< mu >= -multiplier
    double complementarity = 1e-6;  ///< |mu_i (G_in y - b_in)_i|
};

struct QpSettings {
    double rho = 0.1;       ///< initial ADMM penalty
    double sigma = 1e-6;    ///< proximal regularization of the x-update
    double alpha = 1.6;     ///< over-relaxation
    double eps_abs = 1e-6;  ///< ADMM stopping tolerances (before polishing)
    double eps_rel = 1e-6;
    double eps_infeasible = 1e-5;
    double equality_rho_scale = 1e3;
    int scaling_iterations = 10;  ///< Ruiz equilibration passes (0 disables)
    int max_iterations = 200000;
    int check_interval = 25;  ///< residual check, penalty update and polish cadence
    bool polish = true;
    KktTolerances kkt;
};

enum class QpStatus { Optimal, PrimalInfeasible, MaxIterations };

const char* to_string(QpStatus status);

struct QpSolution {
    QpStatus status = QpStatus::MaxIterations;
    Vector y;          ///< primal point
    Vector lambda_eq;  ///< equality multipliers
    Vector mu_in;      ///< inequality multipliers (>= 0)
    double objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double complementarity = 0.0;
    int iterations = 0;
    bool polished = false;
    /// Farkas direction [lambda; mu] when status == PrimalInfeasible.
    Vector certificate;
    /// ADMM penalty at exit, reused by warm starts.
    double rho = 0.0;
};

struct WarmStart {
    Vector y;
    Vector dual;  ///< [lambda_eq; mu_in]
    double rho = 0.0;

    static WarmStart from(const QpSolution& s);
};

/// Reusable ADMM workspace. Caches KKT factorizations keyed on (H, G, rho), so
/// a sequence of problems sharing matrices only pays for the vectors. The cache
/// never changes results: a solve depends only on (problem, warm start, settings).
class QpSolver {
public:
    explicit QpSolver(QpSettings settings = {});

    QpSolution solve(const QpProblem& problem, const WarmStart* warm = nullptr);

    const QpSettings& settings() const noexcept { return settings_; }

private:
    struct Factorization {
        double rho;
        double cost_scale;
        Matrix inverse;     // (c Hs + sigma I + As' diag(rho) As)^-1
        Matrix inverse_at;  // inverse * As'
    };

    const Factorization& factor(double rho, double cost_scale);
    void bind(const QpProblem& problem);

    QpSettings settings_;
    // Bound matrices in original and equilibrated form: Hs = D H D, As = E A D.
    Matrix H_;
    Matrix A_;  // [G_eq; G_in]
    Matrix Hs_;
    Matrix As_;
    Vector D_;
    Vector E_;
    Eigen::Index m_eq_ = 0;
    std::list<Factorization> cache_;
};

/// One-shot convenience around QpSolver.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {},
                    const WarmStart* warm = nullptr);

struct FeasibilityResult {
    bool feasible = false;
    /// Iteration cap hit; the verdict "infeasible" is then conservative.
    bool inconclusive = false;
    Vector point;
};

/// Searches for a point of the constraint set (minimum-norm problem).
FeasibilityResult check_feasibility(const QpProblem& problem, const QpSettings& settings = {});
FeasibilityResult check_feasibility(const QpProblem& problem, QpSolver& solver);

struct KktReport {
    double equality = 0.0;
    double inequality_excess = 0.0;
    double stationarity = 0.0;
    double min_multiplier = 0.0;
    double complementarity = 0.0;

    bool satisfies(const KktTolerances& tol) const;
};

KktReport kkt_report(const QpProblem& problem, const Vector& y, const Vector& lambda_eq,
                     const Vector& mu_in);

/// Plain-text dump, one block per matrix: "<name> <rows> <cols>" followed by
/// row-major values.
void write_qp_dump(const QpProblem& problem, std::ostream& out);

}  // namespace smpcval
