#pragma once

#include <optional>

#include "smpcval/types.hpp"

namespace smpcval {

/// Linear time-invariant plant x+ = A x + B u + w with the polytopic
/// constraint C x + D u <= h. Immutable once constructed.
class LtiSystem {
public:
    /// Validates shapes and requires h > 0 componentwise (origin strictly inside).
    LtiSystem(Matrix A, Matrix B, Matrix C, Matrix D, Vector h);

    /// Box shorthand: |x_i| <= state_bound_i and |u_i| <= input_bound_i, expanded
    /// to rows (+x1, -x1, +x2, -x2, ..., +u1, -u1, ...).
    static LtiSystem with_boxes(Matrix A, Matrix B, const Vector& state_bound,
                                const Vector& input_bound);

    const Matrix& A() const noexcept { return A_; }
    const Matrix& B() const noexcept { return B_; }
    const Matrix& C() const noexcept { return C_; }
    const Matrix& D() const noexcept { return D_; }
    const Vector& h() const noexcept { return h_; }

    Eigen::Index nx() const noexcept { return A_.rows(); }
    Eigen::Index nu() const noexcept { return B_.cols(); }
    Eigen::Index nh() const noexcept { return C_.rows(); }

private:
    Matrix A_, B_, C_, D_;
    Vector h_;
};

/// Weights, ancillary gain and terminal weight of the predictive controller.
///
/// Gain convention: u = K x (the feedback enters with a PLUS sign). Most LQR
/// references return u = -K x; solve_dlqr already flips the sign.
class ControllerDesign {
public:
    ControllerDesign(const LtiSystem& sys, Matrix Q, Matrix R, Matrix K, int horizon);

    const Matrix& Q() const noexcept { return Q_; }
    const Matrix& R() const noexcept { return R_; }
    const Matrix& K() const noexcept { return K_; }
    const Matrix& P() const noexcept { return P_; }       ///< terminal weight
    const Matrix& A_K() const noexcept { return A_K_; }   ///< A + B K
    const Matrix& C_K() const noexcept { return C_K_; }   ///< C + D K
    int horizon() const noexcept { return horizon_; }

private:
    Matrix Q_, R_, K_, P_, A_K_, C_K_;
    int horizon_;
};

/// Builds a design from weights; K defaults to the discrete LQR gain.
ControllerDesign make_design(const LtiSystem& sys, const Matrix& Q, const Matrix& R,
                             int horizon, const std::optional<Matrix>& K = std::nullopt);

/// A + B K. Throws DimensionError naming the offending pair.
Matrix closed_loop_matrix(const LtiSystem& sys, const Matrix& K);
Matrix closed_loop_matrix(const Matrix& A, const Matrix& B, const Matrix& K);

/// Fixed point of P = Q + K'RK + A_K' P A_K, iterated from P = 0.
/// Throws NumericalError if the iteration does not settle (unstable A_K).
Matrix solve_riccati_for_P(const Matrix& A_K, const Matrix& Q, const Matrix& R,
                           const Matrix& K);

struct LqrSolution {
    Matrix K;  ///< u = K x
    Matrix P;  ///< stabilizing solution of the DARE
    int iterations = 0;
};

/// Discrete LQR by Riccati recursion to a fixed point.
LqrSolution solve_dlqr(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

/// x'Qx + u'Ru.
double stage_cost(const Vector& x, const Vector& u, const Matrix& Q, const Matrix& R);

double spectral_radius(const Matrix& M);

/// Frobenius norm of Q + K'RK + A_K' P A_K - P.
double riccati_residual(const Matrix& A_K, const Matrix& Q, const Matrix& R, const Matrix& K,
                        const Matrix& P);

/// Rank test on [B, AB, ..., A^{n-1}B].
bool is_controllable(const Matrix& A, const Matrix& B);

}  // namespace smpcval
