#include "smpcval/sysmodel.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "smpcval/error.hpp"

namespace smpcval {
namespace {

constexpr int kRiccatiMaxIterations = 100000;
constexpr double kRiccatiStepTolerance = 1e-12;

std::string shape(const Matrix& M) {
    std::ostringstream os;
    os << M.rows() << "x" << M.cols();
    return os.str();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw DimensionError(what);
}

void require_finite(const Matrix& M, const char* name) {
    if (!M.allFinite()) throw DimensionError(std::string(name) + " has non-finite entries");
}

}  // namespace

LtiSystem::LtiSystem(Matrix A, Matrix B, Matrix C, Matrix D, Vector h)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)), h_(std::move(h)) {
    require(A_.rows() >= 1 && A_.rows() == A_.cols(), "A must be square and non-empty, got " + shape(A_));
    require(B_.rows() == A_.rows() && B_.cols() >= 1,
            "B (" + shape(B_) + ") does not match A (" + shape(A_) + ")");
    require(h_.size() >= 1, "h must have at least one row");
    require(C_.rows() == h_.size() && C_.cols() == A_.cols(),
            "C (" + shape(C_) + ") does not match A (" + shape(A_) + ") and h (" +
                std::to_string(h_.size()) + " rows)");
    require(D_.rows() == h_.size() && D_.cols() == B_.cols(),
            "D (" + shape(D_) + ") does not match B (" + shape(B_) + ") and h (" +
                std::to_string(h_.size()) + " rows)");
    require_finite(A_, "A");
    require_finite(B_, "B");
    require_finite(C_, "C");
    require_finite(D_, "D");
    require_finite(h_, "h");
    if ((h_.array() <= 0.0).any())
        throw DimensionError("h must be strictly positive so the origin is interior");
}

LtiSystem LtiSystem::with_boxes(Matrix A, Matrix B, const Vector& state_bound,
                                const Vector& input_bound) {
    const Eigen::Index nx = A.rows();
    const Eigen::Index nu = B.cols();
    require(state_bound.size() == 0 || state_bound.size() == nx,
            "state box has " + std::to_string(state_bound.size()) + " entries, expected " +
                std::to_string(nx));
    require(input_bound.size() == 0 || input_bound.size() == nu,
            "input box has " + std::to_string(input_bound.size()) + " entries, expected " +
                std::to_string(nu));
    const Eigen::Index nh = 2 * (state_bound.size() + input_bound.size());
    Matrix C = Matrix::Zero(nh, nx);
    Matrix D = Matrix::Zero(nh, nu);
    Vector h(nh);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < state_bound.size(); ++i) {
        C(row, i) = 1.0;
        h(row++) = state_bound(i);
        C(row, i) = -1.0;
        h(row++) = state_bound(i);
    }
    for (Eigen::Index i = 0; i < input_bound.size(); ++i) {
        D(row, i) = 1.0;
        h(row++) = input_bound(i);
        D(row, i) = -1.0;
        h(row++) = input_bound(i);
    }
    return LtiSystem(std::move(A), std::move(B), std::move(C), std::move(D), std::move(h));
}

ControllerDesign::ControllerDesign(const LtiSystem& sys, Matrix Q, Matrix R, Matrix K, int horizon)
    : Q_(std::move(Q)), R_(std::move(R)), K_(std::move(K)), horizon_(horizon) {
    require(Q_.rows() == sys.nx() && Q_.cols() == sys.nx(),
            "Q (" + shape(Q_) + ") does not match A (" + shape(sys.A()) + ")");
    require(R_.rows() == sys.nu() && R_.cols() == sys.nu(),
            "R (" + shape(R_) + ") does not match B (" + shape(sys.B()) + ")");
    if (horizon_ < 1) throw DimensionError("prediction horizon must be >= 1");
    Q_ = 0.5 * (Q_ + Q_.transpose()).eval();
    R_ = 0.5 * (R_ + R_.transpose()).eval();
    A_K_ = closed_loop_matrix(sys, K_);
    C_K_ = sys.C() + sys.D() * K_;
    if (spectral_radius(A_K_) >= 1.0)
        throw NumericalError("gain K is not stabilizing: spectral radius of A+BK is " +
                             std::to_string(spectral_radius(A_K_)));
    P_ = solve_riccati_for_P(A_K_, Q_, R_, K_);
}

ControllerDesign make_design(const LtiSystem& sys, const Matrix& Q, const Matrix& R, int horizon,
                             const std::optional<Matrix>& K) {
    if (K) return ControllerDesign(sys, Q, R, *K, horizon);
    return ControllerDesign(sys, Q, R, solve_dlqr(sys.A(), sys.B(), Q, R).K, horizon);
}

Matrix closed_loop_matrix(const Matrix& A, const Matrix& B, const Matrix& K) {
    require(B.rows() == A.rows(), "A (" + shape(A) + ") and B (" + shape(B) + ") disagree");
    require(K.rows() == B.cols() && K.cols() == A.cols(),
            "B (" + shape(B) + ") and K (" + shape(K) + ") disagree");
    return A + B * K;
}

Matrix closed_loop_matrix(const LtiSystem& sys, const Matrix& K) {
    return closed_loop_matrix(sys.A(), sys.B(), K);
}

double riccati_residual(const Matrix& A_K, const Matrix& Q, const Matrix& R, const Matrix& K,
                        const Matrix& P) {
    return (Q + K.transpose() * R * K + A_K.transpose() * P * A_K - P).norm();
}

Matrix solve_riccati_for_P(const Matrix& A_K, const Matrix& Q, const Matrix& R, const Matrix& K) {
    require(A_K.rows() == A_K.cols(), "A_K must be square, got " + shape(A_K));
    require(Q.rows() == A_K.rows() && Q.cols() == A_K.cols(),
            "Q (" + shape(Q) + ") and A_K (" + shape(A_K) + ") disagree");
    require(K.cols() == A_K.cols() && R.rows() == K.rows() && R.cols() == K.rows(),
            "R (" + shape(R) + ") and K (" + shape(K) + ") disagree");
    const Matrix stage = Q + K.transpose() * R * K;
    Matrix P = Matrix::Zero(A_K.rows(), A_K.cols());
    for (int it = 0; it < kRiccatiMaxIterations; ++it) {
        Matrix next = stage + A_K.transpose() * P * A_K;
        next = 0.5 * (next + next.transpose()).eval();
        if (!next.allFinite()) break;
        const double step = (next - P).norm();
        P = std::move(next);
        if (step < kRiccatiStepTolerance) return P;
    }
    throw NumericalError("Riccati fixed-point iteration did not converge; A_K is likely unstable");
}

LqrSolution solve_dlqr(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
    require(A.rows() == A.cols(), "A must be square, got " + shape(A));
    require(B.rows() == A.rows(), "A (" + shape(A) + ") and B (" + shape(B) + ") disagree");
    require(Q.rows() == A.rows() && Q.cols() == A.cols(),
            "Q (" + shape(Q) + ") and A (" + shape(A) + ") disagree");
    require(R.rows() == B.cols() && R.cols() == B.cols(),
            "R (" + shape(R) + ") and B (" + shape(B) + ") disagree");
    const Matrix Qs = 0.5 * (Q + Q.transpose());
    const Matrix Rs = 0.5 * (R + R.transpose());
    Matrix P = Qs;
    for (int it = 1; it <= kRiccatiMaxIterations; ++it) {
        const Matrix BtP = B.transpose() * P;
        const Matrix gain = (Rs + BtP * B).ldlt().solve(BtP * A);
        Matrix next = Qs + A.transpose() * P * A - A.transpose() * P * B * gain;
        next = 0.5 * (next + next.transpose()).eval();
        if (!next.allFinite()) break;
        const double step = (next - P).norm();
        P = std::move(next);
        if (step < kRiccatiStepTolerance * std::max(1.0, P.norm())) {
            const Matrix BtPf = B.transpose() * P;
            Matrix K = -(Rs + BtPf * B).ldlt().solve(BtPf * A);
            return {std::move(K), std::move(P), it};
        }
    }
    throw NumericalError("DLQR Riccati recursion did not converge; (A, B) may not be stabilizable");
}

double stage_cost(const Vector& x, const Vector& u, const Matrix& Q, const Matrix& R) {
    require(Q.rows() == x.size() && Q.cols() == x.size(),
            "Q (" + shape(Q) + ") and x (" + std::to_string(x.size()) + ") disagree");
    require(R.rows() == u.size() && R.cols() == u.size(),
            "R (" + shape(R) + ") and u (" + std::to_string(u.size()) + ") disagree");
    return x.dot(Q * x) + u.dot(R * u);
}

double spectral_radius(const Matrix& M) {
    require(M.rows() == M.cols(), "spectral radius needs a square matrix, got " + shape(M));
    return M.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_controllable(const Matrix& A, const Matrix& B) {
    const Eigen::Index n = A.rows();
    Matrix ctrb(n, n * B.cols());
    Matrix block = B;
    for (Eigen::Index i = 0; i < n; ++i) {
        ctrb.middleCols(i * B.cols(), B.cols()) = block;
        block = A * block;
    }
    Eigen::FullPivLU<Matrix> lu(ctrb);
    lu.setThreshold(1e-10);
    return lu.rank() == n;
}

}  // namespace smpcval
