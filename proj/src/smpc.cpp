#include "smpcval/smpc.hpp"

#include <sstream>
#include <string>

#include "smpcval/error.hpp"

namespace smpcval {
namespace {

HorizonLayout layout_for(const LtiSystem& sys, int N, Eigen::Index n_eta) {
    return {N, sys.nx(), sys.nu(), n_eta};
}

// Rows: z_0 = x, z_{l+1} = A_K z_l + B v_l (l <= N-2), A_K z_{N-1} + B v_{N-1} = z_{N-1}.
Matrix dynamics_equalities(const LtiSystem& sys, const ControllerDesign& design,
                           const HorizonLayout& L) {
    const Eigen::Index nx = L.nx;
    Matrix G = Matrix::Zero((L.N + 1) * nx, L.size());
    G.block(0, L.z(0), nx, nx).setIdentity();
    for (Eigen::Index l = 0; l + 1 < L.N; ++l) {
        const Eigen::Index row = (l + 1) * nx;
        G.block(row, L.z(l + 1), nx, nx).setIdentity();
        G.block(row, L.z(l), nx, nx) = -design.A_K();
        G.block(row, L.v(l), nx, L.nu) = -sys.B();
    }
    const Eigen::Index row = L.N * nx;
    G.block(row, L.z(L.N - 1), nx, nx) =
        design.A_K() - Matrix::Identity(nx, nx);
    G.block(row, L.v(L.N - 1), nx, L.nu) = sys.B();
    return G;
}

Vector dynamics_rhs(const Vector& x, const HorizonLayout& L) {
    Vector b = Vector::Zero((L.N + 1) * L.nx);
    b.head(L.nx) = x;
    return b;
}

Matrix embedded_cost(const LtiSystem& sys, const ControllerDesign& design, const HorizonLayout& L) {
    Matrix H = Matrix::Zero(L.size(), L.size());
    H.topLeftCorner(L.eta(), L.eta()) = build_cost(sys, design);
    return H;
}

void check_state(const Vector& x, const LtiSystem& sys) {
    if (x.size() != sys.nx())
        throw DimensionError("state has " + std::to_string(x.size()) + " entries, expected " +
                             std::to_string(sys.nx()));
}

}  // namespace

const char* to_string(SlackMode mode) {
    return mode == SlackMode::Shared ? "shared" : "per_step";
}

HorizonDecision unpack_decision(const Vector& y, const HorizonLayout& L) {
    if (y.size() != L.size()) throw DimensionError("decision vector does not match the layout");
    HorizonDecision d;
    for (Eigen::Index l = 0; l < L.N; ++l) {
        d.z.push_back(y.segment(L.z(l), L.nx));
        d.v.push_back(y.segment(L.v(l), L.nu));
    }
    d.eta = y.tail(L.n_eta);
    return d;
}

Matrix build_cost(const LtiSystem& sys, const ControllerDesign& design) {
    const auto L = layout_for(sys, design.horizon(), 0);
    const Matrix& Q = design.Q();
    const Matrix& R = design.R();
    const Matrix& K = design.K();
    const Matrix& P = design.P();
    const Matrix& AK = design.A_K();
    const Matrix& B = sys.B();
    Matrix H = Matrix::Zero(L.size(), L.size());
    for (Eigen::Index l = 0; l < L.N; ++l) {
        // ||z||_Q^2 + ||K z + v||_R^2
        H.block(L.z(l), L.z(l), L.nx, L.nx) += 2.0 * (Q + K.transpose() * R * K);
        H.block(L.z(l), L.v(l), L.nx, L.nu) += 2.0 * K.transpose() * R;
        H.block(L.v(l), L.z(l), L.nu, L.nx) += 2.0 * R * K;
        H.block(L.v(l), L.v(l), L.nu, L.nu) += 2.0 * R;
    }
    const Eigen::Index t = L.N - 1;
    H.block(L.z(t), L.z(t), L.nx, L.nx) += 2.0 * AK.transpose() * P * AK;
    H.block(L.z(t), L.v(t), L.nx, L.nu) += 2.0 * AK.transpose() * P * B;
    H.block(L.v(t), L.z(t), L.nu, L.nx) += 2.0 * B.transpose() * P * AK;
    H.block(L.v(t), L.v(t), L.nu, L.nu) += 2.0 * B.transpose() * P * B;
    return 0.5 * (H + H.transpose());
}

double horizon_cost(const LtiSystem& sys, const ControllerDesign& design,
                    const HorizonDecision& d) {
    double J = 0.0;
    for (std::size_t l = 0; l < d.z.size(); ++l) {
        const Vector u = design.K() * d.z[l] + d.v[l];
        J += stage_cost(d.z[l], u, design.Q(), design.R());
    }
    const Vector xN = design.A_K() * d.z.back() + sys.B() * d.v.back();
    return J + xN.dot(design.P() * xN);
}

QpProblem build_tightened_problem(const Vector& x, const LtiSystem& sys,
                                  const ControllerDesign& design,
                                  const TighteningProfile& profile) {
    check_state(x, sys);
    const auto L = layout_for(sys, design.horizon(), 0);
    if (profile.horizon() != L.N || profile.q.cols() != sys.nh())
        throw DimensionError("tightening profile shape does not match the design");
    Matrix G_in = Matrix::Zero(L.N * sys.nh(), L.size());
    Vector b_in(L.N * sys.nh());
    for (Eigen::Index l = 0; l < L.N; ++l) {
        const Eigen::Index row = l * sys.nh();
        G_in.block(row, L.z(l), sys.nh(), L.nx) = design.C_K();
        G_in.block(row, L.v(l), sys.nh(), L.nu) = sys.D();
        b_in.segment(row, sys.nh()) = sys.h() - profile.q.row(l).transpose();
    }
    return QpProblem(build_cost(sys, design), Vector::Zero(L.size()),
                     dynamics_equalities(sys, design, L), dynamics_rhs(x, L), std::move(G_in),
                     std::move(b_in));
}

bool in_feasible_region(const Vector& x, const LtiSystem& sys, const ControllerDesign& design,
                        const TighteningProfile& profile, QpSolver& solver) {
    return check_feasibility(build_tightened_problem(x, sys, design, profile), solver).feasible;
}

PenaltyController::PenaltyController(LtiSystem sys, ControllerDesign design,
                                     TighteningProfile profile, double rho, InputSet input_set,
                                     SlackMode mode)
    : sys_(std::move(sys)),
      design_(std::move(design)),
      profile_(std::move(profile)),
      input_set_(std::move(input_set)),
      rho_(rho),
      mode_(mode) {
    if (!(rho_ > 0.0)) throw ConfigError("penalty factor rho must be positive");
    if (profile_.horizon() != design_.horizon() || profile_.q.cols() != sys_.nh())
        throw DimensionError("tightening profile shape does not match the design");
    if (input_set_.A.cols() != sys_.nu() || input_set_.A.rows() != input_set_.b.size())
        throw DimensionError("input set shape does not match n_u");
    if (!is_controllable(sys_.A(), sys_.B()))
        throw ConfigError("(A, B) is not controllable; the penalty problem may be infeasible");
    if (design_.horizon() < sys_.nx())
        throw ConfigError("prediction horizon N must be >= n_x");

    const Eigen::Index nh = sys_.nh();
    const Eigen::Index N = design_.horizon();
    const Eigen::Index n_eta = mode_ == SlackMode::Shared ? nh : N * nh;
    layout_ = layout_for(sys_, static_cast<int>(N), n_eta);
    const HorizonLayout& L = layout_;

    H_ = embedded_cost(sys_, design_, L);
    f_ = Vector::Zero(L.size());
    f_.tail(n_eta).setConstant(rho_);
    G_eq_ = dynamics_equalities(sys_, design_, L);

    const Eigen::Index n_u_rows = input_set_.A.rows();
    G_in_ = Matrix::Zero(N * nh + n_eta + n_u_rows, L.size());
    b_in_ = Vector::Zero(G_in_.rows());
    for (Eigen::Index l = 0; l < N; ++l) {
        const Eigen::Index row = l * nh;
        const Eigen::Index eta_col = L.eta() + (mode_ == SlackMode::Shared ? 0 : l * nh);
        G_in_.block(row, L.z(l), nh, L.nx) = design_.C_K();
        G_in_.block(row, L.v(l), nh, L.nu) = sys_.D();
        G_in_.block(row, eta_col, nh, nh) = -Matrix::Identity(nh, nh);
        b_in_.segment(row, nh) = sys_.h() - profile_.q.row(l).transpose();
    }
    G_in_.block(N * nh, L.eta(), n_eta, n_eta) = -Matrix::Identity(n_eta, n_eta);
    input_rows_begin_ = N * nh + n_eta;
    G_in_.block(input_rows_begin_, L.v(0), n_u_rows, L.nu) = input_set_.A;
}

PenaltyController PenaltyController::with_rho(double rho) const {
    return PenaltyController(sys_, design_, profile_, rho, input_set_, mode_);
}

QpProblem PenaltyController::problem_at(const Vector& x) const {
    check_state(x, sys_);
    Vector b_in = b_in_;
    // A_U (v_0 + K x) <= b_U
    b_in.tail(input_set_.A.rows()) = input_set_.b - input_set_.A * (design_.K() * x);
    return QpProblem(H_, f_, G_eq_, dynamics_rhs(x, layout_), G_in_, std::move(b_in));
}

QpProblem build_penalty_problem(const Vector& x, const PenaltyController& controller) {
    return controller.problem_at(x);
}

PenaltySolution solve_penalty(const Vector& x, const PenaltyController& controller,
                              QpSolver& solver, const WarmStart* warm) {
    const QpProblem problem = controller.problem_at(x);
    PenaltySolution out;
    out.qp = solver.solve(problem, warm);
    if (out.qp.status != QpStatus::Optimal) {
        std::ostringstream os;
        os << "penalty problem not solved at x = [" << x.transpose() << "], rho = "
           << controller.rho() << ": status " << to_string(out.qp.status) << " after "
           << out.qp.iterations << " iterations (primal residual " << out.qp.primal_residual
           << ", dual residual " << out.qp.dual_residual << ")";
        throw NumericalError(os.str());
    }
    out.decision = unpack_decision(out.qp.y, controller.layout());
    out.u = out.decision.v.front() + controller.design().K() * x;
    return out;
}

Vector kappa(const Vector& x, const PenaltyController& controller, QpSolver& solver) {
    return solve_penalty(x, controller, solver).u;
}

Vector kappa(const Vector& x, const PenaltyController& controller) {
    QpSolver solver;
    return kappa(x, controller, solver);
}

}  // namespace smpcval
