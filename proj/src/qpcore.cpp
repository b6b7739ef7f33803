#include "smpcval/qpcore.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>

#include <Eigen/LU>
#include <Eigen/QR>

#include "smpcval/error.hpp"

namespace smpcval {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kPolishDelta = 1e-9;
constexpr int kPolishRefinements = 8;
constexpr int kPolishRounds = 6;
constexpr std::size_t kFactorCacheSize = 6;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

void check_block(bool ok, const std::string& what) {
    if (!ok) throw DimensionError("QP: " + what);
}

struct Candidate {
    Vector y;
    Vector lambda;
    Vector mu;
    KktReport report;
};

// Lawson-Hanson: min ||M x - b|| subject to x >= 0.
Vector nnls(const Matrix& M, const Vector& b) {
    const Eigen::Index n = M.cols();
    Vector x = Vector::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-12 * (1.0 + M.lpNorm<Eigen::Infinity>() * (1.0 + inf_norm(b)));
    auto solve_passive = [&]() {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        Matrix Mp(M.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) Mp.col(static_cast<Eigen::Index>(a)) = M.col(idx[a]);
        const Vector sp = Mp.completeOrthogonalDecomposition().solve(b);
        Vector s = Vector::Zero(n);
        for (std::size_t a = 0; a < idx.size(); ++a) s(idx[a]) = sp(static_cast<Eigen::Index>(a));
        return s;
    };
    for (Eigen::Index outer = 0; outer < 3 * n + 10; ++outer) {
        const Vector w = M.transpose() * (b - M * x);
        Eigen::Index best = -1;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w(j) > tol && (best < 0 || w(j) > w(best))) best = j;
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;
        for (Eigen::Index inner = 0; inner <= n; ++inner) {
            const Vector s = solve_passive();
            double alpha = 1.0;
            bool clipped = false;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
                    alpha = std::min(alpha, x(j) / (x(j) - s(j)));
                    clipped = true;
                }
            }
            if (!clipped) {
                x = s;
                break;
            }
            x += alpha * (s - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x(j) <= 1e-15) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x(j) = 0.0;
                }
            }
        }
    }
    return x;
}

}  // namespace

QpProblem::QpProblem(Matrix H, Vector f, Matrix G_eq, Vector b_eq, Matrix G_in, Vector b_in)
    : H_(std::move(H)),
      f_(std::move(f)),
      G_eq_(std::move(G_eq)),
      b_eq_(std::move(b_eq)),
      G_in_(std::move(G_in)),
      b_in_(std::move(b_in)) {
    const Eigen::Index n = H_.rows();
    check_block(H_.cols() == n, "H must be square");
    check_block(f_.size() == n, "f has " + std::to_string(f_.size()) + " entries, H is " +
                                    std::to_string(n) + "x" + std::to_string(n));
    if (G_eq_.size() == 0) G_eq_.resize(b_eq_.size(), n);
    if (G_in_.size() == 0) G_in_.resize(b_in_.size(), n);
    check_block(G_eq_.cols() == n && G_eq_.rows() == b_eq_.size(), "G_eq/b_eq shape mismatch");
    check_block(G_in_.cols() == n && G_in_.rows() == b_in_.size(), "G_in/b_in shape mismatch");
    check_block(H_.allFinite() && f_.allFinite() && G_eq_.allFinite() && b_eq_.allFinite() &&
                    G_in_.allFinite() && b_in_.allFinite(),
                "non-finite problem data");
    H_ = 0.5 * (H_ + H_.transpose()).eval();
}

const char* to_string(QpStatus status) {
    switch (status) {
        case QpStatus::Optimal:
            return "optimal";
        case QpStatus::PrimalInfeasible:
            return "primal-infeasible";
        case QpStatus::MaxIterations:
            return "max-iterations";
    }
    return "unknown";
}

WarmStart WarmStart::from(const QpSolution& s) {
    WarmStart w;
    w.y = s.y;
    w.dual.resize(s.lambda_eq.size() + s.mu_in.size());
    w.dual << s.lambda_eq, s.mu_in;
    w.rho = s.rho;
    return w;
}

bool KktReport::satisfies(const KktTolerances& tol) const {
    return equality <= tol.primal && inequality_excess <= tol.primal &&
           stationarity <= tol.stationarity && min_multiplier >= -tol.multiplier &&
           complementarity <= tol.complementarity;
}

KktReport kkt_report(const QpProblem& p, const Vector& y, const Vector& lambda_eq,
                     const Vector& mu_in) {
    KktReport r;
    const Vector eq = p.G_eq() * y - p.b_eq();
    const Vector in = p.G_in() * y - p.b_in();
    r.equality = inf_norm(eq);
    r.inequality_excess = in.size() ? std::max(0.0, in.maxCoeff()) : 0.0;
    Vector grad = p.H() * y + p.f();
    if (lambda_eq.size()) grad += p.G_eq().transpose() * lambda_eq;
    if (mu_in.size()) grad += p.G_in().transpose() * mu_in;
    r.stationarity = inf_norm(grad);
    r.min_multiplier = mu_in.size() ? std::min(0.0, mu_in.minCoeff()) : 0.0;
    r.complementarity = in.size() ? inf_norm(mu_in.cwiseProduct(in)) : 0.0;
    return r;
}

QpSolver::QpSolver(QpSettings settings) : settings_(settings) {}

void QpSolver::bind(const QpProblem& p) {
    const Eigen::Index n = p.num_variables();
    const Eigen::Index m = p.num_equalities() + p.num_inequalities();
    const bool same = H_.rows() == n && A_.rows() == m && A_.cols() == n &&
                      m_eq_ == p.num_equalities() && H_ == p.H() &&
                      A_.topRows(m_eq_) == p.G_eq() && A_.bottomRows(m - m_eq_) == p.G_in();
    if (same) return;
    H_ = p.H();
    A_.resize(m, n);
    A_ << p.G_eq(), p.G_in();
    m_eq_ = p.num_equalities();
    cache_.clear();

    // Ruiz equilibration of [H A'; A 0].
    D_ = Vector::Ones(n);
    E_ = Vector::Ones(m);
    Hs_ = H_;
    As_ = A_;
    auto inverse_root = [](double norm) {
        if (norm < 1e-4) return 1.0;
        return 1.0 / std::sqrt(std::min(norm, 1e4));
    };
    for (int pass = 0; pass < settings_.scaling_iterations; ++pass) {
        Vector d(n), e(m);
        for (Eigen::Index j = 0; j < n; ++j) {
            double norm = Hs_.col(j).lpNorm<Eigen::Infinity>();
            if (m) norm = std::max(norm, As_.col(j).lpNorm<Eigen::Infinity>());
            d(j) = inverse_root(norm);
        }
        for (Eigen::Index i = 0; i < m; ++i) e(i) = inverse_root(As_.row(i).lpNorm<Eigen::Infinity>());
        Hs_ = d.asDiagonal() * Hs_ * d.asDiagonal();
        As_ = e.asDiagonal() * As_ * d.asDiagonal();
        D_.array() *= d.array();
        E_.array() *= e.array();
    }
}

const QpSolver::Factorization& QpSolver::factor(double rho, double cost_scale) {
    for (auto it = cache_.begin(); it != cache_.end(); ++it) {
        if (it->rho == rho && it->cost_scale == cost_scale) {
            cache_.splice(cache_.begin(), cache_, it);
            return cache_.front();
        }
    }
    const Eigen::Index n = H_.rows();
    Vector rho_vec = Vector::Constant(As_.rows(), rho);
    rho_vec.head(m_eq_).array() *= settings_.equality_rho_scale;
    const Matrix M = cost_scale * Hs_ + settings_.sigma * Matrix::Identity(n, n) +
                     As_.transpose() * rho_vec.asDiagonal() * As_;
    const Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success)
        throw NumericalError("QP: KKT factorization failed; H is not positive semidefinite");
    Matrix inverse = llt.solve(Matrix::Identity(n, n));
    Matrix inverse_at = inverse * As_.transpose();
    cache_.push_front({rho, cost_scale, std::move(inverse), std::move(inverse_at)});
    if (cache_.size() > kFactorCacheSize) cache_.pop_back();
    return cache_.front();
}

QpSolution QpSolver::solve(const QpProblem& p, const WarmStart* warm) {
    bind(p);
    const Eigen::Index n = p.num_variables();
    const Eigen::Index me = p.num_equalities();
    const Eigen::Index mi = p.num_inequalities();
    const Eigen::Index m = me + mi;
    const QpSettings& s = settings_;

    Vector lower(m), upper(m);
    lower << p.b_eq(), Vector::Constant(mi, -kInf);
    upper << p.b_eq(), p.b_in();
    const bool zero_objective = p.H().isZero(0.0) && p.f().isZero(0.0);

    // Scaled data: Hs_ * c, qs = c D f, As_, ls = E l, us = E u.
    const Vector fs_unit = D_.cwiseProduct(p.f());
    double cost_scale = 1.0;
    {
        double mean_col = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) mean_col += Hs_.col(j).lpNorm<Eigen::Infinity>();
        mean_col = n ? mean_col / static_cast<double>(n) : 0.0;
        const double norm = std::max(mean_col, inf_norm(fs_unit));
        if (norm > 1e-4) cost_scale = 1.0 / std::min(norm, 1e8);
    }
    const Vector qs = cost_scale * fs_unit;
    const Vector ls = E_.cwiseProduct(lower);
    const Vector us = E_.cwiseProduct(upper);

    double rho = s.rho;
    Vector xs = Vector::Zero(n);
    Vector ys = Vector::Zero(m);
    if (warm != nullptr) {
        if (warm->y.size() == n) xs = warm->y.cwiseQuotient(D_);
        if (warm->dual.size() == m) ys = cost_scale * warm->dual.cwiseQuotient(E_);
        if (warm->rho > 0.0) rho = warm->rho;
    }
    Vector zs = (As_ * xs).cwiseMax(ls).cwiseMin(us);

    auto rho_vector = [&](double r) {
        Vector v = Vector::Constant(m, r);
        v.head(me).array() *= s.equality_rho_scale;
        return v;
    };
    Vector rho_vec = rho_vector(rho);
    Vector rho_inv = rho_vec.cwiseInverse();
    const Factorization* fac = &factor(rho, cost_scale);

    QpSolution out;
    auto finish = [&](QpStatus status, const Candidate& c, int iters, bool polished) {
        out.status = status;
        out.y = c.y;
        out.lambda_eq = c.lambda;
        out.mu_in = c.mu;
        out.objective = p.objective(c.y);
        out.primal_residual = std::max(c.report.equality, c.report.inequality_excess);
        out.dual_residual = c.report.stationarity;
        out.complementarity = c.report.complementarity;
        out.iterations = iters;
        out.polished = polished;
        out.rho = rho;
        return out;
    };

    auto make_candidate = [&](Vector yv, Vector lambda, Vector mu) {
        Candidate c{std::move(yv), std::move(lambda), std::move(mu), {}};
        c.report = kkt_report(p, c.y, c.lambda, c.mu);
        return c;
    };

    // Equality-constrained KKT solve on a guessed active set, refined against
    // the unregularized system.
    auto polish_on = [&](const std::vector<Eigen::Index>& active) -> std::optional<Candidate> {
        const auto k = static_cast<Eigen::Index>(active.size());
        Matrix kkt = Matrix::Zero(n + k, n + k);
        Vector rhs(n + k);
        kkt.topLeftCorner(n, n) = p.H();
        rhs.head(n) = -p.f();
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::Index row = active[static_cast<std::size_t>(a)];
            kkt.block(n + a, 0, 1, n) = A_.row(row);
            kkt.block(0, n + a, n, 1) = A_.row(row).transpose();
            rhs(n + a) = upper(row);
        }
        Matrix reg = kkt;
        reg.topLeftCorner(n, n).diagonal().array() += kPolishDelta;
        reg.bottomRightCorner(k, k).diagonal().array() -= kPolishDelta;
        Eigen::PartialPivLU<Matrix> lu(reg);
        Vector sol = lu.solve(rhs);
        // Stationarity and primal rows live on different scales; refine until
        // neither block improves.
        const double f_scale = 1.0 + inf_norm(rhs.head(n));
        const double b_scale = 1.0 + (k > 0 ? inf_norm(rhs.tail(k)) : 0.0);
        auto residual_size = [&](const Vector& res) {
            return std::max(inf_norm(res.head(n)) / f_scale,
                            k > 0 ? inf_norm(res.tail(k)) / b_scale : 0.0);
        };
        double last = std::numeric_limits<double>::infinity();
        for (int it = 0; it < kPolishRefinements; ++it) {
            const Vector res = rhs - kkt * sol;
            if (!res.allFinite()) return std::nullopt;
            const double size = residual_size(res);
            if (size == 0.0 || size > 0.5 * last) break;
            last = size;
            sol += lu.solve(res);
        }
        if (!sol.allFinite()) return std::nullopt;
        Vector dual = Vector::Zero(m);
        for (Eigen::Index a = 0; a < k; ++a) dual(active[static_cast<std::size_t>(a)]) = sol(n + a);
        Candidate c = make_candidate(sol.head(n), dual.head(me), dual.tail(mi));
        if (c.report.satisfies(s.kkt) || k <= me || c.report.min_multiplier >= -s.kkt.multiplier)
            return c;
        // Degenerate active sets leave the multipliers non-unique; look for a
        // nonnegative choice with the primal point fixed.
        const Vector grad = p.H() * c.y + p.f();
        const Eigen::Index ka = k - me;
        Matrix Gact(n, ka);
        for (Eigen::Index a = 0; a < ka; ++a)
            Gact.col(a) = A_.row(active[static_cast<std::size_t>(me + a)]).transpose();
        Matrix basis = Matrix::Identity(n, n);
        if (me > 0) {
            Eigen::ColPivHouseholderQR<Matrix> qr(p.G_eq().transpose());
            const Eigen::Index rank = qr.rank();
            const Matrix Qfull = qr.householderQ() * Matrix::Identity(n, n);
            basis = Qfull.rightCols(n - rank);
        }
        const Vector mu_act = nnls(basis.transpose() * Gact, -(basis.transpose() * grad));
        Vector lambda = Vector::Zero(me);
        if (me > 0)
            lambda = p.G_eq().transpose().completeOrthogonalDecomposition().solve(-(grad + Gact * mu_act));
        Vector mu = Vector::Zero(mi);
        for (Eigen::Index a = 0; a < ka; ++a) mu(active[static_cast<std::size_t>(me + a)] - me) = mu_act(a);
        Candidate d = make_candidate(c.y, std::move(lambda), std::move(mu));
        if (d.report.satisfies(s.kkt)) return d;
        return c;
    };

    // Starts from the active set suggested by the ADMM iterate and corrects
    // it for a few rounds: violated rows join, negative multipliers leave.
    std::set<std::vector<bool>> tried;
    auto polish = [&](const Vector& z, const Vector& y) -> std::optional<Candidate> {
        std::vector<bool> in_set(static_cast<std::size_t>(mi));
        for (Eigen::Index i = 0; i < mi; ++i)
            in_set[static_cast<std::size_t>(i)] = upper(me + i) - z(me + i) < y(me + i);
        for (int round = 0; round < kPolishRounds; ++round) {
            if (!tried.insert(in_set).second) return std::nullopt;
            std::vector<Eigen::Index> active;
            for (Eigen::Index i = 0; i < me; ++i) active.push_back(i);
            for (Eigen::Index i = 0; i < mi; ++i)
                if (in_set[static_cast<std::size_t>(i)]) active.push_back(me + i);
            const auto c = polish_on(active);
            if (!c) return std::nullopt;
            if (c->report.satisfies(s.kkt)) return c;
            const Vector excess = p.G_in() * c->y - p.b_in();
            bool changed = false;
            for (Eigen::Index i = 0; i < mi; ++i) {
                auto&& flag = in_set[static_cast<std::size_t>(i)];
                if (!flag && excess(i) > s.kkt.primal) {
                    flag = true;
                    changed = true;
                } else if (flag && c->mu(i) < -s.kkt.multiplier) {
                    flag = false;
                    changed = true;
                }
            }
            if (!changed) return std::nullopt;
        }
        return std::nullopt;
    };

    double eps_abs = s.eps_abs;
    double eps_rel = s.eps_rel;
    std::vector<bool> last_active;
    Vector ys_prev(m), rhs(n), xt(n), zt(m), zr(m), work(m);
    Vector x(n), z(m), y(m), Ax(m), Hx(n), Aty(n);

    if (warm != nullptr && warm->dual.size() == m && warm->y.size() == n && s.polish &&
        !zero_objective) {
        const Vector z0 = (A_ * warm->y).cwiseMax(lower).cwiseMin(upper);
        if (auto c = polish(z0, warm->dual)) return finish(QpStatus::Optimal, *c, 0, true);
    }

    for (int iter = 1; iter <= s.max_iterations; ++iter) {
        ys_prev = ys;
        work = rho_vec.cwiseProduct(zs) - ys;
        rhs = s.sigma * xs - qs;
        xt.noalias() = fac->inverse * rhs;
        xt.noalias() += fac->inverse_at * work;
        zt.noalias() = As_ * xt;
        xs = s.alpha * xt + (1.0 - s.alpha) * xs;
        zr = s.alpha * zt + (1.0 - s.alpha) * zs;
        zs = (zr + ys.cwiseProduct(rho_inv)).cwiseMax(ls).cwiseMin(us);
        ys += rho_vec.cwiseProduct(zr - zs);

        if (iter % s.check_interval != 0 && iter != s.max_iterations) continue;

        if (!xs.allFinite() || !ys.allFinite())
            throw NumericalError("QP: ADMM iterates became non-finite");

        x = D_.cwiseProduct(xs);
        z = zs.cwiseQuotient(E_);
        y = E_.cwiseProduct(ys) / cost_scale;

        if (zero_objective) {
            Candidate c = make_candidate(x, Vector::Zero(me), Vector::Zero(mi));
            if (c.report.satisfies(s.kkt)) return finish(QpStatus::Optimal, c, iter, false);
        }

        Ax.noalias() = A_ * x;
        Hx.noalias() = p.H() * x;
        Aty.noalias() = A_.transpose() * y;
        const double prim = inf_norm(Ax - z);
        const double dual = inf_norm(Hx + p.f() + Aty);
        const double prim_scale = std::max(inf_norm(Ax), inf_norm(z));
        const double dual_scale = std::max({inf_norm(Hx), inf_norm(Aty), inf_norm(p.f())});
        const double prim_rel = prim / (prim_scale + 1e-30);
        const double dual_rel = dual / (dual_scale + 1e-30);

        std::vector<bool> active(static_cast<std::size_t>(mi));
        for (Eigen::Index i = 0; i < mi; ++i)
            active[static_cast<std::size_t>(i)] = upper(me + i) - z(me + i) < y(me + i);
        const bool active_stable = active == last_active;
        last_active = std::move(active);

        const bool converged =
            prim <= eps_abs + eps_rel * prim_scale && dual <= eps_abs + eps_rel * dual_scale;
        const bool near_solution = active_stable && prim_rel < 1e-2 && dual_rel < 1e-2;
        if (!zero_objective && s.polish && (converged || near_solution)) {
            if (auto c = polish(z, y)) return finish(QpStatus::Optimal, *c, iter, true);
        }
        if (converged) {
            const Candidate c = make_candidate(x, y.head(me), y.tail(mi));
            if (c.report.satisfies(s.kkt)) return finish(QpStatus::Optimal, c, iter, false);
            eps_abs = std::max(eps_abs * 0.1, 1e-13);
            eps_rel = std::max(eps_rel * 0.1, 1e-13);
        }

        // Primal infeasibility certificate on the dual increment.
        Vector dy = E_.cwiseProduct(ys - ys_prev);
        for (Eigen::Index i = me; i < m; ++i) dy(i) = std::max(dy(i), 0.0);
        const double dy_norm = inf_norm(dy);
        if (dy_norm > 1e-30) {
            const double support = p.b_eq().dot(dy.head(me)) + p.b_in().dot(dy.tail(mi));
            if (support < -s.eps_infeasible * dy_norm &&
                inf_norm(A_.transpose() * dy) < s.eps_infeasible * dy_norm) {
                Candidate c = make_candidate(x, y.head(me), y.tail(mi));
                out.certificate = dy / dy_norm;
                return finish(QpStatus::PrimalInfeasible, c, iter, false);
            }
        }

        // Residual balancing.
        const double ratio = std::sqrt(prim_rel / (dual_rel + 1e-30));
        const double rho_new = std::clamp(rho * ratio, kRhoMin, kRhoMax);
        if (std::isfinite(rho_new) && (rho_new > 5.0 * rho || rho_new < 0.2 * rho)) {
            rho = rho_new;
            rho_vec = rho_vector(rho);
            rho_inv = rho_vec.cwiseInverse();
            fac = &factor(rho, cost_scale);
        }
    }
    x = D_.cwiseProduct(xs);
    y = E_.cwiseProduct(ys) / cost_scale;
    return finish(QpStatus::MaxIterations, make_candidate(x, y.head(me), y.tail(mi)),
                  s.max_iterations, false);
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings, const WarmStart* warm) {
    QpSolver solver(settings);
    return solver.solve(problem, warm);
}

FeasibilityResult check_feasibility(const QpProblem& problem, QpSolver& solver) {
    const Eigen::Index n = problem.num_variables();
    // Minimum-norm point: the strongly convex objective lets ADMM settle fast and
    // the polished point meets the constraints to machine precision.
    const QpProblem least_norm(Matrix::Identity(n, n), Vector::Zero(n), problem.G_eq(),
                               problem.b_eq(), problem.G_in(), problem.b_in());
    const QpSolution sol = solver.solve(least_norm);
    FeasibilityResult r;
    r.feasible = sol.status == QpStatus::Optimal;
    r.inconclusive = sol.status == QpStatus::MaxIterations;
    r.point = sol.y;
    return r;
}

FeasibilityResult check_feasibility(const QpProblem& problem, const QpSettings& settings) {
    QpSolver solver(settings);
    return check_feasibility(problem, solver);
}

void write_qp_dump(const QpProblem& p, std::ostream& out) {
    auto block = [&](const char* name, const Matrix& M) {
        out << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            for (Eigen::Index j = 0; j < M.cols(); ++j)
                out << (j ? " " : "") << std::setprecision(17) << M(i, j);
            out << '\n';
        }
    };
    block("H", p.H());
    block("f", p.f());
    block("G_eq", p.G_eq());
    block("b_eq", p.b_eq());
    block("G_in", p.G_in());
    block("b_in", p.b_in());
}

}  // namespace smpcval
