#include "orthogmm/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "orthogmm/errors.hpp"

namespace orthogmm {

namespace {

void validate(const QpProblem& p) {
    const auto n = p.hessian.rows();
    if (p.hessian.cols() != n || p.linear.size() != n) {
        throw ArgumentError("qp_solve: hessian/linear dimensions disagree");
    }
    if ((p.hessian - p.hessian.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw ArgumentError("qp_solve: hessian is not symmetric");
    }
    if (p.eq_matrix.rows() != p.eq_rhs.size() ||
        (p.eq_matrix.rows() > 0 && p.eq_matrix.cols() != n)) {
        throw ArgumentError("qp_solve: equality constraint dimensions disagree");
    }
    if (p.ineq_matrix.rows() != p.ineq_rhs.size() ||
        (p.ineq_matrix.rows() > 0 && p.ineq_matrix.cols() != n)) {
        throw ArgumentError("qp_solve: inequality constraint dimensions disagree");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p.hessian, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, p.hessian.cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
        throw ArgumentError("qp_solve: hessian is not positive semidefinite");
    }
}

// Largest alpha in (0, 1] keeping v + alpha * dv >= (1 - damping) * v.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
    }
    return alpha;
}

[[noreturn]] void throw_infeasible(const QpProblem& p, const Eigen::VectorXd& x) {
    int worst = -1;
    double violation = 0.0;
    for (Eigen::Index i = 0; i < p.eq_matrix.rows(); ++i) {
        const double v = std::fabs(p.eq_matrix.row(i) * x - p.eq_rhs(i));
        if (v > violation) {
            violation = v;
            worst = static_cast<int>(i);
        }
    }
    const int eq_count = static_cast<int>(p.eq_matrix.rows());
    for (Eigen::Index i = 0; i < p.ineq_matrix.rows(); ++i) {
        const double v = p.ineq_matrix.row(i) * x - p.ineq_rhs(i);
        if (v > violation) {
            violation = v;
            worst = eq_count + static_cast<int>(i);
        }
    }
    throw InfeasibleError("qp_solve: constraints appear infeasible (worst constraint " +
                              std::to_string(worst) + ", violation " +
                              std::to_string(violation) + ")",
                          worst, violation);
}

// Equality-constrained (or unconstrained) case: one KKT solve.
QpResult solve_equality_only(const QpProblem& p) {
    const Eigen::Index n = p.hessian.rows();
    const Eigen::Index me = p.eq_matrix.rows();
    Eigen::MatrixXd kkt(n + me, n + me);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = p.hessian;
    if (me > 0) {
        kkt.topRightCorner(n, me) = p.eq_matrix.transpose();
        kkt.bottomLeftCorner(me, n) = p.eq_matrix;
    }
    Eigen::VectorXd rhs(n + me);
    rhs.head(n) = -p.linear;
    rhs.tail(me) = p.eq_rhs;
    Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);

    QpResult result;
    result.x = sol.head(n);
    result.eq_dual = sol.tail(me);
    result.ineq_dual.resize(0);
    result.iterations = 1;
    const double stat = (p.hessian * result.x + p.linear +
                         p.eq_matrix.transpose() * result.eq_dual)
                            .cwiseAbs()
                            .maxCoeff();
    const double prim = me > 0 ? (p.eq_matrix * result.x - p.eq_rhs).cwiseAbs().maxCoeff() : 0.0;
    result.kkt_residual = std::max(stat, prim);
    return result;
}

}  // namespace

QpResult qp_solve(const QpProblem& problem, const QpOptions& options) {
    validate(problem);
    // Normalize empty constraint blocks to 0 x n so matrix expressions stay
    // dimension-consistent throughout.
    QpProblem p = problem;
    const Eigen::Index n = p.hessian.rows();
    if (p.eq_matrix.rows() == 0) p.eq_matrix.resize(0, n);
    if (p.ineq_matrix.rows() == 0) p.ineq_matrix.resize(0, n);
    const Eigen::Index me = p.eq_matrix.rows();
    const Eigen::Index mi = p.ineq_matrix.rows();

    if (mi == 0) return solve_equality_only(p);

    const double scale = 1.0 + std::max({p.linear.cwiseAbs().maxCoeff(),
                                         mi > 0 ? p.ineq_rhs.cwiseAbs().maxCoeff() : 0.0,
                                         me > 0 ? p.eq_rhs.cwiseAbs().maxCoeff() : 0.0});

    // Cold start: least-squares point for the equalities, comfortable slacks.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (me > 0) {
        x = p.eq_matrix.colPivHouseholderQr().solve(p.eq_rhs);
    }
    Eigen::VectorXd s(mi), z(mi);
    {
        const Eigen::VectorXd gap = p.ineq_rhs - p.ineq_matrix * x;
        for (Eigen::Index i = 0; i < mi; ++i) s(i) = std::max(1.0, gap(i));
    }
    z.setOnes();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(me);

    QpResult best;
    best.x = x;
    best.kkt_residual = std::numeric_limits<double>::infinity();
    int stalled = 0;

    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const Eigen::VectorXd r_dual = p.hessian * x + p.linear +
                                       p.eq_matrix.transpose() * y +
                                       p.ineq_matrix.transpose() * z;
        const Eigen::VectorXd r_eq =
            me > 0 ? Eigen::VectorXd(p.eq_matrix * x - p.eq_rhs) : Eigen::VectorXd();
        const Eigen::VectorXd r_in = p.ineq_matrix * x + s - p.ineq_rhs;
        const double mu = s.dot(z) / static_cast<double>(mi);

        const double res = std::max({r_dual.cwiseAbs().maxCoeff(),
                                     me > 0 ? r_eq.cwiseAbs().maxCoeff() : 0.0,
                                     r_in.cwiseAbs().maxCoeff(), mu});
        if (res < 0.99 * best.kkt_residual) {
            best.x = x;
            best.eq_dual = y;
            best.ineq_dual = z;
            best.kkt_residual = res;
            stalled = 0;
        } else {
            // Ill-conditioned Newton systems (near-degenerate feasible sets)
            // eventually stop making progress; keep the best iterate.
            if (++stalled > 40) break;
        }
        if (res < options.tolerance * scale) break;

        // Divergence of the dual iterates with a stubborn primal residual is
        // the interior-point signature of an empty feasible set.
        const double primal_res = std::max(me > 0 ? r_eq.cwiseAbs().maxCoeff() : 0.0,
                                           r_in.cwiseAbs().maxCoeff());
        if (z.cwiseAbs().maxCoeff() > 1e12 || s.cwiseAbs().maxCoeff() > 1e14) {
            if (primal_res > 1e-7 * scale) throw_infeasible(p, x);
            throw ConvergenceError("qp_solve: iterates diverged");
        }

        // Normal matrix M = H + A_in' diag(z/s) A_in, regularized as needed.
        const Eigen::ArrayXd w = z.array() / s.array();
        Eigen::MatrixXd m_mat = p.hessian;
        m_mat.noalias() +=
            p.ineq_matrix.transpose() * w.matrix().asDiagonal() * p.ineq_matrix;
        double ridge = 1e-13 * std::max(1.0, m_mat.diagonal().cwiseAbs().maxCoeff());
        Eigen::LLT<Eigen::MatrixXd> llt;
        for (int attempt = 0; attempt < 40; ++attempt) {
            llt.compute(m_mat + ridge * Eigen::MatrixXd::Identity(n, n));
            if (llt.info() == Eigen::Success) break;
            ridge *= 10.0;
        }
        if (llt.info() != Eigen::Success) {
            throw ConvergenceError("qp_solve: KKT system factorization failed");
        }

        Eigen::LLT<Eigen::MatrixXd> schur_llt;
        Eigen::MatrixXd m_inv_aeqt;
        if (me > 0) {
            m_inv_aeqt = llt.solve(p.eq_matrix.transpose());
            Eigen::MatrixXd schur = p.eq_matrix * m_inv_aeqt;
            double schur_ridge = 1e-13 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
            for (int attempt = 0; attempt < 40; ++attempt) {
                schur_llt.compute(schur +
                                  schur_ridge * Eigen::MatrixXd::Identity(me, me));
                if (schur_llt.info() == Eigen::Success) break;
                schur_ridge *= 10.0;
            }
            if (schur_llt.info() != Eigen::Success) {
                throw ConvergenceError("qp_solve: equality Schur factorization failed");
            }
        }

        // One Newton solve for a given complementarity target vector rc.
        const auto newton_step = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx,
                                     Eigen::VectorXd& dy, Eigen::VectorXd& ds,
                                     Eigen::VectorXd& dz) {
            const Eigen::VectorXd ineq_term =
                (z.array() * r_in.array() - rc.array()) / s.array();
            const Eigen::VectorXd rhs1 =
                -r_dual - p.ineq_matrix.transpose() * ineq_term;
            const Eigen::VectorXd m_inv_rhs1 = llt.solve(rhs1);
            if (me > 0) {
                dy = schur_llt.solve(p.eq_matrix * m_inv_rhs1 + r_eq);
                dx = m_inv_rhs1 - m_inv_aeqt * dy;
            } else {
                dy.resize(0);
                dx = m_inv_rhs1;
            }
            ds = -r_in - p.ineq_matrix * dx;
            dz = (-rc.array() - z.array() * ds.array()) / s.array();
        };

        // Affine (predictor) direction.
        Eigen::VectorXd dx_aff, dy_aff, ds_aff, dz_aff;
        newton_step(s.cwiseProduct(z), dx_aff, dy_aff, ds_aff, dz_aff);
        const double alpha_p_aff = max_step(s, ds_aff);
        const double alpha_d_aff = max_step(z, dz_aff);
        const double mu_aff = (s + alpha_p_aff * ds_aff).dot(z + alpha_d_aff * dz_aff) /
                              static_cast<double>(mi);
        const double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);

        // Corrector direction.
        Eigen::VectorXd rc = s.cwiseProduct(z).array() + ds_aff.array() * dz_aff.array() -
                             sigma * mu;
        Eigen::VectorXd dx, dy, ds, dz;
        newton_step(rc, dx, dy, ds, dz);

        const double alpha_p = std::min(1.0, 0.99 * max_step(s, ds));
        const double alpha_d = std::min(1.0, 0.99 * max_step(z, dz));
        x += alpha_p * dx;
        s += alpha_p * ds;
        if (me > 0) y += alpha_d * dy;
        z += alpha_d * dz;
    }

    if (best.kkt_residual >= std::max(options.tolerance, 1e-8) * scale) {
        // Either the iteration cap was hit or progress stalled; distinguish an
        // infeasible program from plain non-convergence.
        const Eigen::VectorXd r_in_best = p.ineq_matrix * best.x - p.ineq_rhs;
        const double primal_res =
            std::max(me > 0 ? (p.eq_matrix * best.x - p.eq_rhs).cwiseAbs().maxCoeff() : 0.0,
                     r_in_best.maxCoeff());
        if (primal_res > 1e-6 * scale) throw_infeasible(p, best.x);
        throw ConvergenceError("qp_solve: iteration cap reached (best KKT residual " +
                               std::to_string(best.kkt_residual) + ")");
    }
    best.iterations = iter + 1;
    return best;
}

void add_simplex_constraints(QpProblem& problem, int total_vars, int simplex_dim) {
    const Eigen::Index old_eq = problem.eq_matrix.rows();
    problem.eq_matrix.conservativeResize(old_eq + 1, total_vars);
    problem.eq_matrix.row(old_eq).setZero();
    problem.eq_matrix.row(old_eq).head(simplex_dim).setOnes();
    problem.eq_rhs.conservativeResize(old_eq + 1);
    problem.eq_rhs(old_eq) = 1.0;

    const Eigen::Index old_in = problem.ineq_matrix.rows();
    problem.ineq_matrix.conservativeResize(old_in + simplex_dim, total_vars);
    problem.ineq_matrix.bottomRows(simplex_dim).setZero();
    problem.ineq_matrix.bottomRows(simplex_dim).leftCols(simplex_dim) =
        -Eigen::MatrixXd::Identity(simplex_dim, simplex_dim);
    problem.ineq_rhs.conservativeResize(old_in + simplex_dim);
    problem.ineq_rhs.tail(simplex_dim).setZero();
}

}  // namespace orthogmm
