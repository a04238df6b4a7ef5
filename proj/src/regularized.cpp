#include "orthogmm/regularized.hpp"

#include <cmath>
#include <string>

#include "orthogmm/errors.hpp"
#include "orthogmm/qp.hpp"

namespace orthogmm {

namespace {

// Both shipped models are affine: ghat(beta, delta) = g0 + Gb beta + Gd delta.
struct AffineModel {
    Eigen::VectorXd g0;
    Eigen::MatrixXd g_beta;
    Eigen::MatrixXd g_delta;
};

AffineModel affine_decomposition(const MomentModel& model) {
    if (!model.constant_in_theta()) {
        throw ArgumentError("regularized fit requires a model that is linear in theta");
    }
    ParameterPoint origin;
    origin.beta = Eigen::VectorXd::Zero(model.beta_dim());
    origin.delta = Eigen::VectorXd::Zero(model.delta_dim());
    AffineModel affine;
    affine.g0 = model.sample_moments(origin);
    affine.g_beta = model.beta_jacobian(origin);
    affine.g_delta = model.delta_jacobian(origin);
    return affine;
}

// Number of auxiliary variables the delta-domain encoding needs.
int domain_aux_vars(const DeltaDomain& domain, int j) {
    return domain.kind == DeltaDomain::Kind::L1Ball ? j : 0;
}

// Append the delta-domain constraints. Variable layout: delta occupies
// [0, j), auxiliary |delta| bounds (L1 case) occupy [aux_offset, aux_offset+j).
void add_domain_constraints(QpProblem& problem, const DeltaDomain& domain, int total_vars,
                            int j, int aux_offset) {
    switch (domain.kind) {
        case DeltaDomain::Kind::Simplex:
            add_simplex_constraints(problem, total_vars, j);
            break;
        case DeltaDomain::Kind::Free:
            break;
        case DeltaDomain::Kind::L1Ball: {
            // delta_i <= u_i, -delta_i <= u_i, sum u <= bound
            const Eigen::Index old = problem.ineq_matrix.rows();
            problem.ineq_matrix.conservativeResize(old + 2 * j + 1, total_vars);
            problem.ineq_matrix.bottomRows(2 * j + 1).setZero();
            problem.ineq_rhs.conservativeResize(old + 2 * j + 1);
            for (int i = 0; i < j; ++i) {
                problem.ineq_matrix(old + i, i) = 1.0;
                problem.ineq_matrix(old + i, aux_offset + i) = -1.0;
                problem.ineq_rhs(old + i) = 0.0;
                problem.ineq_matrix(old + j + i, i) = -1.0;
                problem.ineq_matrix(old + j + i, aux_offset + i) = -1.0;
                problem.ineq_rhs(old + j + i) = 0.0;
            }
            problem.ineq_matrix.row(old + 2 * j).segment(aux_offset, j).setOnes();
            problem.ineq_rhs(old + 2 * j) = domain.l1_bound;
            break;
        }
    }
}

// Two-sided moment constraints |g0 + Gb beta + Gd delta| <= bound, where the
// bound is either a fixed lambda or the epigraph variable at column t_col.
void add_moment_constraints(QpProblem& problem, const AffineModel& affine, int total_vars,
                            int beta_offset, int t_col, double lambda) {
    const int q = static_cast<int>(affine.g0.size());
    const int j = static_cast<int>(affine.g_delta.cols());
    const int p = static_cast<int>(affine.g_beta.cols());
    const Eigen::Index old = problem.ineq_matrix.rows();
    problem.ineq_matrix.conservativeResize(old + 2 * q, total_vars);
    problem.ineq_matrix.bottomRows(2 * q).setZero();
    problem.ineq_rhs.conservativeResize(old + 2 * q);
    for (int i = 0; i < q; ++i) {
        for (int sign = 0; sign < 2; ++sign) {
            const double s = sign == 0 ? 1.0 : -1.0;
            const Eigen::Index row = old + 2 * i + sign;
            problem.ineq_matrix.row(row).head(j) = s * affine.g_delta.row(i);
            problem.ineq_matrix.row(row).segment(beta_offset, p) = s * affine.g_beta.row(i);
            if (t_col >= 0) problem.ineq_matrix(row, t_col) = -1.0;
            problem.ineq_rhs(row) = (t_col >= 0 ? 0.0 : lambda) - s * affine.g0(i);
        }
    }
}

// Small absolute inflation of the lambda bounds keeps the interior-point
// feasible set from collapsing to zero width when lambda sits exactly at its
// minimum-feasible value. Stays inside the 1e-8 feasibility certificate.
constexpr double kBoundSlack = 5e-9;
constexpr double kLpRidge = 1e-12;
constexpr double kLambdaFloor = 1e-10;

double beta_zeroing_moments(const AffineModel& affine, const Eigen::VectorXd& delta) {
    // Least-squares beta over the beta-dependent coordinates; exact zero for
    // the synthetic control model where a single coordinate carries beta.
    const Eigen::VectorXd resid = affine.g0 + affine.g_delta * delta;
    const Eigen::VectorXd b = affine.g_beta.col(0);
    const double denom = b.squaredNorm();
    if (denom == 0.0) return 0.0;
    return -b.dot(resid) / denom;
}

}  // namespace

double min_feasible_lambda_delta(const MomentModel& model, const DeltaDomain& domain) {
    if (model.delta_dim() < 1) {
        throw ArgumentError("min_feasible_lambda_delta: model has no nuisance weights");
    }
    if (model.beta_dim() != 1) {
        throw ArgumentError("min_feasible_lambda_delta: only scalar beta is supported");
    }
    const AffineModel affine = affine_decomposition(model);
    const int j = model.delta_dim();
    const int aux = domain_aux_vars(domain, j);
    const int n = j + 1 /*beta*/ + 1 /*t*/ + aux;
    const int t_col = j + 1;

    QpProblem lp;
    lp.hessian = 2.0 * kLpRidge * Eigen::MatrixXd::Identity(n, n);
    lp.linear = Eigen::VectorXd::Zero(n);
    lp.linear(t_col) = 1.0;
    add_domain_constraints(lp, domain, n, j, t_col + 1);
    add_moment_constraints(lp, affine, n, j, t_col, 0.0);

    const QpResult result = qp_solve(lp);
    return std::max(0.0, result.x(t_col));
}

double min_feasible_lambda_eta(const Eigen::MatrixXd& jac) {
    const int q = static_cast<int>(jac.rows());
    const int j = static_cast<int>(jac.cols());
    if (q < 1 || j < 1) throw ArgumentError("min_feasible_lambda_eta: empty jacobian");
    if (q == 1) return jac.row(0).cwiseAbs().maxCoeff();

    const int n = q - 1 + 1;  // free eta entries plus the epigraph variable
    const int t_col = q - 1;
    QpProblem lp;
    lp.hessian = 2.0 * kLpRidge * Eigen::MatrixXd::Identity(n, n);
    lp.linear = Eigen::VectorXd::Zero(n);
    lp.linear(t_col) = 1.0;
    lp.ineq_matrix.resize(2 * j, n);
    lp.ineq_rhs.resize(2 * j);
    for (int col = 0; col < j; ++col) {
        for (int sign = 0; sign < 2; ++sign) {
            const double s = sign == 0 ? 1.0 : -1.0;
            const int row = 2 * col + sign;
            lp.ineq_matrix.row(row).head(q - 1) = s * jac.col(col).head(q - 1).transpose();
            lp.ineq_matrix(row, t_col) = -1.0;
            lp.ineq_rhs(row) = -s * jac(q - 1, col);
        }
    }
    const QpResult result = qp_solve(lp);
    return std::max(0.0, result.x(t_col));
}

TuningParams select_tuning(const MomentModel& model, const DeltaDomain& domain) {
    const double n_eff = model.effective_sample_size();
    const double multiplier = std::max(1.0, std::log(n_eff));
    ParameterPoint origin;
    origin.beta = Eigen::VectorXd::Zero(model.beta_dim());
    origin.delta = Eigen::VectorXd::Zero(model.delta_dim());

    TuningParams tuning;
    tuning.multiplier = multiplier;
    tuning.auto_selected = true;
    tuning.lambda_delta =
        std::max(min_feasible_lambda_delta(model, domain) * multiplier, kLambdaFloor);
    tuning.lambda_eta =
        std::max(min_feasible_lambda_eta(model.delta_jacobian(origin)) * multiplier,
                 kLambdaFloor);
    return tuning;
}

DeltaSolution solve_delta(const MomentModel& model, const TuningParams& tuning,
                          const DeltaDomain& domain) {
    const int j = model.delta_dim();
    if (j < 1) throw ArgumentError("solve_delta: model has no nuisance weights");
    if (model.beta_dim() != 1) {
        throw ArgumentError("solve_delta: only scalar beta is supported");
    }
    const AffineModel affine = affine_decomposition(model);

    const double min_feasible = min_feasible_lambda_delta(model, domain);
    if (tuning.lambda_delta < min_feasible - 1e-9 * (1.0 + min_feasible)) {
        throw InfeasibleError("solve_delta: lambda_delta = " +
                              std::to_string(tuning.lambda_delta) +
                              " is below the minimum feasible value " +
                              std::to_string(min_feasible));
    }

    const int aux = domain_aux_vars(domain, j);
    const int n = j + 1 + aux;
    QpProblem qp;
    qp.hessian = Eigen::MatrixXd::Zero(n, n);
    qp.hessian.topLeftCorner(j, j) = 2.0 * Eigen::MatrixXd::Identity(j, j);
    qp.hessian(j, j) = 2.0 * kLpRidge;  // flat beta direction
    for (int i = 0; i < aux; ++i) qp.hessian(j + 1 + i, j + 1 + i) = 2.0 * kLpRidge;
    qp.linear = Eigen::VectorXd::Zero(n);
    add_domain_constraints(qp, domain, n, j, j + 1);
    add_moment_constraints(qp, affine, n, j, -1, tuning.lambda_delta + kBoundSlack);

    const QpResult result = qp_solve(qp);

    DeltaSolution solution;
    solution.delta_hat = result.x.head(j);
    if (domain.kind == DeltaDomain::Kind::Simplex) {
        // Clamp solver-tolerance negatives and renormalize to an exact simplex
        // point; downstream code assumes it.
        solution.delta_hat = solution.delta_hat.cwiseMax(0.0);
        solution.delta_hat /= solution.delta_hat.sum();
    }
    solution.beta_init = beta_zeroing_moments(affine, solution.delta_hat);
    solution.diagnostics = {result.iterations, result.kkt_residual};
    return solution;
}

EtaSolution solve_eta(const Eigen::MatrixXd& jac, const TuningParams& tuning) {
    const int q = static_cast<int>(jac.rows());
    const int j = static_cast<int>(jac.cols());
    if (q < 1 || j < 1) throw ArgumentError("solve_eta: empty jacobian");

    EtaSolution solution;
    if (q == 1) {
        const double resid = jac.row(0).cwiseAbs().maxCoeff();
        if (resid > tuning.lambda_eta + 1e-8) {
            throw InfeasibleError("solve_eta: lambda_eta = " +
                                  std::to_string(tuning.lambda_eta) +
                                  " is below the minimum feasible value " +
                                  std::to_string(resid));
        }
        solution.eta_hat = Eigen::VectorXd::Ones(1);
        solution.diagnostics = {0, 0.0};
        return solution;
    }

    const double min_feasible = min_feasible_lambda_eta(jac);
    if (tuning.lambda_eta < min_feasible - 1e-9 * (1.0 + min_feasible)) {
        throw InfeasibleError("solve_eta: lambda_eta = " + std::to_string(tuning.lambda_eta) +
                              " is below the minimum feasible value " +
                              std::to_string(min_feasible));
    }

    const int n = q - 1;

    // When lambda_eta sits at its numerical floor the feasible set is a slab
    // of near-zero width around the exact-annihilation manifold, which starves
    // the interior point of room. Take the limit problem instead: the
    // minimum-norm eta with eta * jac = 0, accepted when it certifies.
    if (tuning.lambda_eta <= 1e-7) {
        const Eigen::MatrixXd lhs = jac.topRows(n).transpose();  // J x (Q-1)
        const Eigen::VectorXd rhs = -jac.row(n).transpose();
        const Eigen::VectorXd v =
            lhs.completeOrthogonalDecomposition().solve(rhs);
        const double slack = (lhs * v - rhs).cwiseAbs().maxCoeff();
        if (slack <= tuning.lambda_eta + 1e-9) {
            solution.eta_hat.resize(q);
            solution.eta_hat.head(n) = v;
            solution.eta_hat(q - 1) = 1.0;
            solution.diagnostics = {1, slack};
            return solution;
        }
    }
    QpProblem qp;
    qp.hessian = 2.0 * Eigen::MatrixXd::Identity(n, n);
    qp.linear = Eigen::VectorXd::Zero(n);
    qp.ineq_matrix.resize(2 * j, n);
    qp.ineq_rhs.resize(2 * j);
    const double bound = tuning.lambda_eta + kBoundSlack;
    for (int col = 0; col < j; ++col) {
        for (int sign = 0; sign < 2; ++sign) {
            const double s = sign == 0 ? 1.0 : -1.0;
            const int row = 2 * col + sign;
            qp.ineq_matrix.row(row) = s * jac.col(col).head(n).transpose();
            qp.ineq_rhs(row) = bound - s * jac(q - 1, col);
        }
    }
    const QpResult result = qp_solve(qp);
    solution.eta_hat.resize(q);
    solution.eta_hat.head(n) = result.x;
    solution.eta_hat(q - 1) = 1.0;
    solution.diagnostics = {result.iterations, result.kkt_residual};
    return solution;
}

NuisanceEstimate estimate_nuisance(const MomentModel& model, const TuningParams& tuning,
                                   const DeltaDomain& domain) {
    const DeltaSolution delta = solve_delta(model, tuning, domain);
    ParameterPoint fitted;
    fitted.beta = Eigen::VectorXd::Constant(1, delta.beta_init);
    fitted.delta = delta.delta_hat;
    const Eigen::MatrixXd jac = model.delta_jacobian(fitted);
    const EtaSolution eta = solve_eta(jac, tuning);

    NuisanceEstimate estimate;
    estimate.beta_init = delta.beta_init;
    estimate.delta_hat = delta.delta_hat;
    estimate.eta_hat = eta.eta_hat;
    estimate.penalty_value = delta.delta_hat.squaredNorm() + eta.eta_hat.squaredNorm();
    estimate.slack_delta = model.sample_moments(fitted).cwiseAbs().maxCoeff();
    estimate.slack_eta = (eta.eta_hat.transpose() * jac).cwiseAbs().maxCoeff();
    estimate.tuning = tuning;
    estimate.delta_diagnostics = delta.diagnostics;
    estimate.eta_diagnostics = eta.diagnostics;
    return estimate;
}

}  // namespace orthogmm
