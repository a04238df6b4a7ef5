#pragma once

#include <Eigen/Dense>

namespace orthogmm {

// Dense convex quadratic program
//   minimize   0.5 x' H x + c' x
//   subject to A_eq x = b_eq,  A_in x <= b_in.
// Matrices with zero rows are allowed and mean "no constraints of that kind".
struct QpProblem {
    Eigen::MatrixXd hessian;
    Eigen::VectorXd linear;
    Eigen::MatrixXd eq_matrix;
    Eigen::VectorXd eq_rhs;
    Eigen::MatrixXd ineq_matrix;
    Eigen::VectorXd ineq_rhs;
};

struct QpOptions {
    int max_iterations = 10000;
    double tolerance = 1e-10;
};

struct QpResult {
    Eigen::VectorXd x;
    Eigen::VectorXd eq_dual;
    Eigen::VectorXd ineq_dual;
    int iterations = 0;
    // Worst of the scaled stationarity, primal feasibility, and complementarity
    // residuals at the returned point.
    double kkt_residual = 0.0;
};

// Primal-dual interior point with Mehrotra predictor-corrector steps. Intended
// for dense problems up to a few hundred variables. Linear programs reuse the
// engine by passing hessian = 1e-12 * I.
QpResult qp_solve(const QpProblem& problem, const QpOptions& options = {});

// Convenience: rows of the J-simplex as (eq, ineq) constraints appended to a
// problem whose first J variables are the simplex-constrained block.
void add_simplex_constraints(QpProblem& problem, int total_vars, int simplex_dim);

}  // namespace orthogmm
