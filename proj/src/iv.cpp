#include "orthogmm/iv.hpp"

#include <cmath>
#include <string>

#include "orthogmm/errors.hpp"
#include "orthogmm/qp.hpp"

namespace orthogmm {

void IvData::validate() const {
    const Eigen::Index n = y.size();
    if (n < 4) throw ArgumentError("iv: need at least 4 observations");
    if (x.size() != n || z.rows() != n) {
        throw ArgumentError("iv: y, x, z row counts disagree");
    }
    if (z.cols() < 1) throw ArgumentError("iv: need at least one instrument");
    if (!y.allFinite() || !x.allFinite() || !z.allFinite()) {
        throw DataError("iv: data contains non-finite entries");
    }
    if (l1_bound && !(*l1_bound > 0.0)) {
        throw ArgumentError("iv: l1 bound must be positive");
    }
}

IvMomentModel::IvMomentModel(const IvData& data) {
    data.validate();
    n_ = static_cast<int>(data.y.size());
    j_ = static_cast<int>(data.z.cols());
    y_ = data.y;
    x_ = data.x;
    z_ = data.z;
}

Eigen::VectorXd IvMomentModel::sample_moments(const ParameterPoint& point) const {
    check_point(point);
    const Eigen::VectorXd combined = z_ * point.delta;
    const Eigen::VectorXd resid = y_ - point.beta(0) * x_;
    return Eigen::VectorXd::Constant(1, combined.dot(resid) / n_);
}

Eigen::MatrixXd IvMomentModel::moment_series(const ParameterPoint& point) const {
    check_point(point);
    const Eigen::VectorXd combined = z_ * point.delta;
    const Eigen::VectorXd resid = y_ - point.beta(0) * x_;
    return combined.cwiseProduct(resid);
}

Eigen::MatrixXd IvMomentModel::delta_jacobian(const ParameterPoint& point) const {
    check_point(point);
    const Eigen::VectorXd resid = y_ - point.beta(0) * x_;
    return (z_.transpose() * resid).transpose() / n_;
}

Eigen::MatrixXd IvMomentModel::beta_jacobian(const ParameterPoint& point) const {
    check_point(point);
    const Eigen::VectorXd combined = z_ * point.delta;
    return Eigen::MatrixXd::Constant(1, 1, -combined.dot(x_) / n_);
}

namespace {

double ratio_beta(const IvData& data, const Eigen::VectorXd& delta) {
    const Eigen::VectorXd combined = data.z * delta;
    const double denominator = combined.dot(data.x);
    if (std::fabs(denominator) < 1e-12) {
        throw WeakIdentificationError(
            "fit_iv: combined instrument is orthogonal to the regressor "
            "(denominator " +
            std::to_string(denominator) + ")");
    }
    return combined.dot(data.y) / denominator;
}

// One delta step at fixed beta: min ||A delta - b||^2 subject to the exclusion
// band and the optional L1 ball.
Eigen::VectorXd delta_step(const IvData& data, double beta, double lambda,
                           const Eigen::MatrixXd& a_mat, const Eigen::VectorXd& b_vec) {
    const int n = static_cast<int>(data.y.size());
    const int j = static_cast<int>(data.z.cols());
    const Eigen::VectorXd w = data.z.transpose() * (data.y - beta * data.x) / n;

    const bool with_l1 = data.l1_bound.has_value();
    const int vars = with_l1 ? 2 * j : j;
    QpProblem qp;
    qp.hessian = Eigen::MatrixXd::Zero(vars, vars);
    qp.hessian.topLeftCorner(j, j) = 2.0 * a_mat.transpose() * a_mat;
    qp.hessian.topLeftCorner(j, j) += 1e-12 * Eigen::MatrixXd::Identity(j, j);
    if (with_l1) {
        qp.hessian.bottomRightCorner(j, j) = 2e-12 * Eigen::MatrixXd::Identity(j, j);
    }
    qp.linear = Eigen::VectorXd::Zero(vars);
    qp.linear.head(j) = -2.0 * a_mat.transpose() * b_vec;

    if (lambda <= 1e-9) {
        // The band is numerically an equality; model it as one to keep the
        // interior point away from a collapsing slab.
        qp.eq_matrix.resize(1, vars);
        qp.eq_matrix.setZero();
        qp.eq_matrix.row(0).head(j) = w.transpose();
        qp.eq_rhs = Eigen::VectorXd::Zero(1);
    } else {
        qp.ineq_matrix.resize(2, vars);
        qp.ineq_matrix.setZero();
        qp.ineq_matrix.row(0).head(j) = w.transpose();
        qp.ineq_matrix.row(1).head(j) = -w.transpose();
        qp.ineq_rhs.resize(2);
        qp.ineq_rhs << lambda, lambda;
    }
    if (with_l1) {
        // delta_i <= u_i, -delta_i <= u_i, sum u <= bound
        const Eigen::Index old = qp.ineq_matrix.rows();
        qp.ineq_matrix.conservativeResize(old + 2 * j + 1, vars);
        qp.ineq_matrix.bottomRows(2 * j + 1).setZero();
        qp.ineq_rhs.conservativeResize(old + 2 * j + 1);
        for (int i = 0; i < j; ++i) {
            qp.ineq_matrix(old + i, i) = 1.0;
            qp.ineq_matrix(old + i, j + i) = -1.0;
            qp.ineq_rhs(old + i) = 0.0;
            qp.ineq_matrix(old + j + i, i) = -1.0;
            qp.ineq_matrix(old + j + i, j + i) = -1.0;
            qp.ineq_rhs(old + j + i) = 0.0;
        }
        qp.ineq_matrix.row(old + 2 * j).segment(j, j).setOnes();
        qp.ineq_rhs(old + 2 * j) = *data.l1_bound;
    }
    return qp_solve(qp).x.head(j);
}

}  // namespace

IvFitResult fit_iv(const IvData& data, std::optional<double> lambda_delta) {
    data.validate();
    const int n = static_cast<int>(data.y.size());
    const int j = static_cast<int>(data.z.cols());

    IvFitResult result;
    result.lambda_delta = lambda_delta.value_or(1e-10);
    if (lambda_delta && *lambda_delta < 0.0) {
        throw ArgumentError("fit_iv: lambda_delta must be nonnegative");
    }
    // The ratio step zeroes the sample moment exactly, so the minimum feasible
    // lambda over the unconstrained delta domain is zero and the auto-selected
    // value reduces to the numerical floor.

    Eigen::VectorXd delta = Eigen::VectorXd::Constant(j, 1.0 / j);
    double beta = ratio_beta(data, delta);
    const Eigen::VectorXd b_vec = data.z.transpose() * data.x / n;

    for (int iter = 0; iter < 100; ++iter) {
        Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(j, j);
        const Eigen::VectorXd resid = data.y - beta * data.x;
        for (int i = 0; i < n; ++i) {
            a_mat.noalias() += resid(i) * resid(i) * data.z.row(i).transpose() * data.z.row(i);
        }
        a_mat /= n;

        const double before = (a_mat * delta - b_vec).squaredNorm();
        const Eigen::VectorXd delta_new =
            delta_step(data, beta, result.lambda_delta, a_mat, b_vec);
        const double after = (a_mat * delta_new - b_vec).squaredNorm();
        result.objective_trace.emplace_back(before, after);

        const double beta_new = ratio_beta(data, delta_new);
        const double move =
            std::max(std::fabs(beta_new - beta), (delta_new - delta).cwiseAbs().maxCoeff());
        delta = delta_new;
        beta = beta_new;
        result.iterations = iter + 1;
        if (move < 1e-8) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) {
        std::string trace;
        for (size_t i = result.objective_trace.size() >= 3 ? result.objective_trace.size() - 3 : 0;
             i < result.objective_trace.size(); ++i) {
            trace += " " + std::to_string(result.objective_trace[i].second);
        }
        throw ConvergenceError("fit_iv: alternating fit did not converge in 100 iterations "
                               "(trailing objective values:" +
                               trace + ")");
    }

    result.delta_hat = delta;
    result.beta_tilde = beta;
    ParameterPoint fitted;
    fitted.beta = Eigen::VectorXd::Constant(1, beta);
    fitted.delta = delta;
    result.exclusion_residual =
        std::fabs(IvMomentModel(data).sample_moments(fitted)(0));
    return result;
}

double two_stage_ls(const IvData& data) {
    data.validate();
    const Eigen::MatrixXd ztz = data.z.transpose() * data.z;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ztz);
    if (!lu.isInvertible()) {
        throw NumericalError("two_stage_ls: Z'Z is singular");
    }
    const Eigen::VectorXd x_hat = data.z * lu.solve(data.z.transpose() * data.x);
    const double denominator = x_hat.dot(data.x);
    if (std::fabs(denominator) < 1e-12) {
        throw WeakIdentificationError("two_stage_ls: projected regressor is degenerate");
    }
    return x_hat.dot(data.y) / denominator;
}

InferenceReport iv_inference(const IvData& data, const IvFitResult& fit, double null_value,
                             double level, std::optional<int> k) {
    const int n = static_cast<int>(data.y.size());
    const Eigen::VectorXd combined = data.z * fit.delta_hat;
    const Eigen::VectorXd series =
        combined.cwiseProduct(data.y - fit.beta_tilde * data.x);
    const int k_used = k.value_or(choose_K(n));
    const double v_m = series_hac(series, SeriesBasis{k_used});
    const double slope = combined.dot(data.x) / n;
    if (std::fabs(slope) < 1e-12) {
        throw WeakIdentificationError("iv_inference: moment slope in beta is degenerate");
    }
    return t_test(fit.beta_tilde, null_value, v_m / (slope * slope), n, k_used, level);
}

}  // namespace orthogmm
