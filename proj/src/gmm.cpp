#include "orthogmm/gmm.hpp"

#include <algorithm>
#include <cmath>

#include "orthogmm/errors.hpp"

namespace orthogmm {

namespace {

Eigen::MatrixXd weighting_matrix(const GmmOptions& opts, int m) {
    if (!opts.weighting) return Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd& w = *opts.weighting;
    if (w.rows() != m || w.cols() != m) {
        throw ArgumentError("gmm: weighting matrix must be m x m");
    }
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw ArgumentError("gmm: weighting matrix must be symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(w);
    if (llt.info() != Eigen::Success) {
        throw ArgumentError("gmm: weighting matrix must be positive definite");
    }
    return w;
}

Eigen::VectorXd orthogonal_moments_at(const MomentModel& model,
                                      const NuisanceEstimate& nuisance,
                                      const Eigen::VectorXd& beta) {
    ParameterPoint point;
    point.beta = beta;
    point.delta = nuisance.delta_hat;
    return nuisance.eta_hat.transpose() * model.sample_moments(point);
}

double objective(const MomentModel& model, const NuisanceEstimate& nuisance,
                 const Eigen::MatrixXd& w, double beta) {
    const Eigen::VectorXd m = orthogonal_moments_at(model, nuisance,
                                                    Eigen::VectorXd::Constant(1, beta));
    return m.dot(w * m);
}

// Golden-section bracket followed by Newton polish. Only exercised when the
// closed-form linear path does not apply.
double minimize_scalar(const MomentModel& model, const NuisanceEstimate& nuisance,
                       const Eigen::MatrixXd& w, const GmmOptions& opts) {
    double lo = std::isfinite(opts.beta_lower) ? opts.beta_lower : -1e6;
    double hi = std::isfinite(opts.beta_upper) ? opts.beta_upper : 1e6;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = objective(model, nuisance, w, c);
    double fd = objective(model, nuisance, w, d);
    for (int i = 0; i < 200 && (b - a) > opts.tolerance * (1.0 + std::fabs(a)); ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = objective(model, nuisance, w, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = objective(model, nuisance, w, d);
        }
    }
    double beta = 0.5 * (a + b);
    // Newton polish on the smooth objective
    const double h = 1e-6 * (1.0 + std::fabs(beta));
    for (int i = 0; i < 20; ++i) {
        const double f1 = objective(model, nuisance, w, beta + h);
        const double f0 = objective(model, nuisance, w, beta);
        const double f2 = objective(model, nuisance, w, beta - h);
        const double grad = (f1 - f2) / (2.0 * h);
        const double hess = (f1 - 2.0 * f0 + f2) / (h * h);
        if (hess <= 0.0) break;
        const double step = grad / hess;
        beta -= step;
        beta = std::clamp(beta, opts.beta_lower, opts.beta_upper);
        if (std::fabs(step) < opts.tolerance) break;
    }
    return beta;
}

}  // namespace

Eigen::VectorXd gmm_estimate(const MomentModel& model, const NuisanceEstimate& nuisance,
                             const GmmOptions& opts) {
    const int m = model.num_orthogonal();
    const int p = model.beta_dim();
    const Eigen::MatrixXd w = weighting_matrix(opts, m);

    if (model.constant_in_theta()) {
        // M(beta) = M(0) + (eta' Gb) beta; the weighted least-squares root.
        ParameterPoint origin;
        origin.beta = Eigen::VectorXd::Zero(p);
        origin.delta = nuisance.delta_hat;
        const Eigen::VectorXd m0 =
            nuisance.eta_hat.transpose() * model.sample_moments(origin);
        const Eigen::MatrixXd slope =
            nuisance.eta_hat.transpose() * model.beta_jacobian(origin);
        const Eigen::MatrixXd normal = slope.transpose() * w * slope;
        if (std::fabs(normal.determinant()) < 1e-14) {
            throw IdentificationError(
                "gmm_estimate: beta is not identified by the orthogonalized moments "
                "(eta' * beta-jacobian is singular)");
        }
        Eigen::VectorXd beta = normal.ldlt().solve(-slope.transpose() * w * m0);
        if (p == 1) beta(0) = std::clamp(beta(0), opts.beta_lower, opts.beta_upper);
        return beta;
    }

    if (p != 1) {
        throw ArgumentError("gmm_estimate: nonlinear search implemented for scalar beta only");
    }
    return Eigen::VectorXd::Constant(1, minimize_scalar(model, nuisance, w, opts));
}

Eigen::VectorXd one_step_estimate(const MomentModel& model, const Eigen::VectorXd& beta_gmm,
                                  const NuisanceEstimate& nuisance, const GmmOptions& opts) {
    const int m = model.num_orthogonal();
    const Eigen::MatrixXd w = weighting_matrix(opts, m);

    ParameterPoint point;
    point.beta = beta_gmm;
    point.delta = nuisance.delta_hat;
    const Eigen::VectorXd moments =
        nuisance.eta_hat.transpose() * model.sample_moments(point);
    const Eigen::MatrixXd slope = nuisance.eta_hat.transpose() * model.beta_jacobian(point);
    const Eigen::MatrixXd normal = slope.transpose() * w * slope;
    if (std::fabs(normal.determinant()) < 1e-14) {
        throw IdentificationError(
            "one_step_estimate: (d_beta M)' W (d_beta M) is singular");
    }
    return beta_gmm - normal.ldlt().solve(slope.transpose() * w * moments);
}

}  // namespace orthogmm
