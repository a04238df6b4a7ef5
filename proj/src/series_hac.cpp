#include "orthogmm/series_hac.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "orthogmm/distributions.hpp"
#include "orthogmm/errors.hpp"

namespace orthogmm {

double basis_value(int k, double x) {
    if (k < 1) throw ArgumentError("basis_value: k must be >= 1");
    if (x < 0.0 || x > 1.0) throw ArgumentError("basis_value: x must lie in [0,1]");
    const double arg = 2.0 * std::numbers::pi * x * static_cast<double>(k);
    const double root2 = std::numbers::sqrt2;
    return (k % 2 == 0) ? root2 * std::sin(arg) : root2 * std::cos(arg);
}

double series_hac(const Eigen::VectorXd& series, const SeriesBasis& basis) {
    const int n = static_cast<int>(series.size());
    if (basis.K < 1) throw ArgumentError("series_hac: K must be >= 1");
    if (n <= basis.K) {
        throw ArgumentError("series_hac: need n > K, got n = " + std::to_string(n) +
                            ", K = " + std::to_string(basis.K));
    }
    const Eigen::VectorXd centered = series.array() - series.mean();
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    double acc = 0.0;
    for (int k = 1; k <= basis.K; ++k) {
        double lambda = 0.0;
        for (int t = 0; t < n; ++t) {
            lambda += basis_value(k, static_cast<double>(t + 1) / n) * centered(t);
        }
        lambda /= sqrt_n;
        acc += lambda * lambda;
    }
    return acc / basis.K;
}

double sce_variance(const Eigen::MatrixXd& pre_series, const Eigen::VectorXd& post_series,
                    const EtaMatrix& eta, const SeriesBasis& basis) {
    const int t0 = static_cast<int>(pre_series.rows());
    const int t1 = static_cast<int>(post_series.size());
    if (basis.K < 1) throw ArgumentError("sce_variance: K must be >= 1");
    if (t0 <= basis.K || t1 <= basis.K) {
        throw ArgumentError("sce_variance: both blocks need more than K = " +
                            std::to_string(basis.K) + " periods (T0 = " +
                            std::to_string(t0) + ", T1 = " + std::to_string(t1) + ")");
    }
    if (eta.eta.rows() != 1 || eta.eta.cols() != pre_series.cols() + 1) {
        throw ArgumentError("sce_variance: eta must be 1 x (pre columns + 1)");
    }
    const Eigen::VectorXd eta_pre = eta.eta.row(0).head(pre_series.cols());
    const double eta_q = eta.eta(0, eta.eta.cols() - 1);
    if (eta_q == 0.0) throw ArgumentError("sce_variance: eta_Q must be nonzero");

    // eta-weighted, demeaned per-period contributions per block
    Eigen::VectorXd pre = pre_series * eta_pre;
    pre.array() -= pre.mean();
    Eigen::VectorXd post = post_series.array() - post_series.mean();

    const double n_eff = static_cast<double>(std::min(t0, t1));
    const double w_pre = std::sqrt(n_eff / t0);
    const double w_post = std::sqrt(n_eff / t1);
    const double sqrt_t0 = std::sqrt(static_cast<double>(t0));
    const double sqrt_t1 = std::sqrt(static_cast<double>(t1));

    double acc = 0.0;
    for (int k = 1; k <= basis.K; ++k) {
        double lambda = 0.0;
        for (int t = 0; t < t0; ++t) {
            lambda += w_pre * basis_value(k, static_cast<double>(t + 1) / t0) * pre(t) / sqrt_t0;
        }
        for (int t = 0; t < t1; ++t) {
            lambda += w_post * basis_value(k, static_cast<double>(t + 1) / t1) * eta_q *
                      post(t) / sqrt_t1;
        }
        acc += lambda * lambda;
    }
    return acc / basis.K / (eta_q * eta_q);
}

int choose_K(int n, int p) {
    if (n < 8) throw ArgumentError("choose_K: need n >= 8");
    const int k = static_cast<int>(std::lround(0.7 * std::pow(static_cast<double>(n), 2.0 / 3.0)));
    return std::clamp(k, p + 1, n - 2);
}

InferenceReport t_test(double beta_tilde, double null_value, double v_hat, int n_effective,
                       int K, double level) {
    if (!(v_hat > 0.0)) {
        throw DegenerateVarianceError("t_test: variance estimate is not positive");
    }
    if (K < 1) throw ArgumentError("t_test: K must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("t_test: level must be in (0,1)");

    InferenceReport report;
    report.beta_tilde = beta_tilde;
    report.v_hat = v_hat;
    report.v_m_hat = v_hat;
    report.K = K;
    report.n_effective = n_effective;
    report.null_value = null_value;
    report.level = level;
    const double se = std::sqrt(v_hat / n_effective);
    report.t_stat = (beta_tilde - null_value) / se;
    report.p_value = 2.0 * (1.0 - student_t_cdf(std::fabs(report.t_stat), K));
    const double t_crit = student_t_quantile(1.0 - level / 2.0, K);
    report.ci_low = beta_tilde - t_crit * se;
    report.ci_high = beta_tilde + t_crit * se;
    return report;
}

WaldResult wald_test(const Eigen::VectorXd& beta_tilde, const Eigen::VectorXd& null_value,
                     const Eigen::MatrixXd& v_hat, int n_effective, int K) {
    const int p = static_cast<int>(beta_tilde.size());
    if (null_value.size() != p || v_hat.rows() != p || v_hat.cols() != p) {
        throw ArgumentError("wald_test: dimension mismatch");
    }
    if (K < p) throw ArgumentError("wald_test: need K >= p");
    Eigen::LLT<Eigen::MatrixXd> llt(v_hat);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("wald_test: variance matrix is not positive definite");
    }
    const Eigen::VectorXd diff = beta_tilde - null_value;
    const double wn = n_effective * diff.dot(llt.solve(diff));
    WaldResult result;
    result.stat = static_cast<double>(K - p + 1) / (static_cast<double>(p) * K) * wn;
    result.p_value = 1.0 - f_cdf(result.stat, p, K - p + 1);
    return result;
}

}  // namespace orthogmm
