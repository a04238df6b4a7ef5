#pragma once

#include <Eigen/Dense>

#include "orthogmm/moments.hpp"

namespace orthogmm {

// Paired sine/cosine basis on [0,1]: phi_k(x) = sqrt(2) sin(2 pi x k) for even
// k and sqrt(2) cos(2 pi x k) for odd k. Orthonormal with zero mean, which is
// what the fixed-smoothing limit theory requires of the projection directions.
struct SeriesBasis {
    int K = 1;
};

struct InferenceReport {
    double beta_tilde = 0.0;
    double v_hat = 0.0;    // variance of the estimator (per effective obs)
    double v_m_hat = 0.0;  // variance of the orthogonalized moment
    int K = 0;
    double t_stat = 0.0;
    double p_value = 1.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int n_effective = 0;
    double null_value = 0.0;
    double level = 0.05;
};

// phi_k evaluated at x in [0,1]; k >= 1. phi_0 == 1 is not produced here.
double basis_value(int k, double x);

// Long-run variance of a scalar series: (1/K) sum_k Lambda_k^2 with
// Lambda_k = sum_t phi_k(t/n) (m_t - mbar) / sqrt(n). Demeans internally.
double series_hac(const Eigen::VectorXd& weighted_series, const SeriesBasis& basis);

// Two-block variance for the synthetic control moment series. pre_series has
// one column per beta-free moment, post_series is the single beta-dependent
// column; eta carries the orthogonalization weights with eta_Q = 1. Each k
// accumulates one Lambda_k across both blocks, so pre/post covariance enters
// through the shared projection index.
double sce_variance(const Eigen::MatrixXd& pre_series, const Eigen::VectorXd& post_series,
                    const EtaMatrix& eta, const SeriesBasis& basis);

// Smoothing parameter rule K = clamp(round(0.7 n^(2/3)), p+1, n-2). The 0.7
// constant stands in for the full coverage-optimal plug-in, whose inputs are
// not available here; callers can always override K.
int choose_K(int n, int p = 1);

InferenceReport t_test(double beta_tilde, double null_value, double v_hat, int n_effective,
                       int K, double level = 0.05);

struct WaldResult {
    double stat = 0.0;     // scaled statistic (K - p + 1) / (p K) * W_n
    double p_value = 1.0;  // from F_{p, K-p+1}
};

WaldResult wald_test(const Eigen::VectorXd& beta_tilde, const Eigen::VectorXd& null_value,
                     const Eigen::MatrixXd& v_hat, int n_effective, int K);

}  // namespace orthogmm
