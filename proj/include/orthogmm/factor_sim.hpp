#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orthogmm/sce.hpp"

namespace orthogmm {

struct SvtResult {
    int rank = 1;
    bool degenerate = false;  // all-zero input, rank forced to 1
};

// Factor count: singular values of the column-demeaned block above 2.858x the
// median singular value, floored at 1.
SvtResult svt_rank(const Eigen::MatrixXd& panel_block);

struct PcaFit {
    Eigen::MatrixXd loadings;       // R x units
    Eigen::MatrixXd factor_series;  // T x R, unit sample variance columns
};

// Truncated SVD factorization, block ~= factor_series * loadings. Rotation
// indeterminacy is resolved by SVD ordering, unit-variance factor columns,
// and a positive first nonzero loading entry per factor.
PcaFit pca_fit(const Eigen::MatrixXd& panel_block, int r);

struct ArFit {
    int order = 0;
    double intercept = 0.0;
    Eigen::VectorXd coefficients;  // length order
    double innovation_variance = 0.0;
    bool stabilized = false;       // shrunk into the stationarity region
    bool constant_series = false;
};

// Conditional least squares over orders 0..max_order, AIC-selected.
ArFit fit_ar(const Eigen::VectorXd& series, int max_order);

struct FactorModelFit {
    int r = 1;
    Eigen::MatrixXd loadings;  // R x units; unit order: treated, controls, instruments
    std::vector<ArFit> factor_dynamics;
    Eigen::VectorXd shock_variances;  // per unit
    std::vector<std::string> unit_names;
    int treated_unit = 0;
    std::vector<int> control_units;
    std::vector<int> instrument_units;
    bool include_constant_instrument = true;
    bool degenerate_rank = false;

    int num_units() const { return static_cast<int>(loadings.cols()); }
    void validate() const;
};

// Fits the simulation DGP to a panel's pre-treatment block: SVT factor count,
// PCA loadings and factor series, AR dynamics per factor, and per-unit
// residual variances. Loadings stay fixed across simulation draws.
FactorModelFit calibrate(const PanelData& panel, int max_ar_order = 4);

struct SimConfig {
    int t0 = 30;
    int t1 = 16;
    Eigen::VectorXd effect;  // empty or length 1 (constant) or length t1
    int replications = 1000;
    std::uint64_t seed = 0;
    std::vector<double> levels = {0.05};
    int threads = 0;  // 0 = auto; ORTHO_THREADS caps either way
    std::optional<int> k_override;
    // Optional dimension echoes; when nonzero they must match the fit.
    int j = 0;
    int instrument_count = 0;

    void validate() const;
};

// One panel draw; deterministic in (seed, replication) through a dedicated
// counter-keyed stream, with the treatment effect added after all draws so
// paired simulations share noise exactly.
PanelData sample_panel(const FactorModelFit& fit, const SimConfig& config,
                       std::uint64_t replication);

struct ReplicationRecord {
    int replication = 0;
    bool ok = false;
    double beta_tilde = 0.0;
    double p_value = 1.0;
    double v_hat = 0.0;
    int k = 0;
    std::string error;
};

struct McResult {
    std::vector<double> levels;
    std::vector<double> rejection_rates;  // rejections / successes, per level
    std::vector<int> rejections;
    int replications = 0;
    int successes = 0;
    int failures = 0;
    bool failure_warning = false;  // more than 5% of replications failed
    double beta_mean = 0.0;
    double beta_sd = 0.0;
    double ad_stat = 0.0;  // Anderson-Darling statistic of the beta draws
    double ad_p = 1.0;
    std::vector<ReplicationRecord> records;
};

McResult run_monte_carlo(const FactorModelFit& fit, const SimConfig& config);

struct AdResult {
    double stat = 0.0;
    double p_value = 1.0;
};

// Anderson-Darling test against a normal with estimated mean and variance,
// with the usual small-sample adjustment and piecewise p-value approximation.
AdResult normality_check(const Eigen::VectorXd& samples);

// Size-adjusted power: reject at the alternative whenever the p-value falls
// below the null p-value's empirical level-quantile.
double size_adjusted_power(std::vector<double> null_pvalues,
                           const std::vector<double>& alt_pvalues, double level);

}  // namespace orthogmm
