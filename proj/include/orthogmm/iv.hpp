#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "orthogmm/moments.hpp"
#include "orthogmm/series_hac.hpp"

namespace orthogmm {

struct IvData {
    Eigen::VectorXd y;
    Eigen::VectorXd x;
    Eigen::MatrixXd z;  // n x J
    std::optional<double> l1_bound;

    void validate() const;
};

// Single moment (1/n) sum (Z_i delta)(Y_i - X_i beta). Bilinear in (beta,
// delta): linear in each argument separately but not jointly, so Jacobians
// depend on the evaluation point and constant_in_theta is false.
class IvMomentModel final : public MomentModel {
public:
    explicit IvMomentModel(const IvData& data);

    int num_moments() const override { return 1; }
    int num_orthogonal() const override { return 1; }
    int beta_dim() const override { return 1; }
    int delta_dim() const override { return j_; }
    double effective_sample_size() const override { return static_cast<double>(n_); }
    std::vector<MomentBlock> blocks() const override { return {{0, n_}}; }

    Eigen::VectorXd sample_moments(const ParameterPoint& point) const override;
    Eigen::MatrixXd moment_series(const ParameterPoint& point) const override;
    Eigen::MatrixXd delta_jacobian(const ParameterPoint& point) const override;
    Eigen::MatrixXd beta_jacobian(const ParameterPoint& point) const override;
    bool constant_in_theta() const override { return false; }

private:
    int n_ = 0;
    int j_ = 0;
    Eigen::VectorXd y_;
    Eigen::VectorXd x_;
    Eigen::MatrixXd z_;
};

struct IvFitResult {
    Eigen::VectorXd delta_hat;
    double beta_tilde = 0.0;
    double lambda_delta = 0.0;
    int iterations = 0;
    bool converged = false;
    // Objective ||A(beta) delta - b||^2 before and after each delta step, at
    // that step's beta; the after value never exceeds the before value.
    std::vector<std::pair<double, double>> objective_trace;
    double exclusion_residual = 0.0;  // |ghat(beta_tilde, delta_hat)|
};

// Alternating fit: the delta step targets the moment-characterized optimal
// combination A(beta) delta = b with the exclusion restriction as constraint,
// the beta step is the exact ratio given the combined instrument Z delta.
IvFitResult fit_iv(const IvData& data, std::optional<double> lambda_delta = std::nullopt);

// Classical two-stage least squares with all instruments; comparison baseline.
double two_stage_ls(const IvData& data);

// t test for the fitted coefficient using a series long-run variance of the
// fitted moment contributions. Secondary to the synthetic control pipeline.
InferenceReport iv_inference(const IvData& data, const IvFitResult& fit,
                             double null_value = 0.0, double level = 0.05,
                             std::optional<int> k = std::nullopt);

}  // namespace orthogmm
