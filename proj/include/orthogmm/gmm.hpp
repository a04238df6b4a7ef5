#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>

#include "orthogmm/moments.hpp"
#include "orthogmm/regularized.hpp"

namespace orthogmm {

struct GmmOptions {
    // Empty means identity weighting; otherwise a symmetric PD m x m matrix.
    std::optional<Eigen::MatrixXd> weighting;
    double beta_lower = -std::numeric_limits<double>::infinity();
    double beta_upper = std::numeric_limits<double>::infinity();
    double tolerance = 1e-10;
};

// Minimizes M(beta)' W M(beta) with M(beta) = eta * ghat(beta, delta_hat).
// For the shipped linear models with m = p = 1 this is the closed-form root of
// the single orthogonalized moment; a bracketed search plus Newton polish
// covers the general path.
Eigen::VectorXd gmm_estimate(const MomentModel& model, const NuisanceEstimate& nuisance,
                             const GmmOptions& opts = {});

// Newton-style one-step update from beta_gmm; identical to beta_gmm whenever
// beta is unconstrained and the model is linear.
Eigen::VectorXd one_step_estimate(const MomentModel& model, const Eigen::VectorXd& beta_gmm,
                                  const NuisanceEstimate& nuisance, const GmmOptions& opts = {});

}  // namespace orthogmm
