#pragma once

#include <Eigen/Dense>
#include <optional>

#include "orthogmm/moments.hpp"

namespace orthogmm {

// Feasible region for the nuisance weights delta.
struct DeltaDomain {
    enum class Kind { Simplex, Free, L1Ball };
    Kind kind = Kind::Simplex;
    double l1_bound = 0.0;  // only for L1Ball

    static DeltaDomain simplex() { return {Kind::Simplex, 0.0}; }
    static DeltaDomain free() { return {Kind::Free, 0.0}; }
    static DeltaDomain l1_ball(double bound) { return {Kind::L1Ball, bound}; }
};

struct TuningParams {
    double lambda_delta = 0.0;
    double lambda_eta = 0.0;
    double multiplier = 1.0;
    bool auto_selected = false;
};

struct SolverDiagnostics {
    int iterations = 0;
    double kkt_residual = 0.0;
};

struct NuisanceEstimate {
    double beta_init = 0.0;
    Eigen::VectorXd delta_hat;
    Eigen::VectorXd eta_hat;  // length Q, last entry 1
    double penalty_value = 0.0;
    double slack_delta = 0.0;  // ||ghat(beta_init, delta_hat)||_inf
    double slack_eta = 0.0;    // ||eta_hat' * delta_jacobian||_inf
    TuningParams tuning;
    SolverDiagnostics delta_diagnostics;
    SolverDiagnostics eta_diagnostics;
};

// Smallest lambda_delta for which some (beta, delta in domain) keeps every
// sample moment within lambda_delta. Solved as a linear program with an
// epigraph variable bounding |ghat_q|.
double min_feasible_lambda_delta(const MomentModel& model,
                                 const DeltaDomain& domain = DeltaDomain::simplex());

// Smallest lambda_eta for which some eta with eta_Q = 1 keeps every entry of
// eta * jac within lambda_eta.
double min_feasible_lambda_eta(const Eigen::MatrixXd& jac);

// lambda = max(min-feasible * max(1, log(n_effective)), 1e-10); the log factor
// keeps the feasible set nonempty with probability approaching one while the
// bounds still shrink at the rate the asymptotics need.
TuningParams select_tuning(const MomentModel& model,
                           const DeltaDomain& domain = DeltaDomain::simplex());

struct DeltaSolution {
    double beta_init = 0.0;
    Eigen::VectorXd delta_hat;
    SolverDiagnostics diagnostics;
};

// argmin ||delta||^2 over delta in the simplex with |ghat_q(beta, delta)| <=
// lambda_delta for every q and beta free. beta_init is the value zeroing the
// beta-dependent coordinates at delta_hat.
DeltaSolution solve_delta(const MomentModel& model, const TuningParams& tuning,
                          const DeltaDomain& domain = DeltaDomain::simplex());

struct EtaSolution {
    Eigen::VectorXd eta_hat;  // length Q, last entry exactly 1
    SolverDiagnostics diagnostics;
};

// argmin ||eta||^2 over eta_Q = 1 with ||eta * jac||_inf <= lambda_eta.
EtaSolution solve_eta(const Eigen::MatrixXd& jac, const TuningParams& tuning);

// Full regularized stage: solve_delta, then solve_eta at the fitted point,
// with slacks and the penalty value recorded.
NuisanceEstimate estimate_nuisance(const MomentModel& model, const TuningParams& tuning,
                                   const DeltaDomain& domain = DeltaDomain::simplex());

}  // namespace orthogmm
