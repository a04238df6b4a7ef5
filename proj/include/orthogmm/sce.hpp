#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "orthogmm/moments.hpp"
#include "orthogmm/regularized.hpp"
#include "orthogmm/series_hac.hpp"

namespace orthogmm {

// Balanced outcome panel with unit roles and a pre/post split. Outcomes are
// units x periods; treatment_start is the count of pre-treatment periods.
struct PanelData {
    Eigen::MatrixXd outcomes;
    std::vector<std::string> unit_names;
    std::vector<std::string> period_labels;  // optional; sized like columns when present
    int treated_unit = 0;
    std::vector<int> control_units;
    std::vector<int> instrument_units;
    bool include_constant_instrument = true;
    int treatment_start = 0;

    int num_units() const { return static_cast<int>(outcomes.rows()); }
    int num_periods() const { return static_cast<int>(outcomes.cols()); }
    int t0() const { return treatment_start; }
    int t1() const { return num_periods() - treatment_start; }

    void validate() const;
};

// Instrument-based moment model of the synthetic control estimator.
// Pre-treatment rows: Z_qt (Y_0t - Y_Jt' delta) for each instrument q (the
// constant instrument has Z == 1); post-treatment row: Y_0t - beta - Y_Jt' delta.
class SceMomentModel final : public MomentModel {
public:
    explicit SceMomentModel(const PanelData& panel);

    int num_moments() const override { return q_; }
    int num_orthogonal() const override { return 1; }
    int beta_dim() const override { return 1; }
    int delta_dim() const override { return j_; }
    double effective_sample_size() const override { return std::min(t0_, t1_); }
    std::vector<MomentBlock> blocks() const override;

    Eigen::VectorXd sample_moments(const ParameterPoint& point) const override;
    Eigen::MatrixXd moment_series(const ParameterPoint& point) const override;
    Eigen::MatrixXd delta_jacobian(const ParameterPoint& point) const override;
    Eigen::MatrixXd beta_jacobian(const ParameterPoint& point) const override;

    int t0() const { return t0_; }
    int t1() const { return t1_; }
    const std::vector<std::string>& instrument_names() const { return instrument_names_; }
    const std::vector<std::string>& control_names() const { return control_names_; }

private:
    int q_ = 0;
    int j_ = 0;
    int t0_ = 0;
    int t1_ = 0;
    Eigen::VectorXd treated_;      // length T0 + T1
    Eigen::MatrixXd controls_;     // J x (T0 + T1)
    Eigen::MatrixXd instruments_;  // (Q - 1) x T0, constant row included
    std::vector<std::string> instrument_names_;
    std::vector<std::string> control_names_;
};

SceMomentModel build_moments(const PanelData& panel);

struct SceOverrides {
    std::optional<double> lambda_delta;
    std::optional<double> lambda_eta;
    std::optional<int> k;
    double null_value = 0.0;
    double level = 0.05;
};

struct SceFit {
    NuisanceEstimate nuisance;
    double beta_tilde = 0.0;
    InferenceReport report;
    std::vector<std::pair<std::string, double>> weights;  // control name -> delta_hat
    std::vector<std::pair<std::string, double>> eta;      // instrument name -> eta_hat
};

// Full pipeline: tuning selection, penalized delta and eta stages, GMM point
// estimate, series variance with K chosen from the post-block length, and the
// t test against the requested null.
SceFit fit_sce(const PanelData& panel, const SceOverrides& overrides = {});

}  // namespace orthogmm
