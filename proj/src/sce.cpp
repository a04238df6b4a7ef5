#include "orthogmm/sce.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "orthogmm/errors.hpp"
#include "orthogmm/gmm.hpp"

namespace orthogmm {

void PanelData::validate() const {
    const int units = num_units();
    const int periods = num_periods();
    if (static_cast<int>(unit_names.size()) != units) {
        throw ArgumentError("panel: unit_names size does not match outcome rows");
    }
    if (!period_labels.empty() && static_cast<int>(period_labels.size()) != periods) {
        throw ArgumentError("panel: period_labels size does not match outcome columns");
    }
    if (treated_unit < 0 || treated_unit >= units) {
        throw ArgumentError("panel: treated unit index out of range");
    }
    if (control_units.empty()) {
        throw ArgumentError("panel: at least one control unit is required");
    }
    std::set<int> seen{treated_unit};
    for (int idx : control_units) {
        if (idx < 0 || idx >= units) throw ArgumentError("panel: control index out of range");
        if (!seen.insert(idx).second) {
            throw ArgumentError("panel: unit '" + unit_names[idx] +
                                "' appears in more than one role");
        }
    }
    for (int idx : instrument_units) {
        if (idx < 0 || idx >= units) {
            throw ArgumentError("panel: instrument index out of range");
        }
        if (!seen.insert(idx).second) {
            throw ArgumentError("panel: unit '" + unit_names[idx] +
                                "' appears in more than one role");
        }
    }
    if (t0() < 2 || t1() < 2) {
        throw ArgumentError("panel: need at least two pre- and two post-treatment periods");
    }
    for (int idx : seen) {
        if (!outcomes.row(idx).allFinite()) {
            throw DataError("panel: unit '" + unit_names[idx] + "' has non-finite outcomes");
        }
    }
}

SceMomentModel::SceMomentModel(const PanelData& panel) {
    panel.validate();
    t0_ = panel.t0();
    t1_ = panel.t1();
    j_ = static_cast<int>(panel.control_units.size());
    const int n_inst = static_cast<int>(panel.instrument_units.size());
    q_ = n_inst + (panel.include_constant_instrument ? 1 : 0) + 1;

    const int periods = panel.num_periods();
    treated_ = panel.outcomes.row(panel.treated_unit).transpose();
    controls_.resize(j_, periods);
    control_names_.reserve(j_);
    for (int j = 0; j < j_; ++j) {
        controls_.row(j) = panel.outcomes.row(panel.control_units[j]);
        control_names_.push_back(panel.unit_names[panel.control_units[j]]);
    }
    instruments_.resize(q_ - 1, t0_);
    for (int q = 0; q < n_inst; ++q) {
        instruments_.row(q) = panel.outcomes.row(panel.instrument_units[q]).head(t0_);
        instrument_names_.push_back(panel.unit_names[panel.instrument_units[q]]);
    }
    if (panel.include_constant_instrument) {
        instruments_.row(q_ - 2).setOnes();
        instrument_names_.push_back("constant");
    }
}

std::vector<MomentBlock> SceMomentModel::blocks() const {
    return {{0, t0_}, {t0_, t1_}};
}

Eigen::VectorXd SceMomentModel::sample_moments(const ParameterPoint& point) const {
    check_point(point);
    Eigen::VectorXd ghat(q_);
    const Eigen::VectorXd gap =
        treated_ - controls_.transpose() * point.delta;  // length T0 + T1
    ghat.head(q_ - 1) = instruments_ * gap.head(t0_) / t0_;
    ghat(q_ - 1) = gap.tail(t1_).mean() - point.beta(0);
    return ghat;
}

Eigen::MatrixXd SceMomentModel::moment_series(const ParameterPoint& point) const {
    check_point(point);
    Eigen::MatrixXd series = Eigen::MatrixXd::Zero(t0_ + t1_, q_);
    const Eigen::VectorXd gap = treated_ - controls_.transpose() * point.delta;
    for (int t = 0; t < t0_; ++t) {
        series.row(t).head(q_ - 1) = instruments_.col(t).transpose() * gap(t);
    }
    for (int t = 0; t < t1_; ++t) {
        series(t0_ + t, q_ - 1) = gap(t0_ + t) - point.beta(0);
    }
    return series;
}

Eigen::MatrixXd SceMomentModel::delta_jacobian(const ParameterPoint& point) const {
    check_point(point);
    Eigen::MatrixXd jac(q_, j_);
    jac.topRows(q_ - 1) = -instruments_ * controls_.leftCols(t0_).transpose() / t0_;
    jac.row(q_ - 1) = -controls_.rightCols(t1_).rowwise().mean().transpose();
    return jac;
}

Eigen::MatrixXd SceMomentModel::beta_jacobian(const ParameterPoint& point) const {
    check_point(point);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(q_, 1);
    jac(q_ - 1, 0) = -1.0;
    return jac;
}

SceMomentModel build_moments(const PanelData& panel) { return SceMomentModel(panel); }

namespace {

// Rethrow numerical failures with the pipeline stage recorded.
template <typename Fn>
auto run_stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(std::string("fit_sce[") + name + "]: " + e.what(),
                              e.worst_constraint(), e.violation());
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(std::string("fit_sce[") + name + "]: " + e.what());
    } catch (const IdentificationError& e) {
        throw IdentificationError(std::string("fit_sce[") + name + "]: " + e.what());
    } catch (const DegenerateVarianceError& e) {
        throw DegenerateVarianceError(std::string("fit_sce[") + name + "]: " + e.what());
    }
}

}  // namespace

SceFit fit_sce(const PanelData& panel, const SceOverrides& overrides) {
    const SceMomentModel model(panel);

    TuningParams tuning = run_stage("tuning", [&] { return select_tuning(model); });
    if (overrides.lambda_delta) {
        tuning.lambda_delta = *overrides.lambda_delta;
        tuning.auto_selected = false;
    }
    if (overrides.lambda_eta) {
        tuning.lambda_eta = *overrides.lambda_eta;
        tuning.auto_selected = false;
    }

    NuisanceEstimate nuisance =
        run_stage("regularized", [&] { return estimate_nuisance(model, tuning); });

    const Eigen::VectorXd beta =
        run_stage("gmm", [&] { return gmm_estimate(model, nuisance); });

    ParameterPoint fitted;
    fitted.beta = beta;
    fitted.delta = nuisance.delta_hat;
    const Eigen::MatrixXd series = model.moment_series(fitted);
    const Eigen::MatrixXd pre = series.topRows(model.t0()).leftCols(model.num_moments() - 1);
    const Eigen::VectorXd post =
        series.bottomRows(model.t1()).col(model.num_moments() - 1);

    const int k = overrides.k ? *overrides.k : choose_K(model.t1());
    const double v_hat = run_stage("variance", [&] {
        return sce_variance(pre, post, EtaMatrix::row(nuisance.eta_hat), SeriesBasis{k});
    });
    if (v_hat < 1e-14) {
        throw DegenerateVarianceError(
            "fit_sce[variance]: estimated variance is numerically zero (" +
            std::to_string(v_hat) + "); the panel fits the treated unit exactly");
    }

    SceFit fit;
    fit.nuisance = nuisance;
    fit.beta_tilde = beta(0);
    fit.report = run_stage("test", [&] {
        return t_test(beta(0), overrides.null_value, v_hat,
                      static_cast<int>(model.effective_sample_size()), k, overrides.level);
    });
    const auto& control_names = model.control_names();
    for (int j = 0; j < model.delta_dim(); ++j) {
        fit.weights.emplace_back(control_names[j], nuisance.delta_hat(j));
    }
    const auto& inst_names = model.instrument_names();
    for (int q = 0; q + 1 < model.num_moments(); ++q) {
        fit.eta.emplace_back(inst_names[q], nuisance.eta_hat(q));
    }
    return fit;
}

}  // namespace orthogmm
