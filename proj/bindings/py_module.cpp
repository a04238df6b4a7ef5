#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "orthogmm/distributions.hpp"
#include "orthogmm/errors.hpp"
#include "orthogmm/factor_sim.hpp"
#include "orthogmm/gmm.hpp"
#include "orthogmm/iv.hpp"
#include "orthogmm/panel_io.hpp"
#include "orthogmm/qp.hpp"
#include "orthogmm/regularized.hpp"
#include "orthogmm/sce.hpp"
#include "orthogmm/series_hac.hpp"

namespace py = pybind11;
using namespace orthogmm;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Orthogonalized GMM with regularized nuisance weights: synthetic "
              "control and many-instruments IV estimators with fixed-smoothing "
              "series-variance inference";

    py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    static py::exception<NumericalError> numerical_error(m, "NumericalError");
    py::register_exception<InfeasibleError>(m, "InfeasibleError", numerical_error.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", numerical_error.ptr());
    py::register_exception<IdentificationError>(m, "IdentificationError",
                                                numerical_error.ptr());
    py::register_exception<DegenerateVarianceError>(m, "DegenerateVarianceError",
                                                    numerical_error.ptr());
    py::register_exception<WeakIdentificationError>(m, "WeakIdentificationError",
                                                    numerical_error.ptr());

    py::class_<PanelData>(m, "PanelData")
        .def(py::init<>())
        .def_readwrite("outcomes", &PanelData::outcomes)
        .def_readwrite("unit_names", &PanelData::unit_names)
        .def_readwrite("period_labels", &PanelData::period_labels)
        .def_readwrite("treated_unit", &PanelData::treated_unit)
        .def_readwrite("control_units", &PanelData::control_units)
        .def_readwrite("instrument_units", &PanelData::instrument_units)
        .def_readwrite("include_constant_instrument",
                       &PanelData::include_constant_instrument)
        .def_readwrite("treatment_start", &PanelData::treatment_start)
        .def("t0", &PanelData::t0)
        .def("t1", &PanelData::t1)
        .def("validate", &PanelData::validate);

    py::class_<TuningParams>(m, "TuningParams")
        .def(py::init<>())
        .def_readwrite("lambda_delta", &TuningParams::lambda_delta)
        .def_readwrite("lambda_eta", &TuningParams::lambda_eta)
        .def_readonly("multiplier", &TuningParams::multiplier)
        .def_readonly("auto_selected", &TuningParams::auto_selected);

    py::class_<NuisanceEstimate>(m, "NuisanceEstimate")
        .def_readonly("beta_init", &NuisanceEstimate::beta_init)
        .def_readonly("delta_hat", &NuisanceEstimate::delta_hat)
        .def_readonly("eta_hat", &NuisanceEstimate::eta_hat)
        .def_readonly("penalty_value", &NuisanceEstimate::penalty_value)
        .def_readonly("slack_delta", &NuisanceEstimate::slack_delta)
        .def_readonly("slack_eta", &NuisanceEstimate::slack_eta)
        .def_readonly("tuning", &NuisanceEstimate::tuning);

    py::class_<InferenceReport>(m, "InferenceReport")
        .def_readonly("beta_tilde", &InferenceReport::beta_tilde)
        .def_readonly("v_hat", &InferenceReport::v_hat)
        .def_readonly("K", &InferenceReport::K)
        .def_readonly("t_stat", &InferenceReport::t_stat)
        .def_readonly("p_value", &InferenceReport::p_value)
        .def_readonly("ci_low", &InferenceReport::ci_low)
        .def_readonly("ci_high", &InferenceReport::ci_high)
        .def_readonly("n_effective", &InferenceReport::n_effective)
        .def_readonly("null_value", &InferenceReport::null_value)
        .def_readonly("level", &InferenceReport::level);

    py::class_<SceFit>(m, "SceFit")
        .def_readonly("nuisance", &SceFit::nuisance)
        .def_readonly("beta_tilde", &SceFit::beta_tilde)
        .def_readonly("report", &SceFit::report)
        .def_readonly("weights", &SceFit::weights)
        .def_readonly("eta", &SceFit::eta);

    m.def(
        "fit_sce",
        [](const PanelData& panel, std::optional<double> lambda_delta,
           std::optional<double> lambda_eta, std::optional<int> k, double null_value,
           double level) {
            SceOverrides overrides;
            overrides.lambda_delta = lambda_delta;
            overrides.lambda_eta = lambda_eta;
            overrides.k = k;
            overrides.null_value = null_value;
            overrides.level = level;
            return fit_sce(panel, overrides);
        },
        py::arg("panel"), py::arg("lambda_delta") = std::nullopt,
        py::arg("lambda_eta") = std::nullopt, py::arg("k") = std::nullopt,
        py::arg("null_value") = 0.0, py::arg("level") = 0.05,
        "Full synthetic-control pipeline: tuning, regularized nuisance fit, GMM "
        "estimate, series variance, t test.");

    m.def("load_panel", &load_panel, py::arg("csv_path"), py::arg("roles"));
    py::class_<RolesConfig>(m, "RolesConfig")
        .def(py::init<>())
        .def_readwrite("treated", &RolesConfig::treated)
        .def_readwrite("controls", &RolesConfig::controls)
        .def_readwrite("instruments", &RolesConfig::instruments)
        .def_readwrite("include_constant", &RolesConfig::include_constant)
        .def_readwrite("treatment_start", &RolesConfig::treatment_start)
        .def_readwrite("null_value", &RolesConfig::null_value)
        .def_readwrite("level", &RolesConfig::level);

    // series variance and test machinery
    m.def("basis_value", &basis_value, py::arg("k"), py::arg("x"));
    m.def(
        "series_hac",
        [](const Eigen::VectorXd& series, int k) {
            return series_hac(series, SeriesBasis{k});
        },
        py::arg("series"), py::arg("k"));
    m.def(
        "sce_variance",
        [](const Eigen::MatrixXd& pre, const Eigen::VectorXd& post,
           const Eigen::VectorXd& eta, int k) {
            return sce_variance(pre, post, EtaMatrix::row(eta), SeriesBasis{k});
        },
        py::arg("pre_series"), py::arg("post_series"), py::arg("eta"), py::arg("k"));
    m.def("choose_k", &choose_K, py::arg("n"), py::arg("p") = 1);
    m.def("t_test", &t_test, py::arg("beta_tilde"), py::arg("null_value"), py::arg("v_hat"),
          py::arg("n_effective"), py::arg("k"), py::arg("level") = 0.05);
    m.def("student_t_cdf", &student_t_cdf, py::arg("x"), py::arg("dof"));
    m.def("f_cdf", &f_cdf, py::arg("x"), py::arg("d1"), py::arg("d2"));

    // factor-model simulation
    py::class_<ArFit>(m, "ArFit")
        .def_readonly("order", &ArFit::order)
        .def_readonly("intercept", &ArFit::intercept)
        .def_readonly("coefficients", &ArFit::coefficients)
        .def_readonly("innovation_variance", &ArFit::innovation_variance)
        .def_readonly("stabilized", &ArFit::stabilized)
        .def_readonly("constant_series", &ArFit::constant_series);

    py::class_<FactorModelFit>(m, "FactorModelFit")
        .def(py::init<>())
        .def_readwrite("r", &FactorModelFit::r)
        .def_readwrite("loadings", &FactorModelFit::loadings)
        .def_readwrite("shock_variances", &FactorModelFit::shock_variances)
        .def_readonly("factor_dynamics", &FactorModelFit::factor_dynamics)
        .def_readwrite("unit_names", &FactorModelFit::unit_names)
        .def_readwrite("treated_unit", &FactorModelFit::treated_unit)
        .def_readwrite("control_units", &FactorModelFit::control_units)
        .def_readwrite("instrument_units", &FactorModelFit::instrument_units)
        .def_readwrite("include_constant_instrument",
                       &FactorModelFit::include_constant_instrument);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("t0", &SimConfig::t0)
        .def_readwrite("t1", &SimConfig::t1)
        .def_readwrite("effect", &SimConfig::effect)
        .def_readwrite("replications", &SimConfig::replications)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("levels", &SimConfig::levels)
        .def_readwrite("threads", &SimConfig::threads);

    py::class_<ReplicationRecord>(m, "ReplicationRecord")
        .def_readonly("replication", &ReplicationRecord::replication)
        .def_readonly("ok", &ReplicationRecord::ok)
        .def_readonly("beta_tilde", &ReplicationRecord::beta_tilde)
        .def_readonly("p_value", &ReplicationRecord::p_value)
        .def_readonly("error", &ReplicationRecord::error);

    py::class_<McResult>(m, "McResult")
        .def_readonly("levels", &McResult::levels)
        .def_readonly("rejection_rates", &McResult::rejection_rates)
        .def_readonly("replications", &McResult::replications)
        .def_readonly("successes", &McResult::successes)
        .def_readonly("failures", &McResult::failures)
        .def_readonly("failure_warning", &McResult::failure_warning)
        .def_readonly("beta_mean", &McResult::beta_mean)
        .def_readonly("beta_sd", &McResult::beta_sd)
        .def_readonly("ad_stat", &McResult::ad_stat)
        .def_readonly("ad_p", &McResult::ad_p)
        .def_readonly("records", &McResult::records);

    m.def(
        "svt_rank",
        [](const Eigen::MatrixXd& block) {
            const SvtResult result = svt_rank(block);
            return py::make_tuple(result.rank, result.degenerate);
        },
        py::arg("panel_block"), "Returns (rank, degenerate_flag).");
    m.def(
        "pca_fit",
        [](const Eigen::MatrixXd& block, int r) {
            const PcaFit fit = pca_fit(block, r);
            return py::make_tuple(fit.loadings, fit.factor_series);
        },
        py::arg("panel_block"), py::arg("r"), "Returns (loadings, factor_series).");
    m.def("fit_ar", &fit_ar, py::arg("series"), py::arg("max_order"));
    m.def("calibrate", &calibrate, py::arg("panel"), py::arg("max_ar_order") = 4);
    m.def("sample_panel", &sample_panel, py::arg("fit"), py::arg("config"),
          py::arg("replication"));
    m.def("run_monte_carlo", &run_monte_carlo, py::arg("fit"), py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def(
        "normality_check",
        [](const Eigen::VectorXd& samples) {
            const AdResult result = normality_check(samples);
            return py::make_tuple(result.stat, result.p_value);
        },
        py::arg("samples"), "Returns (ad_stat, approx_p).");

    // many-instruments IV
    py::class_<IvFitResult>(m, "IvFitResult")
        .def_readonly("delta_hat", &IvFitResult::delta_hat)
        .def_readonly("beta_tilde", &IvFitResult::beta_tilde)
        .def_readonly("lambda_delta", &IvFitResult::lambda_delta)
        .def_readonly("iterations", &IvFitResult::iterations)
        .def_readonly("converged", &IvFitResult::converged)
        .def_readonly("exclusion_residual", &IvFitResult::exclusion_residual);

    m.def(
        "fit_iv",
        [](const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Eigen::MatrixXd& z,
           std::optional<double> lambda_delta, std::optional<double> l1_bound) {
            IvData data{y, x, z, l1_bound};
            return fit_iv(data, lambda_delta);
        },
        py::arg("y"), py::arg("x"), py::arg("z"), py::arg("lambda_delta") = std::nullopt,
        py::arg("l1_bound") = std::nullopt);
    m.def(
        "two_stage_ls",
        [](const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Eigen::MatrixXd& z) {
            IvData data{y, x, z, std::nullopt};
            return two_stage_ls(data);
        },
        py::arg("y"), py::arg("x"), py::arg("z"));

    m.attr("__version__") = kVersion;
}
