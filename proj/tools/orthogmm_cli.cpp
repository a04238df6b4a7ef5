#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "orthogmm/errors.hpp"
#include "orthogmm/factor_sim.hpp"
#include "orthogmm/iv.hpp"
#include "orthogmm/panel_io.hpp"
#include "orthogmm/sce.hpp"

namespace {

using nlohmann::json;
using namespace orthogmm;

void emit(const json& doc, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << doc.dump(2) << '\n';
        return;
    }
    std::ofstream output(out_path);
    if (!output) throw DataError("cannot open '" + out_path + "' for writing");
    output << doc.dump(2) << '\n';
}

std::string format_rate(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

struct FitArgs {
    std::string panel_path;
    std::string roles_path;
    std::optional<int> k;
    std::optional<double> lambda_delta;
    std::optional<double> lambda_eta;
    std::optional<double> null_value;
    std::optional<double> level;
    std::string out_path;
};

int run_fit(const FitArgs& args, bool require_null) {
    RolesConfig roles = load_roles(args.roles_path);
    if (args.k) roles.k = args.k;
    if (args.lambda_delta) roles.lambda_delta = args.lambda_delta;
    if (args.lambda_eta) roles.lambda_eta = args.lambda_eta;
    if (args.null_value) roles.null_value = *args.null_value;
    if (args.level) roles.level = *args.level;
    if (require_null && !args.null_value) {
        throw ArgumentError("test: --null is required");
    }

    const PanelData panel = load_panel(args.panel_path, roles);
    SceOverrides overrides;
    overrides.k = roles.k;
    overrides.lambda_delta = roles.lambda_delta;
    overrides.lambda_eta = roles.lambda_eta;
    overrides.null_value = roles.null_value;
    overrides.level = roles.level;
    const SceFit fit = fit_sce(panel, overrides);
    emit(sce_fit_to_json(fit, roles), args.out_path);
    return 0;
}

int run_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& records_path) {
    std::ifstream input(config_path);
    if (!input) throw DataError("cannot open '" + config_path + "'");
    json doc;
    try {
        input >> doc;
    } catch (const json::parse_error& e) {
        throw DataError("'" + config_path + "' is not valid JSON: " + e.what());
    }
    if (!doc.contains("model")) {
        throw DataError("simulate config must carry a 'model' entry (path or object)");
    }
    FactorModelFit model;
    if (doc.at("model").is_string()) {
        std::ifstream model_input(doc.at("model").get<std::string>());
        if (!model_input) {
            throw DataError("cannot open model file '" +
                            doc.at("model").get<std::string>() + "'");
        }
        json model_doc;
        model_input >> model_doc;
        model = factor_model_from_json(model_doc);
    } else {
        model = factor_model_from_json(doc.at("model"));
    }

    const SimConfig base = sim_config_from_json(doc);
    std::vector<std::pair<int, int>> grid;
    if (doc.contains("grid")) {
        for (const json& entry : doc.at("grid")) {
            grid.emplace_back(entry.at(0).get<int>(), entry.at(1).get<int>());
        }
    } else {
        grid.emplace_back(base.t0, base.t1);
    }

    std::ostringstream table;
    table << "t0,t1";
    for (double level : base.levels) table << ",level_" << level;
    table << ",successes,failures,beta_mean,beta_sd,ad_p\n";

    json all_records = json::array();
    for (const auto& [t0, t1] : grid) {
        SimConfig config = base;
        config.t0 = t0;
        config.t1 = t1;
        const McResult result = run_monte_carlo(model, config);
        table << t0 << ',' << t1;
        for (double rate : result.rejection_rates) table << ',' << format_rate(rate);
        table << ',' << result.successes << ',' << result.failures << ','
              << format_rate(result.beta_mean) << ',' << format_rate(result.beta_sd) << ','
              << format_rate(result.ad_p) << '\n';
        if (!records_path.empty()) {
            json block = mc_result_to_json(result, true);
            block["t0"] = t0;
            block["t1"] = t1;
            block["config"] = sim_config_to_json(config);
            all_records.push_back(std::move(block));
        }
    }

    if (out_path.empty()) {
        std::cout << table.str();
    } else {
        std::ofstream output(out_path);
        if (!output) throw DataError("cannot open '" + out_path + "' for writing");
        output << table.str();
    }
    if (!records_path.empty()) {
        json doc_records;
        doc_records["version"] = kVersion;
        doc_records["runs"] = std::move(all_records);
        emit(doc_records, records_path);
    }
    return 0;
}

int run_calibrate(const std::string& panel_path, const std::string& roles_path, int max_ar,
                  const std::string& out_path) {
    const RolesConfig roles = load_roles(roles_path);
    const PanelData panel = load_panel(panel_path, roles);
    const FactorModelFit fit = calibrate(panel, max_ar);
    emit(factor_model_to_json(fit), out_path);
    return 0;
}

int run_iv_fit(const std::string& data_path, std::optional<double> l1,
               std::optional<double> lambda_delta, const std::string& out_path) {
    IvData data = load_iv_csv(data_path);
    if (l1) data.l1_bound = l1;
    const IvFitResult fit = fit_iv(data, lambda_delta);
    const InferenceReport report = iv_inference(data, fit);

    json doc;
    doc["version"] = kVersion;
    doc["beta_tilde"] = fit.beta_tilde;
    doc["delta_hat"] = std::vector<double>(fit.delta_hat.data(),
                                           fit.delta_hat.data() + fit.delta_hat.size());
    doc["lambda_delta"] = fit.lambda_delta;
    doc["iterations"] = fit.iterations;
    doc["converged"] = fit.converged;
    doc["exclusion_residual"] = fit.exclusion_residual;
    doc["two_stage_ls"] = two_stage_ls(data);
    doc["t_stat"] = report.t_stat;
    doc["p_value"] = report.p_value;
    doc["v_hat"] = report.v_hat;
    doc["k"] = report.K;
    json config;
    config["data"] = data_path;
    if (l1) config["l1"] = *l1;
    if (lambda_delta) config["lambda_delta"] = *lambda_delta;
    doc["config"] = std::move(config);
    emit(doc, out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Orthogonalized GMM estimation with regularized nuisance weights: "
                 "synthetic control and many-instruments IV estimators with "
                 "fixed-smoothing series-variance inference"};
    app.require_subcommand(1);

    FitArgs fit_args;
    double null_in = 0.0, level_in = 0.0, lambda_delta_in = 0.0, lambda_eta_in = 0.0;
    int k_in = 0;

    const auto add_fit_flags = [&](CLI::App* cmd) {
        cmd->add_option("--panel", fit_args.panel_path, "wide CSV: period column + unit columns")
            ->required();
        cmd->add_option("--roles", fit_args.roles_path, "roles JSON")->required();
        cmd->add_option("--k", k_in, "smoothing parameter override")
            ->each([&](const std::string&) { fit_args.k = k_in; });
        cmd->add_option("--lambda-delta", lambda_delta_in, "delta-stage tuning override")
            ->each([&](const std::string&) { fit_args.lambda_delta = lambda_delta_in; });
        cmd->add_option("--lambda-eta", lambda_eta_in, "eta-stage tuning override")
            ->each([&](const std::string&) { fit_args.lambda_eta = lambda_eta_in; });
        cmd->add_option("--null", null_in, "null value for the ATT test")
            ->each([&](const std::string&) { fit_args.null_value = null_in; });
        cmd->add_option("--level", level_in, "test level")
            ->each([&](const std::string&) { fit_args.level = level_in; });
        cmd->add_option("--out", fit_args.out_path, "output JSON path (stdout when absent)");
    };

    CLI::App* fit_cmd = app.add_subcommand("fit", "fit the synthetic control estimator");
    add_fit_flags(fit_cmd);
    CLI::App* test_cmd =
        app.add_subcommand("test", "fit and test the ATT against a required null");
    add_fit_flags(test_cmd);

    std::string sim_config_path, sim_out_path, sim_records_path;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo study");
    sim_cmd->add_option("--config", sim_config_path, "simulation config JSON")->required();
    sim_cmd->add_option("--out", sim_out_path, "output CSV path (stdout when absent)");
    sim_cmd->add_option("--records", sim_records_path, "per-replication records JSON path");

    std::string cal_panel_path, cal_roles_path, cal_out_path;
    int cal_max_ar = 4;
    CLI::App* cal_cmd = app.add_subcommand("calibrate", "fit the factor-model DGP to a panel");
    cal_cmd->add_option("--panel", cal_panel_path, "wide CSV panel")->required();
    cal_cmd->add_option("--roles", cal_roles_path, "roles JSON")->required();
    cal_cmd->add_option("--max-ar", cal_max_ar, "maximum AR order per factor");
    cal_cmd->add_option("--out", cal_out_path, "output JSON path (stdout when absent)");

    std::string iv_data_path, iv_out_path;
    double iv_l1_in = 0.0, iv_lambda_in = 0.0;
    std::optional<double> iv_l1, iv_lambda;
    CLI::App* iv_cmd = app.add_subcommand("iv-fit", "many-instruments IV estimator");
    iv_cmd->add_option("--data", iv_data_path, "CSV with y,x,z1..zJ columns")->required();
    iv_cmd->add_option("--l1", iv_l1_in, "L1 bound on the instrument weights")
        ->each([&](const std::string&) { iv_l1 = iv_l1_in; });
    iv_cmd->add_option("--lambda-delta", iv_lambda_in, "exclusion band override")
        ->each([&](const std::string&) { iv_lambda = iv_lambda_in; });
    iv_cmd->add_option("--out", iv_out_path, "output JSON path (stdout when absent)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (fit_cmd->parsed()) return run_fit(fit_args, false);
        if (test_cmd->parsed()) return run_fit(fit_args, true);
        if (sim_cmd->parsed()) {
            return run_simulate(sim_config_path, sim_out_path, sim_records_path);
        }
        if (cal_cmd->parsed()) {
            return run_calibrate(cal_panel_path, cal_roles_path, cal_max_ar, cal_out_path);
        }
        if (iv_cmd->parsed()) {
            return run_iv_fit(iv_data_path, iv_l1, iv_lambda, iv_out_path);
        }
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
