#include "orthogmm/panel_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "orthogmm/errors.hpp"

namespace orthogmm {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream stream(line);
    while (std::getline(stream, cell, ',')) {
        // trim surrounding whitespace
        const auto begin = cell.find_first_not_of(" \t\r");
        const auto end = cell.find_last_not_of(" \t\r");
        cells.push_back(begin == std::string::npos ? std::string()
                                                   : cell.substr(begin, end - begin + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, int row, const std::string& column,
                  const std::string& origin) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || cell.empty()) {
        throw DataError(origin + ": non-numeric cell at row " + std::to_string(row) +
                        ", column '" + column + "' (value '" + cell + "')");
    }
    return value;
}

std::string format_double(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

json read_json_file(const std::string& path) {
    std::ifstream input(path);
    if (!input) throw DataError("cannot open '" + path + "'");
    json doc;
    try {
        input >> doc;
    } catch (const json::parse_error& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
    return doc;
}

}  // namespace

RolesConfig parse_roles(const json& doc) {
    RolesConfig roles;
    try {
        roles.treated = doc.at("treated").get<std::string>();
        roles.controls = doc.at("controls").get<std::vector<std::string>>();
        roles.instruments =
            doc.value("instruments", std::vector<std::string>{});
        roles.include_constant = doc.value("include_constant", true);
        roles.treatment_start = doc.at("treatment_start").is_string()
                                    ? doc.at("treatment_start").get<std::string>()
                                    : doc.at("treatment_start").dump();
        roles.null_value = doc.value("null_value", 0.0);
        roles.level = doc.value("level", 0.05);
        if (doc.contains("k")) roles.k = doc.at("k").get<int>();
        if (doc.contains("lambda_delta")) {
            roles.lambda_delta = doc.at("lambda_delta").get<double>();
        }
        if (doc.contains("lambda_eta")) roles.lambda_eta = doc.at("lambda_eta").get<double>();
    } catch (const json::exception& e) {
        throw DataError(std::string("roles config: ") + e.what());
    }
    return roles;
}

RolesConfig load_roles(const std::string& path) { return parse_roles(read_json_file(path)); }

json roles_to_json(const RolesConfig& roles) {
    json doc;
    doc["treated"] = roles.treated;
    doc["controls"] = roles.controls;
    doc["instruments"] = roles.instruments;
    doc["include_constant"] = roles.include_constant;
    doc["treatment_start"] = roles.treatment_start;
    doc["null_value"] = roles.null_value;
    doc["level"] = roles.level;
    if (roles.k) doc["k"] = *roles.k;
    if (roles.lambda_delta) doc["lambda_delta"] = *roles.lambda_delta;
    if (roles.lambda_eta) doc["lambda_eta"] = *roles.lambda_eta;
    return doc;
}

PanelData read_panel_csv(std::istream& input, const RolesConfig& roles,
                         const std::string& origin) {
    std::string line;
    if (!std::getline(input, line)) throw DataError(origin + ": empty file");
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2) {
        throw DataError(origin + ": header must have a period column and at least one unit");
    }
    std::map<std::string, int> unit_index;
    for (size_t c = 1; c < header.size(); ++c) {
        if (header[c].empty()) throw DataError(origin + ": empty unit name in header");
        if (!unit_index.emplace(header[c], static_cast<int>(c - 1)).second) {
            throw DataError(origin + ": duplicate unit '" + header[c] + "' in header");
        }
    }
    const int units = static_cast<int>(header.size() - 1);

    std::vector<std::string> period_labels;
    std::vector<std::vector<double>> rows;
    int row_number = 1;
    while (std::getline(input, line)) {
        ++row_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != units + 1) {
            throw DataError(origin + ": row " + std::to_string(row_number) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(units + 1));
        }
        period_labels.push_back(cells[0]);
        std::vector<double> values(units);
        for (int c = 0; c < units; ++c) {
            values[c] = parse_cell(cells[c + 1], row_number, header[c + 1], origin);
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw DataError(origin + ": no data rows");

    PanelData panel;
    const int periods = static_cast<int>(rows.size());
    panel.outcomes.resize(units, periods);
    for (int t = 0; t < periods; ++t) {
        for (int u = 0; u < units; ++u) panel.outcomes(u, t) = rows[t][u];
    }
    panel.period_labels = period_labels;
    panel.unit_names.assign(header.begin() + 1, header.end());

    const auto resolve = [&](const std::string& name) {
        const auto it = unit_index.find(name);
        if (it == unit_index.end()) {
            throw DataError(origin + ": unit '" + name + "' not found in the CSV header");
        }
        return it->second;
    };
    panel.treated_unit = resolve(roles.treated);
    for (const std::string& name : roles.controls) {
        panel.control_units.push_back(resolve(name));
    }
    for (const std::string& name : roles.instruments) {
        panel.instrument_units.push_back(resolve(name));
    }
    panel.include_constant_instrument = roles.include_constant;

    int start = -1;
    for (int t = 0; t < periods; ++t) {
        if (period_labels[t] == roles.treatment_start) {
            start = t;
            break;
        }
    }
    if (start < 0) {
        throw DataError(origin + ": treatment_start label '" + roles.treatment_start +
                        "' does not match any period");
    }
    panel.treatment_start = start;
    panel.validate();
    return panel;
}

PanelData load_panel(const std::string& csv_path, const RolesConfig& roles) {
    std::ifstream input(csv_path);
    if (!input) throw DataError("cannot open '" + csv_path + "'");
    return read_panel_csv(input, roles, csv_path);
}

void save_panel(std::ostream& output, const PanelData& panel) {
    output << "period";
    for (const std::string& name : panel.unit_names) output << ',' << name;
    output << '\n';
    for (int t = 0; t < panel.num_periods(); ++t) {
        output << (panel.period_labels.empty() ? std::to_string(t + 1)
                                               : panel.period_labels[t]);
        for (int u = 0; u < panel.num_units(); ++u) {
            output << ',' << format_double(panel.outcomes(u, t));
        }
        output << '\n';
    }
}

void save_panel(const std::string& csv_path, const PanelData& panel) {
    std::ofstream output(csv_path);
    if (!output) throw DataError("cannot open '" + csv_path + "' for writing");
    save_panel(output, panel);
}

IvData read_iv_csv(std::istream& input, const std::string& origin) {
    std::string line;
    if (!std::getline(input, line)) throw DataError(origin + ": empty file");
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "y" || header[1] != "x") {
        throw DataError(origin + ": header must be y,x,z1,...,zJ");
    }
    const int j = static_cast<int>(header.size() - 2);

    std::vector<std::vector<double>> rows;
    int row_number = 1;
    while (std::getline(input, line)) {
        ++row_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError(origin + ": row " + std::to_string(row_number) +
                            " has the wrong number of cells");
        }
        std::vector<double> values(header.size());
        for (size_t c = 0; c < cells.size(); ++c) {
            values[c] = parse_cell(cells[c], row_number, header[c], origin);
        }
        rows.push_back(std::move(values));
    }

    IvData data;
    const int n = static_cast<int>(rows.size());
    data.y.resize(n);
    data.x.resize(n);
    data.z.resize(n, j);
    for (int i = 0; i < n; ++i) {
        data.y(i) = rows[i][0];
        data.x(i) = rows[i][1];
        for (int c = 0; c < j; ++c) data.z(i, c) = rows[i][c + 2];
    }
    data.validate();
    return data;
}

IvData load_iv_csv(const std::string& csv_path) {
    std::ifstream input(csv_path);
    if (!input) throw DataError("cannot open '" + csv_path + "'");
    return read_iv_csv(input, csv_path);
}

json factor_model_to_json(const FactorModelFit& fit) {
    json doc;
    doc["version"] = kVersion;
    doc["factors"] = fit.r;
    doc["unit_names"] = fit.unit_names;
    doc["treated_unit"] = fit.treated_unit;
    doc["control_units"] = fit.control_units;
    doc["instrument_units"] = fit.instrument_units;
    doc["include_constant_instrument"] = fit.include_constant_instrument;
    doc["degenerate_rank"] = fit.degenerate_rank;
    json loadings = json::array();
    for (int r = 0; r < fit.r; ++r) {
        json row = json::array();
        for (int u = 0; u < fit.num_units(); ++u) row.push_back(fit.loadings(r, u));
        loadings.push_back(std::move(row));
    }
    doc["loadings"] = std::move(loadings);
    json dynamics = json::array();
    for (const ArFit& ar : fit.factor_dynamics) {
        json entry;
        entry["order"] = ar.order;
        entry["intercept"] = ar.intercept;
        entry["coefficients"] =
            std::vector<double>(ar.coefficients.data(), ar.coefficients.data() + ar.order);
        entry["innovation_variance"] = ar.innovation_variance;
        entry["stabilized"] = ar.stabilized;
        entry["constant_series"] = ar.constant_series;
        dynamics.push_back(std::move(entry));
    }
    doc["factor_dynamics"] = std::move(dynamics);
    doc["shock_variances"] = std::vector<double>(
        fit.shock_variances.data(), fit.shock_variances.data() + fit.shock_variances.size());
    return doc;
}

FactorModelFit factor_model_from_json(const json& doc) {
    FactorModelFit fit;
    try {
        fit.r = doc.at("factors").get<int>();
        fit.unit_names = doc.at("unit_names").get<std::vector<std::string>>();
        fit.treated_unit = doc.at("treated_unit").get<int>();
        fit.control_units = doc.at("control_units").get<std::vector<int>>();
        fit.instrument_units = doc.at("instrument_units").get<std::vector<int>>();
        fit.include_constant_instrument = doc.value("include_constant_instrument", true);
        fit.degenerate_rank = doc.value("degenerate_rank", false);
        const auto loadings = doc.at("loadings").get<std::vector<std::vector<double>>>();
        const int units = static_cast<int>(fit.unit_names.size());
        fit.loadings.resize(fit.r, units);
        for (int r = 0; r < fit.r; ++r) {
            if (static_cast<int>(loadings.at(r).size()) != units) {
                throw DataError("factor model: loading row size mismatch");
            }
            for (int u = 0; u < units; ++u) fit.loadings(r, u) = loadings[r][u];
        }
        for (const json& entry : doc.at("factor_dynamics")) {
            ArFit ar;
            ar.order = entry.at("order").get<int>();
            ar.intercept = entry.at("intercept").get<double>();
            const auto coeffs = entry.at("coefficients").get<std::vector<double>>();
            ar.coefficients =
                Eigen::Map<const Eigen::VectorXd>(coeffs.data(), coeffs.size());
            ar.innovation_variance = entry.at("innovation_variance").get<double>();
            ar.stabilized = entry.value("stabilized", false);
            ar.constant_series = entry.value("constant_series", false);
            fit.factor_dynamics.push_back(std::move(ar));
        }
        const auto variances = doc.at("shock_variances").get<std::vector<double>>();
        fit.shock_variances =
            Eigen::Map<const Eigen::VectorXd>(variances.data(), variances.size());
    } catch (const json::exception& e) {
        throw DataError(std::string("factor model JSON: ") + e.what());
    }
    fit.validate();
    return fit;
}

json sim_config_to_json(const SimConfig& config) {
    json doc;
    doc["t0"] = config.t0;
    doc["t1"] = config.t1;
    if (config.effect.size() == 1) {
        doc["effect"] = config.effect(0);
    } else if (config.effect.size() > 1) {
        doc["effect"] = std::vector<double>(config.effect.data(),
                                            config.effect.data() + config.effect.size());
    } else {
        doc["effect"] = 0.0;
    }
    doc["replications"] = config.replications;
    doc["seed"] = config.seed;
    doc["levels"] = config.levels;
    doc["threads"] = config.threads;
    if (config.k_override) doc["k"] = *config.k_override;
    if (config.j != 0) doc["j"] = config.j;
    if (config.instrument_count != 0) doc["instrument_count"] = config.instrument_count;
    return doc;
}

SimConfig sim_config_from_json(const json& doc) {
    SimConfig config;
    try {
        config.t0 = doc.at("t0").get<int>();
        config.t1 = doc.at("t1").get<int>();
        if (doc.contains("effect")) {
            if (doc.at("effect").is_array()) {
                const auto effect = doc.at("effect").get<std::vector<double>>();
                config.effect =
                    Eigen::Map<const Eigen::VectorXd>(effect.data(), effect.size());
            } else {
                config.effect = Eigen::VectorXd::Constant(1, doc.at("effect").get<double>());
            }
        }
        config.replications = doc.value("replications", 1000);
        config.seed = doc.value("seed", std::uint64_t{0});
        config.levels = doc.value("levels", std::vector<double>{0.05});
        config.threads = doc.value("threads", 0);
        if (doc.contains("k")) config.k_override = doc.at("k").get<int>();
        config.j = doc.value("j", 0);
        config.instrument_count = doc.value("instrument_count", 0);
    } catch (const json::exception& e) {
        throw DataError(std::string("sim config JSON: ") + e.what());
    }
    config.validate();
    return config;
}

json sce_fit_to_json(const SceFit& fit, const RolesConfig& roles) {
    json doc;
    doc["version"] = kVersion;
    doc["beta_tilde"] = fit.beta_tilde;
    doc["beta_init"] = fit.nuisance.beta_init;
    doc["t_stat"] = fit.report.t_stat;
    doc["p_value"] = fit.report.p_value;
    doc["v_hat"] = fit.report.v_hat;
    doc["k"] = fit.report.K;
    doc["ci_low"] = fit.report.ci_low;
    doc["ci_high"] = fit.report.ci_high;
    doc["n_effective"] = fit.report.n_effective;
    doc["null_value"] = fit.report.null_value;
    doc["level"] = fit.report.level;
    json weights;
    for (const auto& [name, value] : fit.weights) weights[name] = value;
    doc["weights"] = std::move(weights);
    json eta;
    for (const auto& [name, value] : fit.eta) eta[name] = value;
    doc["eta"] = std::move(eta);
    doc["lambda_delta"] = fit.nuisance.tuning.lambda_delta;
    doc["lambda_eta"] = fit.nuisance.tuning.lambda_eta;
    doc["tuning_multiplier"] = fit.nuisance.tuning.multiplier;
    doc["tuning_auto"] = fit.nuisance.tuning.auto_selected;
    doc["penalty_value"] = fit.nuisance.penalty_value;
    doc["slack_delta"] = fit.nuisance.slack_delta;
    doc["slack_eta"] = fit.nuisance.slack_eta;
    doc["config"] = roles_to_json(roles);
    return doc;
}

json mc_result_to_json(const McResult& result, bool with_records) {
    json doc;
    doc["version"] = kVersion;
    doc["levels"] = result.levels;
    doc["rejection_rates"] = result.rejection_rates;
    doc["rejections"] = result.rejections;
    doc["replications"] = result.replications;
    doc["successes"] = result.successes;
    doc["failures"] = result.failures;
    doc["failure_warning"] = result.failure_warning;
    doc["beta_mean"] = result.beta_mean;
    doc["beta_sd"] = result.beta_sd;
    doc["ad_stat"] = result.ad_stat;
    doc["ad_p"] = result.ad_p;
    if (with_records) {
        json records = json::array();
        for (const ReplicationRecord& record : result.records) {
            json entry;
            entry["replication"] = record.replication;
            entry["ok"] = record.ok;
            if (record.ok) {
                entry["beta_tilde"] = record.beta_tilde;
                entry["p_value"] = record.p_value;
                entry["v_hat"] = record.v_hat;
                entry["k"] = record.k;
            } else {
                entry["error"] = record.error;
            }
            records.push_back(std::move(entry));
        }
        doc["records"] = std::move(records);
    }
    return doc;
}

}  // namespace orthogmm
