#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "orthogmm/factor_sim.hpp"
#include "orthogmm/iv.hpp"
#include "orthogmm/sce.hpp"

namespace orthogmm {

inline constexpr const char* kVersion = "0.1.0";

// Unit roles and test options, parsed from a JSON file.
struct RolesConfig {
    std::string treated;
    std::vector<std::string> controls;
    std::vector<std::string> instruments;
    bool include_constant = true;
    std::string treatment_start;  // period label of the first post period
    double null_value = 0.0;
    double level = 0.05;
    std::optional<int> k;
    std::optional<double> lambda_delta;
    std::optional<double> lambda_eta;
};

RolesConfig parse_roles(const nlohmann::json& doc);
RolesConfig load_roles(const std::string& path);
nlohmann::json roles_to_json(const RolesConfig& roles);

// Wide CSV: first column is the period label, remaining columns are units.
PanelData load_panel(const std::string& csv_path, const RolesConfig& roles);
PanelData read_panel_csv(std::istream& input, const RolesConfig& roles,
                         const std::string& origin);
void save_panel(std::ostream& output, const PanelData& panel);
void save_panel(const std::string& csv_path, const PanelData& panel);

// y, x, z1..zJ columns with a header row.
IvData load_iv_csv(const std::string& csv_path);
IvData read_iv_csv(std::istream& input, const std::string& origin);

nlohmann::json factor_model_to_json(const FactorModelFit& fit);
FactorModelFit factor_model_from_json(const nlohmann::json& doc);

nlohmann::json sim_config_to_json(const SimConfig& config);
SimConfig sim_config_from_json(const nlohmann::json& doc);

nlohmann::json sce_fit_to_json(const SceFit& fit, const RolesConfig& roles);
nlohmann::json mc_result_to_json(const McResult& result, bool with_records);

}  // namespace orthogmm
