#pragma once

#include <Eigen/Dense>
#include <random>

#include "orthogmm/sce.hpp"

namespace fixtures {

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng,
                                     double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = gauss(rng);
    }
    return m;
}

inline Eigen::VectorXd random_vector(int size, std::mt19937_64& rng, double scale = 1.0) {
    return random_matrix(size, 1, rng, scale).col(0);
}

// Panel with unit 0 treated, units 1..J controls, then n_inst instruments.
// Outcomes carry a weak common factor so instruments are relevant.
inline orthogmm::PanelData random_panel(int j, int t0, int t1, int n_inst,
                                        std::uint64_t seed, double noise = 1.0) {
    std::mt19937_64 rng(seed);
    const int units = 1 + j + n_inst;
    const int periods = t0 + t1;
    orthogmm::PanelData panel;
    const Eigen::VectorXd factor = random_vector(periods, rng);
    const Eigen::VectorXd loadings = random_vector(units, rng).cwiseAbs();
    panel.outcomes = loadings * factor.transpose() +
                     random_matrix(units, periods, rng, noise);
    for (int u = 0; u < units; ++u) {
        panel.unit_names.push_back("u" + std::to_string(u));
    }
    panel.treated_unit = 0;
    for (int c = 1; c <= j; ++c) panel.control_units.push_back(c);
    for (int q = 0; q < n_inst; ++q) panel.instrument_units.push_back(1 + j + q);
    panel.include_constant_instrument = true;
    panel.treatment_start = t0;
    return panel;
}

// Panel whose treated unit is an exact convex combination of the controls,
// plus an optional constant post-treatment effect and optional noise on the
// treated series.
inline orthogmm::PanelData exact_combination_panel(const Eigen::VectorXd& weights, int t0,
                                                   int t1, int n_inst, std::uint64_t seed,
                                                   double effect = 0.0,
                                                   double treated_noise = 0.0) {
    std::mt19937_64 rng(seed);
    const int j = static_cast<int>(weights.size());
    const int units = 1 + j + n_inst;
    const int periods = t0 + t1;
    orthogmm::PanelData panel;
    panel.outcomes.resize(units, periods);
    const Eigen::VectorXd factor = random_vector(periods, rng);
    for (int c = 0; c < j; ++c) {
        panel.outcomes.row(1 + c) =
            (0.5 * factor + random_vector(periods, rng)).transpose();
    }
    for (int q = 0; q < n_inst; ++q) {
        panel.outcomes.row(1 + j + q) =
            (0.5 * factor + random_vector(periods, rng)).transpose();
    }
    panel.outcomes.row(0) = weights.transpose() * panel.outcomes.middleRows(1, j);
    if (treated_noise > 0.0) {
        panel.outcomes.row(0) += random_vector(periods, rng, treated_noise).transpose();
    }
    panel.outcomes.row(0).tail(t1).array() += effect;
    for (int u = 0; u < units; ++u) {
        panel.unit_names.push_back("u" + std::to_string(u));
    }
    panel.treated_unit = 0;
    for (int c = 1; c <= j; ++c) panel.control_units.push_back(c);
    for (int q = 0; q < n_inst; ++q) panel.instrument_units.push_back(1 + j + q);
    panel.include_constant_instrument = true;
    panel.treatment_start = t0;
    return panel;
}

}  // namespace fixtures
