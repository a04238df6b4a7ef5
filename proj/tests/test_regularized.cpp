#include <doctest.h>

#include <cmath>
#include <random>

#include "orthogmm/errors.hpp"
#include "orthogmm/regularized.hpp"
#include "orthogmm/sce.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace orthogmm;

namespace {

oracles::AffinePieces pieces_of(const MomentModel& model) {
    ParameterPoint origin;
    origin.beta = Eigen::VectorXd::Zero(1);
    origin.delta = Eigen::VectorXd::Zero(model.delta_dim());
    return {model.sample_moments(origin), model.beta_jacobian(origin).col(0),
            model.delta_jacobian(origin)};
}

}  // namespace

TEST_CASE("min feasible lambda_delta") {
    // exactly representable treated unit: zero
    Eigen::VectorXd weights(2);
    weights << 0.4, 0.6;
    const PanelData exact = fixtures::exact_combination_panel(weights, 10, 6, 2, 11);
    const SceMomentModel exact_model(exact);
    CHECK(min_feasible_lambda_delta(exact_model) < 1e-7);

    // J = 1 leaves no freedom: the value is the max beta-free coordinate
    const PanelData single = fixtures::random_panel(1, 8, 5, 2, 12);
    const SceMomentModel single_model(single);
    const oracles::AffinePieces single_pieces = pieces_of(single_model);
    double expected = 0.0;
    for (int q = 0; q + 1 < single_model.num_moments(); ++q) {
        expected = std::max(expected,
                            std::fabs(single_pieces.g0(q) + single_pieces.g_delta(q, 0)));
    }
    CHECK(min_feasible_lambda_delta(single_model) ==
          doctest::Approx(expected).epsilon(1e-7));

    // J = 3 fixture against the simplex grid
    const PanelData panel = fixtures::random_panel(3, 9, 5, 2, 13);
    const SceMomentModel model(panel);
    const double grid = oracles::min_feasible_lambda_grid(pieces_of(model), 1000);
    CHECK(std::fabs(min_feasible_lambda_delta(model) - grid) < 2e-3);
}

TEST_CASE("min feasible lambda_eta") {
    std::mt19937_64 rng(21);

    // last row in the span of the others: exact annihilation
    Eigen::MatrixXd jac = fixtures::random_matrix(4, 5, rng);
    Eigen::VectorXd combo(3);
    combo << 1.5, -0.5, 2.0;
    jac.row(3) = combo.transpose() * jac.topRows(3);
    CHECK(min_feasible_lambda_eta(jac) < 1e-7);

    // decoupled rows: eta_1 multiplies (1, 0), the fixed row contributes (0, 1)
    Eigen::MatrixXd decoupled(2, 2);
    decoupled << 1.0, 0.0, 0.0, 1.0;
    CHECK(min_feasible_lambda_eta(decoupled) == doctest::Approx(1.0).epsilon(1e-7));

    // random 4 x 6 against exact vertex enumeration of the minimax program
    const Eigen::MatrixXd wide = fixtures::random_matrix(4, 6, rng);
    CHECK(std::fabs(min_feasible_lambda_eta(wide) -
                    oracles::minimax_vertex_enumeration(wide)) < 1e-7);
}

TEST_CASE("select_tuning composes the min-feasible values with the log factor") {
    Eigen::VectorXd weights(2);
    weights << 0.5, 0.5;
    const PanelData exact = fixtures::exact_combination_panel(weights, 10, 6, 2, 31);
    const SceMomentModel exact_model(exact);
    const TuningParams floor_tuning = select_tuning(exact_model);
    CHECK(floor_tuning.lambda_delta == doctest::Approx(1e-10).epsilon(1e-6));
    CHECK(floor_tuning.auto_selected);

    const PanelData panel = fixtures::random_panel(3, 30, 16, 2, 32);
    const SceMomentModel model(panel);
    const TuningParams tuning = select_tuning(model);
    CHECK(tuning.multiplier == doctest::Approx(std::log(16.0)).epsilon(1e-12));
    const double grid = oracles::min_feasible_lambda_grid(pieces_of(model), 1000);
    CHECK(std::fabs(tuning.lambda_delta - grid * std::log(16.0)) < 2e-3 * std::log(16.0));
    CHECK(tuning.lambda_eta ==
          doctest::Approx(min_feasible_lambda_eta(model.delta_jacobian(
                              ParameterPoint::make(0.0, Eigen::VectorXd::Zero(3)))) *
                          std::log(16.0))
              .epsilon(1e-9));
}

TEST_CASE("solve_delta: symmetry, J = 1, and the nested grid oracle") {
    // two identical controls equal to the treated series: strict convexity
    // forces the symmetric split
    PanelData twin = fixtures::random_panel(2, 10, 6, 1, 41);
    twin.outcomes.row(2) = twin.outcomes.row(1);
    twin.outcomes.row(0) = twin.outcomes.row(1);
    const SceMomentModel twin_model(twin);
    const DeltaSolution twin_fit = solve_delta(twin_model, select_tuning(twin_model));
    CHECK(twin_fit.delta_hat(0) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(twin_fit.delta_hat(1) == doctest::Approx(0.5).epsilon(1e-7));

    const PanelData single = fixtures::random_panel(1, 8, 5, 1, 42);
    const SceMomentModel single_model(single);
    const DeltaSolution single_fit = solve_delta(single_model, select_tuning(single_model));
    CHECK(single_fit.delta_hat(0) == doctest::Approx(1.0).epsilon(1e-10));

    const PanelData panel = fixtures::random_panel(4, 12, 6, 2, 43);
    const SceMomentModel model(panel);
    const TuningParams tuning = select_tuning(model);
    const DeltaSolution fit = solve_delta(model, tuning);
    const Eigen::VectorXd reference = oracles::min_norm_simplex_grid(
        pieces_of(model), tuning.lambda_delta, 100, 3);
    REQUIRE(reference.size() == 4);
    CHECK((fit.delta_hat - reference).cwiseAbs().maxCoeff() < 1e-3);

    // beta_init zeroes the post-treatment coordinate at delta_hat
    ParameterPoint fitted;
    fitted.beta = Eigen::VectorXd::Constant(1, fit.beta_init);
    fitted.delta = fit.delta_hat;
    const Eigen::VectorXd ghat = model.sample_moments(fitted);
    CHECK(std::fabs(ghat(model.num_moments() - 1)) < 1e-12);
}

TEST_CASE("solve_delta infeasibility names the minimum feasible value") {
    const PanelData panel = fixtures::random_panel(3, 9, 5, 2, 44);
    const SceMomentModel model(panel);
    TuningParams tuning = select_tuning(model);
    tuning.lambda_delta = min_feasible_lambda_delta(model) * 0.5;
    CHECK_THROWS_AS(solve_delta(model, tuning), InfeasibleError);
    try {
        solve_delta(model, tuning);
    } catch (const InfeasibleError& e) {
        CHECK(std::string(e.what()).find("minimum feasible") != std::string::npos);
    }
}

TEST_CASE("solve_eta: trivial jacobian, symmetry, KKT oracle") {
    TuningParams tuning;
    tuning.lambda_eta = 0.5;

    const EtaSolution trivial = solve_eta(Eigen::MatrixXd::Zero(4, 3), tuning);
    CHECK(trivial.eta_hat.head(3).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(trivial.eta_hat(3) == 1.0);

    // identical instrument rows receive identical weights
    std::mt19937_64 rng(51);
    Eigen::MatrixXd jac = fixtures::random_matrix(4, 5, rng);
    jac.row(1) = jac.row(0);
    TuningParams sym_tuning;
    sym_tuning.lambda_eta = min_feasible_lambda_eta(jac) * 1.3 + 0.05;
    const EtaSolution sym = solve_eta(jac, sym_tuning);
    CHECK(sym.eta_hat(0) == doctest::Approx(sym.eta_hat(1)).epsilon(1e-7));

    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd random_jac = fixtures::random_matrix(4, 6, rng);
        TuningParams random_tuning;
        random_tuning.lambda_eta = min_feasible_lambda_eta(random_jac) * 1.5 + 0.02;
        const EtaSolution fit = solve_eta(random_jac, random_tuning);
        const Eigen::VectorXd reference =
            oracles::eta_kkt_enumeration(random_jac, random_tuning.lambda_eta);
        CHECK((fit.eta_hat - reference).cwiseAbs().maxCoeff() < 1e-6);
    }

    TuningParams too_small;
    too_small.lambda_eta = 1e-6;
    Eigen::MatrixXd hard = fixtures::random_matrix(3, 4, rng);
    CHECK_THROWS_AS(solve_eta(hard, too_small), InfeasibleError);
}

TEST_CASE("estimate_nuisance invariants") {
    const PanelData panel = fixtures::random_panel(4, 14, 8, 3, 61);
    const SceMomentModel model(panel);
    const TuningParams tuning = select_tuning(model);
    const NuisanceEstimate estimate = estimate_nuisance(model, tuning);

    // simplex membership and feasibility certificates
    CHECK(estimate.delta_hat.minCoeff() >= 0.0);
    CHECK(estimate.delta_hat.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(estimate.slack_delta <= tuning.lambda_delta + 1e-8);
    CHECK(estimate.slack_eta <= tuning.lambda_eta + 1e-8);
    CHECK(estimate.eta_hat(model.num_moments() - 1) == 1.0);
    CHECK(estimate.penalty_value ==
          doctest::Approx(estimate.delta_hat.squaredNorm() + estimate.eta_hat.squaredNorm())
              .epsilon(1e-10));

    // minimality of the penalty among random feasible points
    std::mt19937_64 rng(62);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const oracles::AffinePieces pieces = pieces_of(model);
    int tested = 0;
    while (tested < 100) {
        Eigen::VectorXd candidate(4);
        for (int i = 0; i < 4; ++i) candidate(i) = -std::log(uniform(rng));
        candidate /= candidate.sum();
        if (!oracles::beta_feasible(pieces, candidate, tuning.lambda_delta)) continue;
        ++tested;
        CHECK(candidate.squaredNorm() >= estimate.delta_hat.squaredNorm() - 1e-7);
    }
}

TEST_CASE("permutation equivariance of the delta stage") {
    const PanelData panel = fixtures::random_panel(4, 12, 7, 2, 71);
    PanelData permuted = panel;
    permuted.control_units = {panel.control_units[2], panel.control_units[0],
                              panel.control_units[3], panel.control_units[1]};

    const SceMomentModel model(panel);
    const SceMomentModel permuted_model(permuted);
    const TuningParams tuning = select_tuning(model);
    const NuisanceEstimate base = estimate_nuisance(model, tuning);
    const NuisanceEstimate moved = estimate_nuisance(permuted_model, tuning);

    CHECK(moved.delta_hat(1) == doctest::Approx(base.delta_hat(0)).epsilon(1e-9));
    CHECK(moved.delta_hat(3) == doctest::Approx(base.delta_hat(1)).epsilon(1e-9));
    CHECK(moved.delta_hat(0) == doctest::Approx(base.delta_hat(2)).epsilon(1e-9));
    CHECK(moved.delta_hat(2) == doctest::Approx(base.delta_hat(3)).epsilon(1e-9));
    CHECK(moved.penalty_value == doctest::Approx(base.penalty_value).epsilon(1e-9));
    CHECK(std::fabs(moved.slack_delta - base.slack_delta) < 1e-9);
    CHECK(std::fabs(moved.slack_eta - base.slack_eta) < 1e-9);
}

TEST_CASE("enlarging a bound never increases the corresponding penalty block") {
    const PanelData panel = fixtures::random_panel(3, 11, 6, 2, 81);
    const SceMomentModel model(panel);
    TuningParams tuning = select_tuning(model);

    double previous_delta_norm = std::numeric_limits<double>::infinity();
    for (double scale : {1.0, 2.0, 5.0, 20.0}) {
        TuningParams widened = tuning;
        widened.lambda_delta = tuning.lambda_delta * scale;
        const DeltaSolution fit = solve_delta(model, widened);
        const double norm = fit.delta_hat.squaredNorm();
        CHECK(norm <= previous_delta_norm + 1e-9);
        previous_delta_norm = norm;
    }

    const Eigen::MatrixXd jac =
        model.delta_jacobian(ParameterPoint::make(0.0, Eigen::VectorXd::Zero(3)));
    double previous_eta_norm = std::numeric_limits<double>::infinity();
    for (double scale : {1.0, 2.0, 5.0, 20.0}) {
        TuningParams widened = tuning;
        widened.lambda_eta = tuning.lambda_eta * scale;
        const EtaSolution fit = solve_eta(jac, widened);
        const double norm = fit.eta_hat.squaredNorm();
        CHECK(norm <= previous_eta_norm + 1e-9);
        previous_eta_norm = norm;
    }
}

TEST_CASE("degenerate inputs are argument errors") {
    PanelData panel = fixtures::random_panel(2, 8, 5, 1, 91);
    panel.control_units.clear();
    CHECK_THROWS_AS(SceMomentModel{panel}, ArgumentError);
}
