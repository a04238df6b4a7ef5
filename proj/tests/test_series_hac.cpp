#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "orthogmm/distributions.hpp"
#include "orthogmm/errors.hpp"
#include "orthogmm/series_hac.hpp"
#include "oracles.hpp"

using namespace orthogmm;

TEST_CASE("basis values and orthonormality") {
    CHECK(basis_value(1, 0.0) == doctest::Approx(std::numbers::sqrt2).epsilon(1e-15));
    CHECK(basis_value(2, 0.25) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(basis_value(0, 0.5), ArgumentError);
    CHECK_THROWS_AS(basis_value(1, 1.5), ArgumentError);

    for (int k = 1; k <= 6; ++k) {
        const double mean = oracles::trapezoid01([&](double x) { return basis_value(k, x); },
                                                 10000);
        CHECK(std::fabs(mean) < 1e-6);
        for (int l = 1; l <= 6; ++l) {
            const double inner = oracles::trapezoid01(
                [&](double x) { return basis_value(k, x) * basis_value(l, x); }, 10000);
            CHECK(std::fabs(inner - (k == l ? 1.0 : 0.0)) < 1e-6);
        }
    }
}

TEST_CASE("series_hac equals the double-sum form") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> gauss;

    Eigen::VectorXd series(12);
    for (int i = 0; i < 12; ++i) series(i) = gauss(rng);
    CHECK(std::fabs(series_hac(series, SeriesBasis{3}) -
                    oracles::hac_double_sum(series, 3)) < 1e-12);

    std::uniform_int_distribution<int> n_dist(9, 50);
    std::uniform_int_distribution<int> k_dist(1, 8);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = n_dist(rng);
        const int k = std::min(k_dist(rng), n - 1);
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x(i) = gauss(rng);
        const double fast = series_hac(x, SeriesBasis{k});
        CHECK(fast >= 0.0);
        CHECK(std::fabs(fast - oracles::hac_double_sum(x, k)) < 1e-11);
    }
}

TEST_CASE("series_hac edge behavior") {
    CHECK(series_hac(Eigen::VectorXd::Constant(20, 3.7), SeriesBasis{4}) ==
          doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(series_hac(Eigen::VectorXd::Zero(4), SeriesBasis{4}), ArgumentError);

    // adding a constant leaves the estimate unchanged
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd x(30);
    for (int i = 0; i < 30; ++i) x(i) = gauss(rng);
    const double base = series_hac(x, SeriesBasis{4});
    CHECK(std::fabs(series_hac(x.array() + 12.5, SeriesBasis{4}) - base) < 1e-12);

    // a pure basis series behaves like the double-sum form says it should
    const int n = 200;
    Eigen::VectorXd pure(n);
    for (int t = 0; t < n; ++t) pure(t) = basis_value(1, static_cast<double>(t + 1) / n);
    CHECK(std::fabs(series_hac(pure, SeriesBasis{3}) - oracles::hac_double_sum(pure, 3)) <
          1e-11);
}

TEST_CASE("sce_variance block structure") {
    const int t0 = 20, t1 = 10, k = 2;
    std::mt19937_64 rng(23);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd pre(t0, 3);
    Eigen::VectorXd post(t1);
    for (int t = 0; t < t0; ++t) {
        for (int c = 0; c < 3; ++c) pre(t, c) = gauss(rng);
    }
    for (int t = 0; t < t1; ++t) post(t) = gauss(rng);
    Eigen::VectorXd eta(4);
    eta << 0.4, -1.2, 0.7, 1.0;

    const double value = sce_variance(pre, post, EtaMatrix::row(eta), SeriesBasis{k});
    const double reference =
        oracles::sce_variance_reference(pre, eta.head(3), post, k);
    CHECK(value >= 0.0);
    CHECK(std::fabs(value - reference) < 1e-12);

    // selector eta and constant post block
    Eigen::VectorXd selector = Eigen::VectorXd::Zero(4);
    selector(3) = 1.0;
    CHECK(sce_variance(pre, Eigen::VectorXd::Constant(t1, 2.0), EtaMatrix::row(selector),
                       SeriesBasis{k}) == doctest::Approx(0.0).epsilon(1e-15));

    // zero pre block reduces to the rescaled single-block estimator
    const double reduced = sce_variance(Eigen::MatrixXd::Zero(t0, 3), post,
                                        EtaMatrix::row(eta), SeriesBasis{k});
    const double single = series_hac(post, SeriesBasis{k}) *
                          (static_cast<double>(std::min(t0, t1)) / t1);
    CHECK(std::fabs(reduced - single) < 1e-12);

    CHECK_THROWS_AS(sce_variance(pre.topRows(2), post, EtaMatrix::row(eta), SeriesBasis{2}),
                    ArgumentError);
}

TEST_CASE("choose_K rule") {
    CHECK(choose_K(16) == 4);
    CHECK(choose_K(8) == 3);
    CHECK(choose_K(1000) == 70);
    CHECK_THROWS_AS(choose_K(7), ArgumentError);
}

TEST_CASE("t_test report") {
    const InferenceReport at_null = t_test(0.3, 0.3, 2.0, 25, 4);
    CHECK(at_null.t_stat == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(at_null.p_value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(at_null.ci_low < 0.3);
    CHECK(at_null.ci_high > 0.3);
    CHECK(0.5 * (at_null.ci_low + at_null.ci_high) == doctest::Approx(0.3).epsilon(1e-12));

    // t = 2.7764 is the 97.5% point of t_4
    const double se2 = 1.0;
    const double beta = 2.7764 * std::sqrt(se2 / 100.0);
    const InferenceReport crit = t_test(beta, 0.0, se2, 100, 4);
    CHECK(crit.p_value == doctest::Approx(0.05).epsilon(1e-3));

    // large K approaches the normal limit
    const InferenceReport wide = t_test(1.96, 0.0, 100.0 * 1.0, 100, 200);
    CHECK(wide.t_stat == doctest::Approx(1.96).epsilon(1e-12));
    CHECK(wide.p_value == doctest::Approx(0.0512).epsilon(1e-2));
    CHECK(wide.p_value > 0.05);

    CHECK_THROWS_AS(t_test(1.0, 0.0, 0.0, 25, 4), DegenerateVarianceError);
}

TEST_CASE("wald test matches the t test at p = 1 and the F oracle at p = 2") {
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.8);
    const Eigen::VectorXd null = Eigen::VectorXd::Zero(1);
    const Eigen::MatrixXd v = Eigen::MatrixXd::Constant(1, 1, 2.3);
    const int n = 49, k = 6;
    const WaldResult wald = wald_test(beta, null, v, n, k);
    const InferenceReport t_report = t_test(0.8, 0.0, 2.3, n, k);
    CHECK(std::fabs(wald.p_value - t_report.p_value) < 1e-10);
    CHECK(wald.stat == doctest::Approx(t_report.t_stat * t_report.t_stat).epsilon(1e-12));

    const WaldResult zero = wald_test(null, null, v, n, k);
    CHECK(zero.stat == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(zero.p_value == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::VectorXd beta2(2);
    beta2 << 0.4, -0.2;
    Eigen::MatrixXd v2(2, 2);
    v2 << 1.0, 0.3, 0.3, 2.0;
    const WaldResult two = wald_test(beta2, Eigen::VectorXd::Zero(2), v2, 36, 6);
    // scaled statistic follows F_{2, 5}
    const double expected_p = 1.0 - f_cdf(two.stat, 2, 5);
    CHECK(std::fabs(two.p_value - expected_p) < 1e-8);
    CHECK_THROWS_AS(wald_test(beta2, Eigen::VectorXd::Zero(2), v2, 36, 1), ArgumentError);
}
