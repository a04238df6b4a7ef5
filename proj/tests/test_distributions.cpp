#include <doctest.h>

#include <cmath>
#include <numbers>

#include "orthogmm/distributions.hpp"
#include "orthogmm/errors.hpp"
#include "oracles.hpp"

using namespace orthogmm;

namespace {

double t_density(double x, double dof) {
    const double c = std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0) -
                     0.5 * std::log(dof * std::numbers::pi);
    return std::exp(c - (dof + 1.0) / 2.0 * std::log1p(x * x / dof));
}

// Simpson quadrature of the t density from 0 to x.
double t_cdf_quadrature(double x, double dof) {
    const int n = 20000;  // even
    const double h = x / n;
    double acc = t_density(0.0, dof) + t_density(x, dof);
    for (int i = 1; i < n; ++i) {
        acc += (i % 2 == 1 ? 4.0 : 2.0) * t_density(i * h, dof);
    }
    return 0.5 + acc * h / 3.0;
}

double f_density(double x, double d1, double d2) {
    const double c = std::lgamma((d1 + d2) / 2.0) - std::lgamma(d1 / 2.0) -
                     std::lgamma(d2 / 2.0) + (d1 / 2.0) * std::log(d1 / d2);
    return std::exp(c + (d1 / 2.0 - 1.0) * std::log(x) -
                    (d1 + d2) / 2.0 * std::log1p(d1 * x / d2));
}

// Substituting t = u^2 removes the d1 = 1 endpoint singularity and keeps the
// integrand smooth at zero for every d1 >= 1.
double f_cdf_quadrature(double x, double d1, double d2) {
    const auto g = [&](double u) { return u == 0.0 ? 0.0 : 2.0 * u * f_density(u * u, d1, d2); };
    const int n = 40000;
    const double top = std::sqrt(x);
    const double h = top / n;
    double acc = g(0.0) + g(top);
    if (d1 == 1.0) {
        // limit of 2u f(u^2) as u -> 0
        acc += std::exp(std::lgamma((d1 + d2) / 2.0) - std::lgamma(d1 / 2.0) -
                        std::lgamma(d2 / 2.0) + (d1 / 2.0) * std::log(d1 / d2)) *
               2.0;
        acc -= g(0.0);
    }
    for (int i = 1; i < n; ++i) {
        acc += (i % 2 == 1 ? 4.0 : 2.0) * g(i * h);
    }
    return acc * h / 3.0;
}

}  // namespace

TEST_CASE("student t cdf closed forms") {
    CHECK(student_t_cdf(0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(student_t_cdf(0.0, 37.5) == doctest::Approx(0.5).epsilon(1e-14));
    // Cauchy: F(1) = 1/2 + atan(1)/pi = 3/4
    CHECK(student_t_cdf(1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(student_t_cdf(2.7764, 4.0) == doctest::Approx(0.975).epsilon(1e-4));
}

TEST_CASE("student t cdf against quadrature across dof") {
    for (double dof : {1.0, 2.0, 4.0, 11.0, 60.0, 500.0}) {
        for (double x : {0.1, 0.9, 1.96, 2.7764, 4.5}) {
            const double reference = t_cdf_quadrature(x, dof);
            CHECK(std::fabs(student_t_cdf(x, dof) - reference) < 1e-10);
            CHECK(std::fabs(student_t_cdf(-x, dof) - (1.0 - reference)) < 1e-10);
        }
    }
}

TEST_CASE("student t quantile inverts the cdf") {
    for (double dof : {1.0, 4.0, 30.0, 200.0}) {
        for (double prob : {0.6, 0.9, 0.975, 0.995}) {
            const double q = student_t_quantile(prob, dof);
            CHECK(student_t_cdf(q, dof) == doctest::Approx(prob).epsilon(1e-10));
            CHECK(student_t_quantile(1.0 - prob, dof) == doctest::Approx(-q).epsilon(1e-9));
        }
    }
    CHECK(student_t_quantile(0.5, 7.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("f cdf against quadrature and the t-squared identity") {
    CHECK(std::fabs(f_cdf(1.7, 2, 6) - f_cdf_quadrature(1.7, 2, 6)) < 1e-8);
    CHECK(std::fabs(f_cdf(0.8, 5, 11) - f_cdf_quadrature(0.8, 5, 11)) < 1e-8);
    CHECK(std::fabs(f_cdf(3.2, 1, 4) - f_cdf_quadrature(3.2, 1, 4)) < 1e-8);
    // F_{1,K}(t^2) = 2 T_K(|t|) - 1
    for (double t : {0.5, 1.3, 2.7}) {
        const double via_t = 2.0 * student_t_cdf(t, 9.0) - 1.0;
        CHECK(f_cdf(t * t, 1, 9) == doctest::Approx(via_t).epsilon(1e-12));
    }
    CHECK(f_cdf(0.0, 3, 4) == 0.0);
}

TEST_CASE("incomplete beta rejects bad arguments") {
    CHECK_THROWS_AS(incomplete_beta(0.0, 1.0, 0.5), ArgumentError);
    CHECK_THROWS_AS(incomplete_beta(1.0, 1.0, 1.5), ArgumentError);
    CHECK_THROWS_AS(student_t_cdf(1.0, 0.0), ArgumentError);
    CHECK_THROWS_AS(student_t_quantile(1.2, 3.0), ArgumentError);
    CHECK_THROWS_AS(f_cdf(1.0, -1.0, 2.0), ArgumentError);
}
