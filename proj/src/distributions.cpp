#include "orthogmm/distributions.hpp"

#include <cmath>
#include <limits>

#include "orthogmm/errors.hpp"

namespace orthogmm {

namespace {

// Continued fraction for the incomplete beta function (Lentz's method).
double beta_cf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 1e-15;
    constexpr double fpmin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw ConvergenceError("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw ArgumentError("incomplete_beta: parameters must be positive");
    }
    if (x < 0.0 || x > 1.0) {
        throw ArgumentError("incomplete_beta: x must lie in [0,1]");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    const double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(log_bt);
    // The continued fraction converges fastest for x below the mean a/(a+b).
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * beta_cf(a, b, x) / a;
    }
    return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double x, double dof) {
    if (!(dof > 0.0)) throw ArgumentError("student_t_cdf: dof must be positive");
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    if (x == 0.0) return 0.5;
    const double tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, dof / (dof + x * x));
    return x > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double prob, double dof) {
    if (!(dof > 0.0)) throw ArgumentError("student_t_quantile: dof must be positive");
    if (!(prob > 0.0 && prob < 1.0)) {
        throw ArgumentError("student_t_quantile: prob must lie in (0,1)");
    }
    if (prob == 0.5) return 0.0;
    // Bisection on a bracket that is then polished by Newton steps. The CDF is
    // smooth and strictly increasing, so this is reliable for dof in [1, 500].
    double lo = -1.0, hi = 1.0;
    while (student_t_cdf(lo, dof) > prob) lo *= 2.0;
    while (student_t_cdf(hi, dof) < prob) hi *= 2.0;
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 200; ++i) {
        const double c = student_t_cdf(x, dof);
        if (c > prob) {
            hi = x;
        } else {
            lo = x;
        }
        x = 0.5 * (lo + hi);
        if (hi - lo < 1e-14 * (1.0 + std::fabs(x))) break;
    }
    return x;
}

double f_cdf(double x, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw ArgumentError("f_cdf: dof must be positive");
    if (x <= 0.0) return 0.0;
    return incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2));
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

}  // namespace orthogmm
