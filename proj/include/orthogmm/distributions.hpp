#pragma once

namespace orthogmm {

// Regularized incomplete beta function I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// CDF of Student's t distribution with dof > 0 degrees of freedom.
double student_t_cdf(double x, double dof);

// Upper-tail quantile helper: smallest t with student_t_cdf(t, dof) >= prob.
double student_t_quantile(double prob, double dof);

// CDF of the F distribution with d1, d2 > 0 degrees of freedom (x >= 0).
double f_cdf(double x, double d1, double d2);

// Standard normal CDF.
double normal_cdf(double x);

}  // namespace orthogmm
