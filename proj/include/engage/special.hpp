#pragma once

namespace engage {

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation (relative error well below 1e-10 over the t-test range).
double incomplete_beta(double a, double b, double x);

// Student-t survival function P(T > t) for df degrees of freedom.
double student_t_sf(double t, double df);

// Two-tailed p-value for a t statistic: 2 * P(T > |t|).
double student_t_two_tailed(double t, double df);

// F-distribution survival function P(F > f) with (d1, d2) degrees of freedom.
double f_sf(double f, double d1, double d2);

} // namespace engage
