#pragma once

namespace cpsdet {

// Natural log of the gamma function for x > 0 (Lanczos, g = 7).
double log_gamma(double x);

// Regularized upper incomplete gamma Q(a, x) for a > 0, x >= 0. Series
// expansion below x < a + 1, Legendre continued fraction above.
double gamma_q(double a, double x);

// Complementary error function; absolute error <= 1e-12 on [-6, 6].
double erfc(double x);

// Upper-tail probability of the chi-squared distribution with dof degrees
// of freedom. Relative error <= 1e-9 for x <= 100, dof <= 64.
// Throws DomainError for x < 0 or dof < 1.
double chi2_sf(double x, int dof);

// Standard normal density.
double normal_pdf(double x);

}  // namespace cpsdet
