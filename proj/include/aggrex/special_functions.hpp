#pragma once

namespace aggrex {

// Inverse standard normal CDF, Wichura's AS241 double-precision rational
// approximations (~1e-15 relative accuracy). p must be in (0, 1).
double inv_normal_cdf(double p);

// Standard normal CDF via erfc; accurate in both tails.
double normal_cdf(double x);

// Digamma function for x > 0.
double digamma(double x);

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
// Series for x < a + 1, Lentz continued fraction otherwise.
double reg_lower_gamma(double a, double x);

// Median of Gamma(shape, rate 1): the m solving P(shape, m) = 1/2.
// Bracketing bisection then Newton polish; relative accuracy ~1e-14.
double gamma_median(double shape);

// d gamma_median / d shape via implicit differentiation of P(a, m) = 1/2
// (dP/da by central difference, dP/dm analytic).
double gamma_median_dshape(double shape);

// log(1 + exp(x)) without overflow.
double log1p_exp(double x);

}  // namespace aggrex
