#include "aggrex/transforms.hpp"

#include <cmath>

#include "aggrex/errors.hpp"

namespace aggrex {

double boxcox_forward(double y, const BoxCoxLambda& lambda) {
  if (!(y > 0.0)) throw_data("NonPositiveInput", "boxcox_forward: y must be positive");
  const double ly = std::log(y);
  if (lambda.log_branch()) return ly;
  // expm1 keeps the small-lambda regime exact through the branch threshold.
  return std::expm1(lambda.value * ly) / lambda.value;
}

double boxcox_inverse(double f, const BoxCoxLambda& lambda, ClampCounter* clamps) {
  if (lambda.log_branch()) return std::exp(f);
  const double base = lambda.value * f + 1.0;
  if (base <= 0.0) {
    if (clamps) ++clamps->count;
    return 0.0;
  }
  return std::pow(base, 1.0 / lambda.value);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw_data("NonPositiveInput", "logit: p must lie in (0, 1)");
  return std::log(p) - std::log1p(-p);
}

double logit_inverse(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double positive_constrain(double u, double* log_jacobian) {
  if (log_jacobian) *log_jacobian += u;
  return std::exp(u);
}

double positive_chain(double constrained, double grad_constrained) {
  return grad_constrained * constrained + 1.0;
}

double bounded_constrain(double u, double lo, double hi, double* log_jacobian) {
  const double s = logit_inverse(u);
  if (log_jacobian) {
    // log((hi-lo) s (1-s)) written with log1p_exp-free stable pieces.
    const double abs_u = std::fabs(u);
    *log_jacobian += std::log(hi - lo) - abs_u - 2.0 * std::log1p(std::exp(-abs_u));
  }
  return lo + (hi - lo) * s;
}

double bounded_chain(double u, double lo, double hi, double grad_constrained) {
  const double s = logit_inverse(u);
  return grad_constrained * (hi - lo) * s * (1.0 - s) + (1.0 - 2.0 * s);
}

void simplex_constrain(const Eigen::Ref<const Eigen::VectorXd>& u,
                       Eigen::Ref<Eigen::VectorXd> x, double* log_jacobian) {
  const Eigen::Index km1 = u.size();
  double stick = 1.0;
  for (Eigen::Index k = 0; k < km1; ++k) {
    const double z = logit_inverse(u[k] - std::log(static_cast<double>(km1 - k)));
    x[k] = stick * z;
    if (log_jacobian) *log_jacobian += std::log(stick) + std::log(z) + std::log1p(-z);
    stick -= x[k];
  }
  x[km1] = stick;
}

void simplex_chain(const Eigen::Ref<const Eigen::VectorXd>& u,
                   const Eigen::Ref<const Eigen::VectorXd>& grad_x,
                   Eigen::Ref<Eigen::VectorXd> grad_u) {
  const Eigen::Index km1 = u.size();
  Eigen::VectorXd z(km1), stick(km1);
  double rest = 1.0;
  for (Eigen::Index k = 0; k < km1; ++k) {
    z[k] = logit_inverse(u[k] - std::log(static_cast<double>(km1 - k)));
    stick[k] = rest;
    rest *= (1.0 - z[k]);
  }
  // Backward pass over x_k = stick_k z_k, stick_{k+1} = stick_k (1 - z_k)
  // with the Jacobian terms log stick_k + log z_k + log(1 - z_k).
  double g_stick = grad_x[km1];
  for (Eigen::Index k = km1 - 1; k >= 0; --k) {
    const double gz = grad_x[k] * stick[k] - g_stick * stick[k] +
                      1.0 / z[k] - 1.0 / (1.0 - z[k]);
    grad_u[k] = gz * z[k] * (1.0 - z[k]);
    g_stick = grad_x[k] * z[k] + g_stick * (1.0 - z[k]) + 1.0 / stick[k];
  }
}

double correlation_constrain(double u, double* log_jacobian) {
  const double r = std::tanh(u);
  if (log_jacobian) *log_jacobian += std::log1p(-r * r);
  return r;
}

double correlation_chain(double r, double grad_r) {
  return grad_r * (1.0 - r * r) - 2.0 * r;
}

}  // namespace aggrex
