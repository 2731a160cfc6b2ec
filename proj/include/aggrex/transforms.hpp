#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace aggrex {

// Power-transform parameter; |value| <= zero_threshold selects the log branch.
struct BoxCoxLambda {
  double value = 0.0;
  double zero_threshold = 1e-8;

  bool log_branch() const { return value >= -zero_threshold && value <= zero_threshold; }
};

// Counts back-transform clamps so runs can report them; merged across
// parallel tasks at the join, never shared while tasks run.
struct ClampCounter {
  std::int64_t count = 0;
  void merge(const ClampCounter& other) { count += other.count; }
};

// (y^lambda - 1) / lambda, or log y on the log branch. y must be positive.
double boxcox_forward(double y, const BoxCoxLambda& lambda);

// Inverse transform; negative-domain results clamp to 0 and bump `clamps`
// when provided.
double boxcox_inverse(double f, const BoxCoxLambda& lambda, ClampCounter* clamps = nullptr);

// log(p / (1-p)) for p in (0, 1).
double logit(double p);

// Numerically stable logistic function for any finite x.
double logit_inverse(double x);

// --- unconstraining maps used by the sampler ---------------------------------
// Each *_constrain maps unconstrained coordinates to the constrained value and
// adds the log Jacobian; each *_chain converts a gradient with respect to the
// constrained value into one with respect to the unconstrained coordinate,
// including the Jacobian's own gradient.

double positive_constrain(double u, double* log_jacobian);
double positive_chain(double constrained, double grad_constrained);

double bounded_constrain(double u, double lo, double hi, double* log_jacobian);
double bounded_chain(double u, double lo, double hi, double grad_constrained);

// Stick-breaking simplex: u has K-1 entries, x gets K entries summing to 1.
void simplex_constrain(const Eigen::Ref<const Eigen::VectorXd>& u,
                       Eigen::Ref<Eigen::VectorXd> x, double* log_jacobian);
void simplex_chain(const Eigen::Ref<const Eigen::VectorXd>& u,
                   const Eigen::Ref<const Eigen::VectorXd>& grad_x,
                   Eigen::Ref<Eigen::VectorXd> grad_u);

// 2x2 correlation via tanh with a flat prior over (-1, 1).
double correlation_constrain(double u, double* log_jacobian);
double correlation_chain(double r, double grad_r);

}  // namespace aggrex
