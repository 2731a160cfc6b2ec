#pragma once

#include <Eigen/Core>
#include <utility>

#include "aggrex/rng.hpp"

namespace aggrex {

enum class Family {
  Normal,       // mu, sigma
  HalfNormal,   // sigma (support x >= 0)
  Lognormal,    // mu, sigma of log(x)
  Bernoulli,    // p (outcomes 0/1)
  Categorical,  // p_1..p_K (outcomes 1..K)
  Gamma,        // shape, rate
  Uniform,      // lo, hi
  Pert          // min, mode, max (shape-4 beta-PERT)
};

// Parametric distribution value object. Parameters are validated on
// construction; invalid parameters raise InvalidParams.
struct DistributionSpec {
  Family family;
  Eigen::VectorXd params;

  static DistributionSpec normal(double mu, double sigma);
  static DistributionSpec half_normal(double sigma);
  static DistributionSpec lognormal(double mu, double sigma);
  static DistributionSpec bernoulli(double p);
  static DistributionSpec categorical(const Eigen::VectorXd& probs);
  static DistributionSpec gamma(double shape, double rate);
  static DistributionSpec uniform(double lo, double hi);
  static DistributionSpec pert(double min, double mode, double max);
};

// Log density (or log mass) at x; -infinity outside the support.
// Categorical takes the 1-based outcome index as a real number.
double log_density(const DistributionSpec& spec, double x);

// d log_density / dx at x. Zero for the discrete families.
double grad_log_density(const DistributionSpec& spec, double x);

// One draw; deterministic given the stream state. Discrete families return
// the outcome as a real number (Categorical: 1..K).
double sample(const DistributionSpec& spec, RngStream& rng);

// Classical shape-4 beta-PERT conversion:
//   alpha = 1 + 4 (mode-min)/(max-min), beta = 1 + 4 (max-mode)/(max-min).
// Raises DegeneratePert when mode is not strictly inside (min, max).
std::pair<double, double> pert_to_beta(double min, double mode, double max);

// Low-level samplers shared by the engine and the sampler.
double sample_standard_normal(RngStream& rng);
double sample_gamma(double shape, double rate, RngStream& rng);
double sample_beta(double alpha, double beta, RngStream& rng);

// PERT draw on [min, max] with the mode collapsing to a point mass when it
// sits on (or outside) a boundary; used for probability-valued modes.
double sample_pert_or_point(double min, double mode, double max, RngStream& rng);

}  // namespace aggrex
