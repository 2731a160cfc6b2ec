#include "aggrex/distributions.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "aggrex/errors.hpp"
#include "aggrex/special_functions.hpp"

namespace aggrex {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool ok, const char* what) {
  if (!ok) throw_config("InvalidParams", what);
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

DistributionSpec DistributionSpec::normal(double mu, double sigma) {
  require(std::isfinite(mu) && sigma > 0.0 && std::isfinite(sigma), "normal: sigma must be positive");
  return {Family::Normal, vec({mu, sigma})};
}

DistributionSpec DistributionSpec::half_normal(double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), "half_normal: sigma must be positive");
  return {Family::HalfNormal, vec({sigma})};
}

DistributionSpec DistributionSpec::lognormal(double mu, double sigma) {
  require(std::isfinite(mu) && sigma > 0.0 && std::isfinite(sigma), "lognormal: sigma must be positive");
  return {Family::Lognormal, vec({mu, sigma})};
}

DistributionSpec DistributionSpec::bernoulli(double p) {
  require(p >= 0.0 && p <= 1.0, "bernoulli: p must lie in [0, 1]");
  return {Family::Bernoulli, vec({p})};
}

DistributionSpec DistributionSpec::categorical(const Eigen::VectorXd& probs) {
  require(probs.size() >= 1, "categorical: needs at least one outcome");
  require((probs.array() >= 0.0).all(), "categorical: probabilities must be nonnegative");
  require(std::fabs(probs.sum() - 1.0) <= 1e-9, "categorical: probabilities must sum to 1");
  return {Family::Categorical, probs};
}

DistributionSpec DistributionSpec::gamma(double shape, double rate) {
  require(shape > 0.0 && rate > 0.0, "gamma: shape and rate must be positive");
  return {Family::Gamma, vec({shape, rate})};
}

DistributionSpec DistributionSpec::uniform(double lo, double hi) {
  require(lo < hi && std::isfinite(lo) && std::isfinite(hi), "uniform: requires lo < hi");
  return {Family::Uniform, vec({lo, hi})};
}

DistributionSpec DistributionSpec::pert(double min, double mode, double max) {
  require(min < max, "pert: requires min < max");
  if (!(mode > min && mode < max))
    throw_config("DegeneratePert", "pert: mode must lie strictly inside (min, max)");
  return {Family::Pert, vec({min, mode, max})};
}

std::pair<double, double> pert_to_beta(double min, double mode, double max) {
  if (!(min < max) || !(mode > min && mode < max))
    throw_config("DegeneratePert", "pert_to_beta: mode must lie strictly inside (min, max)");
  const double span = max - min;
  return {1.0 + 4.0 * (mode - min) / span, 1.0 + 4.0 * (max - mode) / span};
}

double log_density(const DistributionSpec& spec, double x) {
  const auto& p = spec.params;
  switch (spec.family) {
    case Family::Normal: {
      const double z = (x - p[0]) / p[1];
      return -std::log(p[1]) - 0.5 * kLog2Pi - 0.5 * z * z;
    }
    case Family::HalfNormal: {
      if (x < 0.0) return kNegInf;
      const double z = x / p[0];
      return std::log(2.0) - std::log(p[0]) - 0.5 * kLog2Pi - 0.5 * z * z;
    }
    case Family::Lognormal: {
      if (x <= 0.0) return kNegInf;
      const double lx = std::log(x);
      const double z = (lx - p[0]) / p[1];
      return -lx - std::log(p[1]) - 0.5 * kLog2Pi - 0.5 * z * z;
    }
    case Family::Bernoulli: {
      if (x == 1.0) return std::log(p[0]);
      if (x == 0.0) return std::log1p(-p[0]);
      return kNegInf;
    }
    case Family::Categorical: {
      const double k = std::nearbyint(x);
      if (k != x || k < 1.0 || k > static_cast<double>(p.size())) return kNegInf;
      return std::log(p[static_cast<Eigen::Index>(k) - 1]);
    }
    case Family::Gamma: {
      if (x <= 0.0) return kNegInf;
      return p[0] * std::log(p[1]) - std::lgamma(p[0]) + (p[0] - 1.0) * std::log(x) - p[1] * x;
    }
    case Family::Uniform: {
      if (x < p[0] || x > p[1]) return kNegInf;
      return -std::log(p[1] - p[0]);
    }
    case Family::Pert: {
      if (x <= p[0] || x >= p[2]) return kNegInf;
      const auto [a, b] = pert_to_beta(p[0], p[1], p[2]);
      const double span = p[2] - p[0];
      const double z = (x - p[0]) / span;
      const double log_beta_norm = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
      return (a - 1.0) * std::log(z) + (b - 1.0) * std::log1p(-z) - log_beta_norm - std::log(span);
    }
  }
  return kNegInf;
}

double grad_log_density(const DistributionSpec& spec, double x) {
  const auto& p = spec.params;
  switch (spec.family) {
    case Family::Normal:
      return -(x - p[0]) / (p[1] * p[1]);
    case Family::HalfNormal:
      if (x < 0.0) return 0.0;
      return -x / (p[0] * p[0]);
    case Family::Lognormal: {
      if (x <= 0.0) return 0.0;
      const double s2 = p[1] * p[1];
      return (-1.0 - (std::log(x) - p[0]) / s2) / x;
    }
    case Family::Bernoulli:
    case Family::Categorical:
      return 0.0;
    case Family::Gamma:
      if (x <= 0.0) return 0.0;
      return (p[0] - 1.0) / x - p[1];
    case Family::Uniform:
      return 0.0;
    case Family::Pert: {
      if (x <= p[0] || x >= p[2]) return 0.0;
      const auto [a, b] = pert_to_beta(p[0], p[1], p[2]);
      return (a - 1.0) / (x - p[0]) - (b - 1.0) / (p[2] - x);
    }
  }
  return 0.0;
}

double sample_standard_normal(RngStream& rng) {
  return inv_normal_cdf(rng.next_u01());
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  // Marsaglia-Tsang squeeze; boost to shape+1 below 1.
  if (shape < 1.0) {
    const double g = sample_gamma(shape + 1.0, 1.0, rng);
    const double u = rng.next_u01();
    return g * std::pow(u, 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double z = sample_standard_normal(rng);
    const double t = 1.0 + c * z;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = rng.next_u01();
    if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return d * v / rate;
  }
}

double sample_beta(double alpha, double beta, RngStream& rng) {
  const double x = sample_gamma(alpha, 1.0, rng);
  const double y = sample_gamma(beta, 1.0, rng);
  return x / (x + y);
}

double sample_pert_or_point(double min, double mode, double max, RngStream& rng) {
  if (mode <= min) return min;
  if (mode >= max) return max;
  const auto [a, b] = pert_to_beta(min, mode, max);
  return min + (max - min) * sample_beta(a, b, rng);
}

double sample(const DistributionSpec& spec, RngStream& rng) {
  const auto& p = spec.params;
  switch (spec.family) {
    case Family::Normal:
      return p[0] + p[1] * sample_standard_normal(rng);
    case Family::HalfNormal:
      return std::fabs(p[0] * sample_standard_normal(rng));
    case Family::Lognormal:
      return std::exp(p[0] + p[1] * sample_standard_normal(rng));
    case Family::Bernoulli:
      return rng.next_u01() < p[0] ? 1.0 : 0.0;
    case Family::Categorical: {
      const double u = rng.next_u01();
      double acc = 0.0;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        acc += p[k];
        if (u <= acc) return static_cast<double>(k + 1);
      }
      return static_cast<double>(p.size());
    }
    case Family::Gamma:
      return sample_gamma(p[0], p[1], rng);
    case Family::Uniform:
      return p[0] + (p[1] - p[0]) * rng.next_u01();
    case Family::Pert: {
      const auto [a, b] = pert_to_beta(p[0], p[1], p[2]);
      return p[0] + (p[2] - p[0]) * sample_beta(a, b, rng);
    }
  }
  std::ostringstream os;
  os << "sample: unhandled family " << static_cast<int>(spec.family);
  throw_config("InvalidParams", os.str());
}

}  // namespace aggrex
