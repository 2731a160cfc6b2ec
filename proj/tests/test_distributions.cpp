#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "aggrex/distributions.hpp"
#include "aggrex/errors.hpp"
#include "aggrex/rng.hpp"
#include "aggrex/special_functions.hpp"

using namespace aggrex;

TEST_CASE("log densities match hand-computed references") {
  CHECK(log_density(DistributionSpec::normal(0, 1), 0.0) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  CHECK(log_density(DistributionSpec::gamma(2, 3), 1.5) ==
        doctest::Approx(-1.8973103145556159).epsilon(1e-13));
  CHECK(log_density(DistributionSpec::uniform(0.8, 2.6), 1.4) ==
        doctest::Approx(-0.5877866649021191).epsilon(1e-14));
  CHECK(log_density(DistributionSpec::uniform(0.8, 2.6), 0.5) == -INFINITY);
  CHECK(log_density(DistributionSpec::bernoulli(0.25), 1.0) ==
        doctest::Approx(std::log(0.25)).epsilon(1e-14));
  CHECK(log_density(DistributionSpec::bernoulli(0.25), 0.0) ==
        doctest::Approx(std::log(0.75)).epsilon(1e-14));
  CHECK(log_density(DistributionSpec::lognormal(0, 1), 1.0) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  CHECK(log_density(DistributionSpec::half_normal(2.0), -0.1) == -INFINITY);
  Eigen::VectorXd probs(3);
  probs << 0.2, 0.5, 0.3;
  CHECK(log_density(DistributionSpec::categorical(probs), 2.0) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));
}

TEST_CASE("gradients of log densities match finite differences") {
  std::vector<DistributionSpec> specs = {
      DistributionSpec::normal(0.3, 1.7),  DistributionSpec::half_normal(2.0),
      DistributionSpec::lognormal(0.2, 0.8), DistributionSpec::gamma(2.5, 1.3),
      DistributionSpec::uniform(0.0, 4.0), DistributionSpec::pert(0.0, 1.0, 4.0)};
  const double h = 1e-6;
  for (const auto& spec : specs) {
    for (double x : {0.4, 1.1, 2.9}) {
      const double fd = (log_density(spec, x + h) - log_density(spec, x - h)) / (2.0 * h);
      CHECK(grad_log_density(spec, x) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(DistributionSpec::normal(0, -1), Error);
  CHECK_THROWS_AS(DistributionSpec::bernoulli(1.5), Error);
  CHECK_THROWS_AS(DistributionSpec::gamma(0, 1), Error);
  CHECK_THROWS_AS(DistributionSpec::uniform(2, 2), Error);
  CHECK_THROWS_AS(DistributionSpec::pert(0, 0, 1), Error);
}

TEST_CASE("pert to beta conversion") {
  auto ab = pert_to_beta(0.0, 0.5, 1.0);
  CHECK(ab.first == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(ab.second == doctest::Approx(3.0).epsilon(1e-14));
  ab = pert_to_beta(0.0, 0.25, 1.0);
  CHECK(ab.first == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(ab.second == doctest::Approx(4.0).epsilon(1e-14));
  CHECK_THROWS_AS(pert_to_beta(0.0, 1.0, 1.0), Error);
}

TEST_CASE("pert-or-point collapses boundary modes to point masses") {
  RngStream rng(3);
  CHECK(sample_pert_or_point(0.0, 0.0, 1.0, rng) == 0.0);
  CHECK(sample_pert_or_point(0.0, -0.2, 1.0, rng) == 0.0);
  CHECK(sample_pert_or_point(0.0, 1.0, 1.0, rng) == 1.0);
  CHECK(sample_pert_or_point(0.0, 1.4, 1.0, rng) == 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = sample_pert_or_point(0.0, 0.3, 1.0, rng);
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("pert sample means match the classical formula") {
  // mean = (min + 4 mode + max) / 6 under the shape-4 convention.
  RngStream rng(17);
  for (double mode : {0.1, 0.25, 0.5, 0.9}) {
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sample_pert_or_point(0.0, mode, 1.0, rng);
    const double want = (0.0 + 4.0 * mode + 1.0) / 6.0;
    CHECK(sum / n == doctest::Approx(want).epsilon(0.004));
  }
}

TEST_CASE("sampler moments match their families") {
  RngStream rng(29);
  const int n = 200000;

  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_standard_normal(rng);
    s += x;
    s2 += x * x;
  }
  CHECK(s / n == doctest::Approx(0.0).epsilon(0.01));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));

  s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_gamma(2.5, 2.0, rng);
  CHECK(s / n == doctest::Approx(1.25).epsilon(0.01));

  s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_beta(2.0, 4.0, rng);
  CHECK(s / n == doctest::Approx(2.0 / 6.0).epsilon(0.01));
}

TEST_CASE("generic sampling stays inside each support and hits known medians") {
  RngStream rng(31);
  std::vector<double> gammas;
  for (int i = 0; i < 40001; ++i) {
    const double x = sample(DistributionSpec::gamma(2.0, 1.0), rng);
    CHECK(x > 0.0);
    gammas.push_back(x);
  }
  std::sort(gammas.begin(), gammas.end());
  CHECK(gammas[20000] == doctest::Approx(gamma_median(2.0)).epsilon(0.03));

  for (int i = 0; i < 100; ++i) {
    const double u = sample(DistributionSpec::uniform(0.8, 2.6), rng);
    CHECK(u >= 0.8);
    CHECK(u <= 2.6);
    const double b = sample(DistributionSpec::bernoulli(0.4), rng);
    CHECK((b == 0.0 || b == 1.0));
  }

  Eigen::VectorXd probs(3);
  probs << 0.2, 0.5, 0.3;
  long long counts[3] = {0, 0, 0};
  for (int i = 0; i < 30000; ++i)
    ++counts[static_cast<int>(sample(DistributionSpec::categorical(probs), rng)) - 1];
  CHECK(counts[0] / 30000.0 == doctest::Approx(0.2).epsilon(0.05));
  CHECK(counts[1] / 30000.0 == doctest::Approx(0.5).epsilon(0.05));
}
