#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "aggrex/apportion.hpp"
#include "aggrex/errors.hpp"
#include "aggrex/rng.hpp"
#include "aggrex/special_functions.hpp"
#include "aggrex/transforms.hpp"

using namespace aggrex;

TEST_CASE("rng streams are deterministic and derivation is pure") {
  RngStream a(42), b(42);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.next_u64() == b.next_u64());

  // Deriving never consumes parent state: children match no matter how many
  // values the parent produced before the derive call.
  RngStream p1(7), p2(7);
  p2.next_u64();
  p2.next_u64();
  RngStream c1 = p1.derive(3);
  RngStream c2 = p2.derive(3);
  CHECK(c1.next_u64() == c2.next_u64());

  RngStream d1 = p1.derive_path({1, 2, 3});
  RngStream d2 = p1.derive(1).derive(2).derive(3);
  CHECK(d1.next_u64() == d2.next_u64());
}

TEST_CASE("distinct stream ids give distinct output") {
  RngStream root(5);
  std::set<std::uint64_t> seen;
  for (std::uint64_t id = 0; id < 200; ++id) seen.insert(root.derive(id).next_u64());
  CHECK(seen.size() == 200);
}

TEST_CASE("next_u01 stays inside the open unit interval") {
  RngStream r(1);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 200000; ++i) {
    double u = r.next_u01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
}

TEST_CASE("next_below covers the full range") {
  RngStream r(9);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 500; ++i) {
    std::uint64_t v = r.next_below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("inverse normal cdf hits reference quantiles") {
  CHECK(inv_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(inv_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(inv_normal_cdf(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  // Round trip against the forward CDF across both tails.
  for (double p : {1e-10, 1e-4, 0.01, 0.3, 0.5, 0.77, 0.99, 1 - 1e-6}) {
    CHECK(normal_cdf(inv_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-9));
  }
}

TEST_CASE("digamma matches known values") {
  const double euler = 0.5772156649015329;
  CHECK(digamma(1.0) == doctest::Approx(-euler).epsilon(1e-10));
  CHECK(digamma(2.0) == doctest::Approx(1.0 - euler).epsilon(1e-10));
  CHECK(digamma(0.5) == doctest::Approx(-euler - 2.0 * std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("regularized lower incomplete gamma") {
  // P(1, x) = 1 - exp(-x).
  for (double x : {0.1, 1.0, 3.0, 10.0}) {
    CHECK(reg_lower_gamma(1.0, x) == doctest::Approx(1.0 - std::exp(-x)).epsilon(1e-12));
  }
  // P(2, x) = 1 - (1 + x) exp(-x).
  CHECK(reg_lower_gamma(2.0, 1.67834699) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(reg_lower_gamma(5.0, 0.0) == 0.0);
}

TEST_CASE("gamma median solves the half-mass equation") {
  CHECK(gamma_median(1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(gamma_median(2.0) == doctest::Approx(1.6783469900166605).epsilon(1e-9));
  for (double a : {0.3, 0.9, 1.0, 2.5, 7.0, 40.0}) {
    CHECK(reg_lower_gamma(a, gamma_median(a)) == doctest::Approx(0.5).epsilon(1e-10));
  }
  // Derivative against central differences.
  for (double a : {0.7, 2.0, 9.0}) {
    const double h = 1e-5;
    const double fd = (gamma_median(a + h) - gamma_median(a - h)) / (2.0 * h);
    CHECK(gamma_median_dshape(a) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("log1p_exp is stable at both extremes") {
  CHECK(log1p_exp(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(log1p_exp(-745.0) == doctest::Approx(std::exp(-745.0)).epsilon(1e-6));
  CHECK(log1p_exp(1000.0) == doctest::Approx(1000.0).epsilon(1e-14));
  CHECK(std::isfinite(log1p_exp(1e8)));
}

TEST_CASE("power transform round trips to high precision") {
  for (double lam : {-1.5, -0.5, -1e-9, 0.0, 1e-9, 0.3, 1.0, 2.0}) {
    BoxCoxLambda lambda{lam};
    for (double y : {1e-6, 0.01, 0.5, 1.0, 3.0, 250.0}) {
      const double f = boxcox_forward(y, lambda);
      CHECK(boxcox_inverse(f, lambda) == doctest::Approx(y).epsilon(1e-10));
    }
  }
}

TEST_CASE("power transform is continuous at the log branch") {
  // Values just outside the zero threshold must agree with the log branch.
  BoxCoxLambda at_zero{0.0};
  for (double lam : {2e-8, -2e-8}) {
    BoxCoxLambda near_zero{lam};
    for (double y : {0.2, 1.0, 7.0}) {
      CHECK(boxcox_forward(y, near_zero) ==
            doctest::Approx(boxcox_forward(y, at_zero)).epsilon(1e-7));
    }
    for (double f : {-1.0, 0.1, 2.0}) {
      CHECK(boxcox_inverse(f, near_zero) ==
            doctest::Approx(boxcox_inverse(f, at_zero)).epsilon(1e-7));
    }
  }
}

TEST_CASE("negative-domain inversions clamp to zero and are counted") {
  BoxCoxLambda lambda{0.5};
  ClampCounter clamps;
  // f below -1/lambda leaves the transform's range.
  CHECK(boxcox_inverse(-3.0, lambda, &clamps) == 0.0);
  CHECK(clamps.count == 1);
  CHECK(boxcox_inverse(0.5, lambda, &clamps) > 0.0);
  CHECK(clamps.count == 1);
  ClampCounter more;
  more.count = 41;
  clamps.merge(more);
  CHECK(clamps.count == 42);
}

TEST_CASE("logit maps round trip") {
  for (double p : {1e-12, 0.01, 0.5, 0.73, 1 - 1e-12}) {
    CHECK(logit_inverse(logit(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(logit_inverse(-800.0) >= 0.0);
  CHECK(logit_inverse(800.0) <= 1.0);
}

TEST_CASE("unconstraining maps agree with their chain rules") {
  // The chain helpers fold in the log-Jacobian's own derivative, so they must
  // equal d(x)/du + d(log jac)/du when the constrained gradient is 1. The
  // jacobian outputs accumulate, hence the fresh zero per evaluation.
  const double h = 1e-6;
  SUBCASE("positive") {
    for (double u : {-2.0, 0.0, 1.5}) {
      double lj1 = 0.0, lj2 = 0.0;
      const double xp = positive_constrain(u + h, &lj1);
      const double xm = positive_constrain(u - h, &lj2);
      const double x = positive_constrain(u, nullptr);
      const double want = (xp - xm + lj1 - lj2) / (2.0 * h);
      CHECK(positive_chain(x, 1.0) == doctest::Approx(want).epsilon(1e-6));
    }
  }
  SUBCASE("bounded") {
    const double lo = 0.8, hi = 2.6;
    for (double u : {-1.2, 0.0, 2.2}) {
      double ljp = 0.0, ljm = 0.0;
      const double xp = bounded_constrain(u + h, lo, hi, &ljp);
      const double xm = bounded_constrain(u - h, lo, hi, &ljm);
      const double want = (xp - xm + ljp - ljm) / (2.0 * h);
      CHECK(bounded_chain(u, lo, hi, 1.0) == doctest::Approx(want).epsilon(1e-6));
    }
  }
  SUBCASE("correlation") {
    double lj = 0.0;
    CHECK(correlation_constrain(5.0, &lj) < 1.0);
    CHECK(correlation_constrain(-5.0, &lj) > -1.0);
    CHECK(correlation_constrain(0.0, &lj) == doctest::Approx(0.0));
    // Far out the map saturates in floating point; the jacobian then rejects
    // the point (log of zero) but nothing degenerates to NaN.
    double far = 0.0;
    const double r = correlation_constrain(40.0, &far);
    CHECK(r <= 1.0);
    CHECK(std::isfinite(correlation_chain(r, 1.0)));
    for (double u : {-1.3, 0.0, 0.9}) {
      double ljp = 0.0, ljm = 0.0;
      const double rp = correlation_constrain(u + h, &ljp);
      const double rm = correlation_constrain(u - h, &ljm);
      const double want = (rp - rm + ljp - ljm) / (2.0 * h);
      CHECK(correlation_chain(correlation_constrain(u, nullptr), 1.0) ==
            doctest::Approx(want).epsilon(1e-6));
    }
  }
}

TEST_CASE("simplex constrain produces a simplex and exact jacobian gradient") {
  Eigen::VectorXd u(3);
  u << 0.3, -0.7, 1.1;
  Eigen::VectorXd x(4);
  double lj = 0.0;
  simplex_constrain(u, x, &lj);
  CHECK(x.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(x.minCoeff() > 0.0);

  // Gradient of sum(log x_k) + log jacobian via the chain helper against FD.
  auto objective = [](const Eigen::VectorXd& uu) {
    Eigen::VectorXd xx(uu.size() + 1);
    double jac = 0.0;
    simplex_constrain(uu, xx, &jac);
    return xx.array().log().sum() + jac;
  };
  Eigen::VectorXd grad_x = x.cwiseInverse();  // d/dx of sum(log x)
  Eigen::VectorXd grad_u(3);
  simplex_chain(u, grad_x, grad_u);
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd up = u, um = u;
    up[i] += h;
    um[i] -= h;
    const double fd = (objective(up) - objective(um)) / (2.0 * h);
    CHECK(grad_u[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

namespace {
StratumTable table3(long long a, long long b, long long c) {
  return StratumTable({{"a1", "f", "r", a}, {"a2", "f", "r", b}, {"a3", "f", "r", c}});
}
}  // namespace

TEST_CASE("apportionment matches worked examples") {
  CHECK(allocate_strata(table3(500, 300, 200), 10) == std::vector<long long>{5, 3, 2});
  CHECK(allocate_strata(table3(1, 1, 1), 10) == std::vector<long long>{4, 3, 3});
  StratumTable two({{"a1", "f", "r", 999}, {"a2", "f", "r", 1}});
  CHECK(allocate_strata(two, 100) == std::vector<long long>{99, 1});
}

TEST_CASE("apportionment sums exactly and keeps populated strata nonempty") {
  RngStream rng(77);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Stratum> strata;
    const int n = 2 + static_cast<int>(rng.next_below(8));
    for (int i = 0; i < n; ++i)
      strata.push_back({"a" + std::to_string(i), "f", "r",
                        static_cast<long long>(1 + rng.next_below(100000))});
    StratumTable table(strata);
    const long long total = static_cast<long long>(n + rng.next_below(50000));
    std::vector<long long> out = allocate_strata(table, total);
    long long sum = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      sum += out[i];
      CHECK(out[i] >= 1);
    }
    CHECK(sum == total);
  }
}
