#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "aggrex/builders.hpp"
#include "aggrex/diagnostics.hpp"
#include "aggrex/draws_io.hpp"
#include "aggrex/errors.hpp"
#include "aggrex/model_graph.hpp"
#include "aggrex/rng.hpp"
#include "aggrex/sampler.hpp"
#include "aggrex/special_functions.hpp"
#include "test_support.hpp"

using namespace aggrex;
using aggrex_test::scratch_dir;
using aggrex_test::synth_data;

namespace {

// x ~ N(mu, sd) independently, reported directly.
ModelGraph gaussian_graph(int dim, double mu, double sd) {
  ModelGraph g;
  g.name = "gaussian" + std::to_string(dim);
  const int b = g.layout.add("x", {dim}, Constraint::None);
  const auto& blk = g.layout.block(b);
  for (int i = 0; i < dim; ++i) {
    g.normal_prior.add(blk.c_offset + i, mu, -1, sd, -1);
    g.report.push_back({col_name("x", {i}), blk.c_offset + i});
  }
  return g;
}

// Conjugate location: mu ~ N(0,1), y = 1.2 observed with unit noise. The
// posterior is N(0.6, 1/sqrt(2)).
ModelGraph conjugate_graph() {
  ModelGraph g;
  g.name = "conjugate";
  const int b = g.layout.add("mu", {1}, Constraint::None);
  const int at = g.layout.block(b).c_offset;
  g.normal_prior.add(at, 0.0, -1, 1.0, -1);   // prior
  g.normal_prior.add(at, 1.2, -1, 1.0, -1);   // unit-noise observation
  g.report.push_back({"mu", at});
  return g;
}

double column_mean(const DrawSet& ds, const std::string& name) {
  return ds.draws.col(ds.column_index(name)).mean();
}

double column_sd(const DrawSet& ds, const std::string& name) {
  const Eigen::VectorXd c = ds.draws.col(ds.column_index(name));
  const double m = c.mean();
  return std::sqrt((c.array() - m).square().sum() / (c.size() - 1.0));
}

}  // namespace

TEST_CASE("standard normal target: correct moments, no divergences") {
  ModelGraph g = gaussian_graph(10, 0.0, 1.0);
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.warmup = 500;
  cfg.samples = 500;
  cfg.seed = 42;
  cfg.threads = 1;
  DrawSet ds = run_nuts(g, cfg);
  REQUIRE(ds.draws.rows() == 2000);
  REQUIRE(ds.names.size() == 10);
  CHECK(ds.total_divergences() == 0);

  DiagnosticsReport rep = diagnose(ds);
  CHECK(rep.max_rhat < 1.01);
  CHECK(rep.min_ess > 400.0);
  CHECK(rep.pass());

  for (int i = 0; i < 10; ++i) {
    const std::string name = col_name("x", {i});
    CHECK(column_mean(ds, name) == doctest::Approx(0.0).epsilon(0.12));
    CHECK(column_sd(ds, name) == doctest::Approx(1.0).epsilon(0.1));
  }
}

TEST_CASE("conjugate posterior: mean and sd match the closed form") {
  ModelGraph g = conjugate_graph();
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.warmup = 500;
  cfg.samples = 1000;
  cfg.seed = 7;
  cfg.threads = 1;
  DrawSet ds = run_nuts(g, cfg);
  CHECK(column_mean(ds, "mu") == doctest::Approx(0.6).epsilon(0.05));
  CHECK(column_sd(ds, "mu") == doctest::Approx(0.7071067811865476).epsilon(0.05));
}

TEST_CASE("one-dimensional draws pass a KS test against the exact cdf") {
  ModelGraph g = gaussian_graph(1, 0.3, 1.7);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 400;
  cfg.samples = 2000;
  cfg.seed = 5;
  cfg.threads = 1;
  DrawSet ds = run_nuts(g, cfg);

  std::vector<double> x(ds.draws.col(0).data(), ds.draws.col(0).data() + ds.draws.rows());
  std::sort(x.begin(), x.end());
  double ks = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf((x[i] - 0.3) / 1.7);
    ks = std::max(ks, std::max(std::abs(f - i / n), std::abs(f - (i + 1) / n)));
  }
  // Draws are autocorrelated; judge against the effective sample size.
  const double ess = ess_bulk(
      Eigen::Map<const Eigen::MatrixXd>(ds.draws.col(0).data(), ds.samples_per_chain, ds.chains));
  CHECK(ess > 400.0);
  CHECK(ks < 1.63 / std::sqrt(ess));  // 1% critical value
}

TEST_CASE("sampling is reproducible and thread-count invariant") {
  ModelGraph g = gaussian_graph(3, 0.0, 1.0);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 200;
  cfg.samples = 100;
  cfg.seed = 11;
  cfg.threads = 1;
  DrawSet a = run_nuts(g, cfg);
  DrawSet b = run_nuts(g, cfg);
  cfg.threads = 4;
  DrawSet c = run_nuts(g, cfg);
  CHECK((a.draws.array() == b.draws.array()).all());
  CHECK((a.draws.array() == c.draws.array()).all());

  cfg.seed = 12;
  DrawSet d = run_nuts(g, cfg);
  CHECK_FALSE((a.draws.array() == d.draws.array()).all());
}

TEST_CASE("sampler rejects impossible configurations") {
  ModelGraph g = gaussian_graph(2, 0.0, 1.0);
  SamplerConfig cfg;
  cfg.chains = 0;
  CHECK_THROWS_AS(run_nuts(g, cfg), Error);
  cfg.chains = 2;
  cfg.samples = 0;
  CHECK_THROWS_AS(run_nuts(g, cfg), Error);
}

TEST_CASE("prior-only food graph reproduces the intercept prior spread") {
  const auto& d = synth_data();
  ModelGraph g = build_food_graph(d.survey, d.tree, d.cfg, d.cov, false);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 400;
  cfg.samples = 1500;
  cfg.seed = 3;
  cfg.threads = 1;
  DrawSet ds = run_nuts(g, cfg);
  // eta0[g] = mu0 + sigma0 z_g with mu0 ~ N(0, 2.5), sigma0 ~ HalfNormal(1),
  // z ~ N(0,1), so its prior variance is 2.5^2 + E[sigma0^2] = 7.25.
  const double sd = column_sd(ds, col_name("eta0", {0}));
  CHECK(sd == doctest::Approx(std::sqrt(7.25)).epsilon(0.08));
}

TEST_CASE("draw files round trip exactly") {
  ModelGraph g = gaussian_graph(2, 0.0, 1.0);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 100;
  cfg.samples = 50;
  cfg.seed = 1;
  cfg.threads = 1;
  DrawSet ds = run_nuts(g, cfg);
  const std::string path = scratch_dir("draws_io") + "/d.csv";
  write_draws_csv(path, ds);
  DrawSet back = read_draws_csv(path);
  CHECK(back.graph_name == ds.graph_name);
  CHECK(back.names == ds.names);
  CHECK(back.chains == ds.chains);
  CHECK(back.samples_per_chain == ds.samples_per_chain);
  CHECK((back.draws.array() == ds.draws.array()).all());
}

TEST_CASE("diagnostics flag bad chains and constant columns") {
  DrawSet ds;
  ds.graph_name = "fake";
  ds.names = {"good", "shifted", "flat"};
  ds.chains = 2;
  ds.samples_per_chain = 200;
  ds.draws.resize(400, 3);
  RngStream rng(8);
  for (int c = 0; c < 2; ++c) {
    for (int s = 0; s < 200; ++s) {
      const int row = c * 200 + s;
      const double z = inv_normal_cdf(rng.next_u01());
      ds.draws(row, 0) = z;
      ds.draws(row, 1) = z + (c == 0 ? 0.0 : 8.0);  // chains disagree
      ds.draws(row, 2) = 3.25;                      // constant
    }
  }
  ds.chain_stats.assign(2, ChainStats{});
  DiagnosticsReport rep = diagnose(ds);
  CHECK_FALSE(rep.pass());
  CHECK(rep.constant_columns == 1);
  CHECK(rep.max_rhat > 1.5);
  REQUIRE(rep.columns.size() == 3);
  CHECK(rep.columns[0].rhat < 1.05);
  CHECK(rep.columns[2].constant);

  // A healthy set passes.
  DrawSet ok = ds;
  ok.names = {"a", "b", "c"};
  for (int row = 0; row < 400; ++row) {
    ok.draws(row, 1) = inv_normal_cdf(rng.next_u01());
    ok.draws(row, 2) = inv_normal_cdf(rng.next_u01());
  }
  DiagnosticsReport rep2 = diagnose(ok);
  CHECK(rep2.pass());
  CHECK(format_report(rep2).find("status: pass") != std::string::npos);

  // Too little information to diagnose is an error, not a pass.
  DrawSet tiny = ds;
  tiny.chains = 1;
  tiny.samples_per_chain = 400;
  CHECK_THROWS_AS(diagnose(tiny), Error);
}

TEST_CASE("market graph posterior tracks observed presence fractions") {
  // Three categories with 21/100, 50/100, 80/100 positive products.
  std::vector<CategoryNode> nodes = {{"pcp", "", 1, "pcp"},
                                     {"a", "pcp", 2, "a"},
                                     {"b", "pcp", 2, "b"},
                                     {"c", "pcp", 2, "c"}};
  CategoryTree tree(nodes);
  std::vector<ProductObservation> rows;
  auto fill = [&](const std::string& cat, int pos, int total) {
    for (int i = 0; i < total; ++i)
      rows.push_back({cat + std::to_string(i), cat, i < pos});
  };
  fill("a", 21, 100);
  fill("b", 50, 100);
  fill("c", 80, 100);
  ModelGraph g = build_market_graph(rows, tree, "pcp", MarketSource::Pcp);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 500;
  cfg.samples = 1000;
  cfg.seed = 21;
  cfg.threads = 1;
  DrawSet ds = run_nuts(g, cfg);
  CHECK(column_mean(ds, col_name("pi", {0})) == doctest::Approx(0.21).epsilon(0.10));
  CHECK(column_mean(ds, col_name("pi", {1})) == doctest::Approx(0.50).epsilon(0.08));
  CHECK(column_mean(ds, col_name("pi", {2})) == doctest::Approx(0.80).epsilon(0.06));

  // All-negative categories concentrate near zero presence.
  std::vector<ProductObservation> zero;
  for (int i = 0; i < 50; ++i) zero.push_back({"z" + std::to_string(i), "a", false});
  for (int i = 0; i < 50; ++i) zero.push_back({"y" + std::to_string(i), "b", false});
  ModelGraph g0 = build_market_graph(zero, tree, "pcp", MarketSource::Pcp);
  DrawSet ds0 = run_nuts(g0, cfg);
  CHECK(column_mean(ds0, col_name("pi", {0})) < 0.07);
}

TEST_CASE("concentration graph recovers a flat pool's median") {
  std::vector<CategoryNode> nodes = {{"food", "", 1, "food"},
                                     {"cat", "food", 2, "cat"},
                                     {"leaf", "cat", 3, "leaf"}};
  CategoryTree tree(nodes);
  std::vector<ConcentrationObservation> obs;
  for (int i = 0; i < 12; ++i) obs.push_back({"p" + std::to_string(i), "leaf", 10.0, {}});
  ModelGraph g = build_food_concentration_graph(obs, tree, "food");
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 600;
  cfg.samples = 1200;
  cfg.seed = 33;
  cfg.threads = 1;
  DrawSet ds = run_nuts(g, cfg);
  const int med = ds.column_index(col_name("median", {0}));
  const int cat = ds.column_index(col_name("cat_median", {0}));
  REQUIRE(med >= 0);
  REQUIRE(cat >= 0);
  std::vector<double> m(ds.draws.col(med).data(), ds.draws.col(med).data() + ds.draws.rows());
  std::sort(m.begin(), m.end());
  CHECK(m[m.size() / 2] == doctest::Approx(10.0).epsilon(0.15));
  // With one mid node and one leaf the two medians track each other.
  CHECK(std::abs(ds.draws.col(cat).mean() - ds.draws.col(med).mean()) <
        0.35 * ds.draws.col(med).mean());
}
