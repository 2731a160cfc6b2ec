#include <doctest.h>

#include <cmath>

#include "aggrex/builders.hpp"
#include "aggrex/errors.hpp"
#include "test_support.hpp"

using namespace aggrex;
using aggrex_test::max_grad_error;
using aggrex_test::synth_data;

namespace {

ModelGraph build(const char* which, bool include_likelihood = true) {
  const auto& d = synth_data();
  std::string w = which;
  if (w == "food") return build_food_graph(d.survey, d.tree, d.cfg, d.cov, include_likelihood);
  if (w == "supplements")
    return build_supplements_graph(d.survey, d.tree, d.cfg, d.cov, include_likelihood);
  if (w == "medicines")
    return build_medicines_graph(d.medicines, d.cfg, d.cov, include_likelihood);
  if (w == "market_food")
    return build_market_graph(d.products, d.tree, d.cfg.food_root, MarketSource::Food);
  if (w == "market_supplements")
    return build_market_graph(d.products, d.tree, d.cfg.supplement_root, MarketSource::Supplements);
  if (w == "market_pcp")
    return build_market_graph(d.products, d.tree, d.cfg.pcp_root, MarketSource::Pcp);
  return build_food_concentration_graph(d.concentrations, d.tree, d.cfg.food_root);
}

}  // namespace

TEST_CASE("analytic gradients match finite differences on every graph") {
  for (const char* name : {"food", "supplements", "medicines", "market_food",
                           "market_supplements", "market_pcp", "conc_food"}) {
    ModelGraph g = build(name);
    CAPTURE(name);
    CHECK(max_grad_error(g, 1234, 3) < 1e-4);
  }
}

TEST_CASE("prior-only graphs drop data terms but keep finite gradients") {
  for (const char* name : {"food", "supplements", "medicines"}) {
    ModelGraph g = build(name, false);
    CAPTURE(name);
    CHECK(g.bernoulli.y.empty());
    CHECK(g.boxcox_obs.amount.empty());
    CHECK(g.mixture.v_const.empty());
    CHECK(max_grad_error(g, 99, 2) < 1e-4);
  }
}

TEST_CASE("log posterior is finite at random points") {
  ModelGraph g = build("food");
  Eigen::VectorXd u = Eigen::VectorXd::Constant(g.dim(), 0.3);
  CHECK(std::isfinite(g.log_posterior(u)));
}
