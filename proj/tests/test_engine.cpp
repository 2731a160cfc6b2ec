#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "aggrex/apportion.hpp"
#include "aggrex/builders.hpp"
#include "aggrex/csv.hpp"
#include "aggrex/errors.hpp"
#include "aggrex/pseudopop.hpp"
#include "test_support.hpp"

using namespace aggrex;
using aggrex_test::scratch_dir;
using aggrex_test::synth_data;

namespace {

DrawSet constant_draws(const std::string& graph,
                       const std::vector<std::pair<std::string, double>>& cols, int rows = 1) {
  DrawSet ds;
  ds.graph_name = graph;
  ds.chains = 1;
  ds.samples_per_chain = rows;
  ds.draws.resize(rows, static_cast<int>(cols.size()));
  int c = 0;
  for (const auto& [name, value] : cols) {
    ds.names.push_back(name);
    ds.draws.col(c++).setConstant(value);
  }
  return ds;
}

// A fully pinned-down world: one food category, one supplement mixture
// component, two personal-care categories, three single-level predictors.
// Every random input is either degenerate or drawn from a single-value pool,
// so each source column has a closed-form value.
struct TinyWorld {
  SimBundle bundle;
  StratumTable census;
  ScenarioConfig sc;
  DrawSet food, market_food, conc_food, supp, market_supp, med, market_pcp;

  explicit TinyWorld(long long population = 40,
                     std::vector<Stratum> strata = {{"30-40", "female", "north", 1}})
      : census(std::move(strata)) {
    bundle.predictors = {"age_group", "gender", "region"};
    bundle.levels = {{"30-40", "6-11"}, {"female"}, {"north"}};
    for (const auto& s : census.strata()) bundle.census.push_back(s);

    bundle.food_categories = {"fruit"};
    bundle.food_conc_index = {0};
    bundle.food_market_index = {0};

    bundle.supp_conc_pool = {500.0, 500.0};
    bundle.supp_count_pool["pooled"] = {4, 4};

    bundle.pcp_categories = {"tp", "lb"};
    bundle.pcp_labels = {"toothpaste", "lip balm"};
    bundle.pcp_market_index = {0, 1};
    for (const char* age : {"30-40", "6-11"})
      for (const char* cat : {"tp", "lb"})
        bundle.pcp_constants.push_back({cat, age, "female", 1.0, 1.0});
    bundle.pcp_conc_pools = {{1.0}, {1.0}};

    sc.population_total = population;

    food = constant_draws(
        "food", {{"lambda", 1.0},
                 {"sigma_aw", 0.0},
                 {col_name("eta0", {0}), 0.0},
                 {col_name("gamma0", {0}), 1.0},
                 {col_name("subj_sd", {0, 0}), 0.0},
                 {col_name("subj_sd", {0, 1}), 0.0},
                 {col_name("subj_corr", {0}), 0.0},
                 {col_name("eta", {0, 0, 0}), 0.0},
                 {col_name("eta", {0, 0, 1}), 0.0},
                 {col_name("eta", {0, 1, 0}), 0.0},
                 {col_name("eta", {0, 2, 0}), 0.0},
                 {col_name("gamma", {0, 0, 0}), 0.0},
                 {col_name("gamma", {0, 0, 1}), 0.0},
                 {col_name("gamma", {0, 1, 0}), 0.0},
                 {col_name("gamma", {0, 2, 0}), 0.0}});
    conc_food = constant_draws("conc_food", {{col_name("cat_median", {0}), 100.0}});
    market_food = constant_draws("market_food", {{col_name("pi", {0}), 1.0}});
    supp = constant_draws(
        "supplements", {{"alpha0", 0.0},
                        {"sigma_tau", 0.0},
                        {col_name("theta", {0}), 1.0},
                        {col_name("rho0", {0}), std::log(0.02)},
                        {col_name("sigma_s", {0}), 0.0},
                        {col_name("alpha", {0, 0}), 0.0},
                        {col_name("alpha", {0, 1}), 0.0},
                        {col_name("alpha", {1, 0}), 0.0},
                        {col_name("alpha", {2, 0}), 0.0},
                        {col_name("rho", {0, 0}), 0.0},
                        {col_name("rho", {0, 1}), 0.0},
                        {col_name("rho", {1, 0}), 0.0},
                        {col_name("rho", {2, 0}), 0.0}});
    market_supp = constant_draws("market_supplements", {{"pi", 1.0}});
    med = constant_draws(
        "medicines", {{"freq0", 40.0},
                      {"phi0", 1.5},
                      {"lambda", 1.0},
                      {"sigma_aw", 0.0},
                      {col_name("freq", {0, 0}), 0.0},
                      {col_name("freq", {0, 1}), 0.0},
                      {col_name("freq", {1, 0}), 0.0},
                      {col_name("freq", {2, 0}), 0.0},
                      {col_name("phi", {0, 0}), 0.0},
                      {col_name("phi", {0, 1}), 0.0},
                      {col_name("phi", {1, 0}), 0.0},
                      {col_name("phi", {2, 0}), 0.0}});
    market_pcp = constant_draws(
        "market_pcp", {{col_name("pi", {0}), 1.0}, {col_name("pi", {1}), 1.0}});
  }

  GraphDraws graphs() const {
    GraphDraws g;
    g.food = &food;
    g.market_food = &market_food;
    g.conc_food = &conc_food;
    g.supplements = &supp;
    g.market_supplements = &market_supp;
    g.medicines = &med;
    g.market_pcp = &market_pcp;
    return g;
  }
};

std::vector<ExposureRow> run(const TinyWorld& w, const ScenarioConfig& sc,
                             std::uint64_t seed = 7, int threads = 1,
                             SimReport* report = nullptr) {
  std::vector<ExposureRow> rows;
  SimReport r = simulate_population(w.graphs(), w.bundle, w.census, sc, seed,
                                    [&](const ExposureRow& row) { rows.push_back(row); }, threads);
  if (report) *report = r;
  return rows;
}

}  // namespace

TEST_CASE("pinned-down world reproduces every source column in closed form") {
  TinyWorld w;
  SimReport report;
  const auto rows = run(w, w.sc, 7, 1, &report);

  CHECK(report.iterations == 1);
  CHECK(report.individuals == 40);
  CHECK(report.rows == 40);
  CHECK(report.clamps.count == 0);
  // Boundary modes per individual: one food market, one supplement market,
  // one medicine frequency, and usage + market for both pcp categories.
  CHECK(report.degenerate_pert == 7 * 40);
  REQUIRE(rows.size() == 40);

  for (const ExposureRow& r : rows) {
    // amount 2 (inverse power transform of 1 at lambda 1), frequency 1/2,
    // concentration 100 mg/kg, full market share, mg -> g.
    CHECK(r.source[0] == doctest::Approx(2.0 * 0.5 * 100.0 * 1e-3).epsilon(1e-12));
    // amount exp(log 0.02), frequency 1/2, mean of four draws from a
    // single-valued 500 mg/kg pool.
    CHECK(r.source[1] == doctest::Approx(0.02 * 0.5 * 500.0 * 1e-3).epsilon(1e-12));
    // amount 2.5, frequency pinned at 1 through the logistic plateau.
    CHECK(r.source[2] == doctest::Approx(2.5 * 1e-6).epsilon(1e-12));
    // toothpaste keeps 5%, lip balm everything; both use median 1 g/kg/day,
    // usage 1, single-valued unit pool.
    CHECK(r.source[3] == doctest::Approx(1.05e-6).epsilon(1e-12));
    CHECK(r.aggregated ==
          doctest::Approx(r.source[0] + r.source[1] + r.source[2] + r.source[3]).epsilon(1e-15));
    CHECK(r.iteration == 0);
    CHECK(r.stratum == 0);
  }
}

TEST_CASE("child strata draw the random toothpaste retention range") {
  TinyWorld w(60, {{"6-11", "female", "north", 1}});
  const auto rows = run(w, w.sc);
  REQUIRE(rows.size() == 60);
  double lo = 2.0, hi = -1.0;
  for (const ExposureRow& r : rows) {
    // lip balm contributes exactly 1e-6; toothpaste adds retention * 1e-6
    // with retention drawn uniformly from the child range.
    const double retention = (r.source[3] - 1e-6) / 1e-6;
    CHECK(retention > 0.26);
    CHECK(retention < 0.67);
    lo = std::min(lo, retention);
    hi = std::max(hi, retention);
  }
  CHECK(hi - lo > 0.05);  // the draw varies across individuals
}

TEST_CASE("disabling the banned sources zeroes them and leaves the rest bit-identical") {
  TinyWorld w;
  const auto pre = run(w, w.sc);

  ScenarioConfig banned = w.sc;
  banned.enabled[static_cast<int>(Source::Food)] = false;
  banned.enabled[static_cast<int>(Source::Supplements)] = false;
  const auto post = run(w, banned);

  REQUIRE(pre.size() == post.size());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    CHECK(post[i].source[0] == 0.0);
    CHECK(post[i].source[1] == 0.0);
    CHECK(post[i].source[2] == pre[i].source[2]);
    CHECK(post[i].source[3] == pre[i].source[3]);
    CHECK(post[i].aggregated <= pre[i].aggregated);
  }
}

TEST_CASE("worst-case market assumption dominates the fitted market share") {
  TinyWorld w;
  // Interior market shares so the presence draws actually vary.
  w.market_food.draws.col(w.market_food.column_index(col_name("pi", {0}))).setConstant(0.6);
  w.market_supp.draws.col(w.market_supp.column_index("pi")).setConstant(0.45);
  w.market_pcp.draws.col(w.market_pcp.column_index(col_name("pi", {0}))).setConstant(0.3);
  w.market_pcp.draws.col(w.market_pcp.column_index(col_name("pi", {1}))).setConstant(0.8);

  const auto with_market = run(w, w.sc);
  ScenarioConfig off = w.sc;
  off.market_presence = false;
  const auto without = run(w, off);

  REQUIRE(with_market.size() == without.size());
  bool strictly_lower = false;
  for (std::size_t i = 0; i < with_market.size(); ++i) {
    for (int s = 0; s < 4; ++s) CHECK(with_market[i].source[s] <= without[i].source[s]);
    // Medicines carry no market factor.
    CHECK(with_market[i].source[2] == without[i].source[2]);
    CHECK(with_market[i].aggregated <= without[i].aggregated);
    strictly_lower = strictly_lower || with_market[i].aggregated < without[i].aggregated;
  }
  CHECK(strictly_lower);
}

TEST_CASE("nanoparticle fraction rescales the ingested sources only") {
  TinyWorld w;
  const auto plain = run(w, w.sc);
  ScenarioConfig nano = w.sc;
  nano.nano = true;
  const auto scaled = run(w, nano);

  REQUIRE(plain.size() == scaled.size());
  double lo = 2.0, hi = -1.0;
  for (std::size_t i = 0; i < plain.size(); ++i) {
    const double frac = scaled[i].source[0] / plain[i].source[0];
    CHECK(frac > 0.03);
    CHECK(frac < 0.41);
    CHECK(scaled[i].source[1] ==
          doctest::Approx(plain[i].source[1] * frac).epsilon(1e-12));
    CHECK(scaled[i].source[2] ==
          doctest::Approx(plain[i].source[2] * frac).epsilon(1e-12));
    CHECK(scaled[i].source[3] == plain[i].source[3]);
    lo = std::min(lo, frac);
    hi = std::max(hi, frac);
  }
  CHECK(hi - lo > 0.01);
}

TEST_CASE("output is identical across thread counts and ordered by draw") {
  TinyWorld w(47, {{"30-40", "female", "north", 10},
                   {"6-11", "female", "north", 20},
                   {"61+", "female", "north", 17}});
  w.bundle.levels[0] = {"30-40", "6-11", "61+"};
  for (const char* cat : {"tp", "lb"})
    w.bundle.pcp_constants.push_back({cat, "61+", "female", 1.0, 1.0});

  // Several joint draws with per-draw variation.
  const int J = 6;
  auto widen = [&](DrawSet& ds) {
    const Eigen::MatrixXd one = ds.draws;
    ds.draws = one.replicate(J, 1);
    ds.samples_per_chain = J;
  };
  for (DrawSet* ds : {&w.food, &w.market_food, &w.conc_food, &w.supp, &w.market_supp, &w.med,
                      &w.market_pcp})
    widen(*ds);
  for (int j = 0; j < J; ++j) {
    w.food.draws(j, w.food.column_index(col_name("gamma0", {0}))) = 1.0 + 0.05 * j;
    w.conc_food.draws(j, w.conc_food.column_index(col_name("cat_median", {0}))) = 100.0 + j;
  }

  SimReport rep1, rep4;
  const auto seq = run(w, w.sc, 99, 1, &rep1);
  const auto par = run(w, w.sc, 99, 4, &rep4);

  CHECK(rep1.rows == static_cast<long long>(J) * 47);
  CHECK(rep1.rows == rep4.rows);
  CHECK(rep1.clamps.count == rep4.clamps.count);
  CHECK(rep1.degenerate_pert == rep4.degenerate_pert);
  REQUIRE(seq.size() == par.size());
  long long last_iter = 0;
  int last_stratum = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(seq[i].iteration == par[i].iteration);
    CHECK(seq[i].stratum == par[i].stratum);
    for (int s = 0; s < 4; ++s) CHECK(seq[i].source[s] == par[i].source[s]);
    CHECK(seq[i].aggregated == par[i].aggregated);
    // (iteration, stratum) never decreases in the emitted order.
    CHECK(seq[i].iteration >= last_iter);
    if (seq[i].iteration == last_iter) CHECK(seq[i].stratum >= last_stratum);
    last_iter = seq[i].iteration;
    last_stratum = seq[i].stratum;
  }

  // A different seed moves the continuous columns.
  const auto other = run(w, w.sc, 100);
  bool moved = false;
  for (std::size_t i = 0; i < seq.size() && !moved; ++i)
    moved = seq[i].aggregated != other[i].aggregated;
  CHECK(moved);
}

TEST_CASE("bad simulation inputs are rejected with the specific error kind") {
  TinyWorld w;

  SUBCASE("missing draw matrix") {
    GraphDraws g = w.graphs();
    g.food = nullptr;
    CHECK_THROWS_WITH_AS(
        simulate_population(g, w.bundle, w.census, w.sc, 1, [](const ExposureRow&) {}),
        doctest::Contains("no draws supplied"), Error);
  }

  SUBCASE("draw count mismatch") {
    TinyWorld tall;
    tall.conc_food = constant_draws("conc_food", {{col_name("cat_median", {0}), 100.0}}, 3);
    CHECK_THROWS_WITH_AS(run(tall, tall.sc), doctest::Contains("3 draws"), Error);
  }

  SUBCASE("nothing enabled") {
    ScenarioConfig none = w.sc;
    for (int s = 0; s < 4; ++s) none.enabled[s] = false;
    CHECK_THROWS_WITH_AS(run(w, none), doctest::Contains("nothing to simulate"), Error);
  }

  SUBCASE("pcp alone without the market factor has no joint draw count") {
    ScenarioConfig only_pcp = w.sc;
    only_pcp.enabled[static_cast<int>(Source::Food)] = false;
    only_pcp.enabled[static_cast<int>(Source::Supplements)] = false;
    only_pcp.enabled[static_cast<int>(Source::Medicines)] = false;
    only_pcp.market_presence = false;
    CHECK_THROWS_AS(run(w, only_pcp), Error);
  }

  SUBCASE("census level unseen at fit time") {
    TinyWorld odd(10, {{"99+", "female", "north", 1}});
    CHECK_THROWS_WITH_AS(run(odd, odd.sc), doctest::Contains("99+"), Error);
  }

  SUBCASE("supplement concentration pool empty while counts are positive") {
    TinyWorld dry;
    dry.bundle.supp_conc_pool.clear();
    ScenarioConfig only_supp = dry.sc;
    only_supp.enabled[static_cast<int>(Source::Food)] = false;
    only_supp.enabled[static_cast<int>(Source::Medicines)] = false;
    only_supp.enabled[static_cast<int>(Source::Pcp)] = false;
    only_supp.market_presence = false;
    CHECK_THROWS_WITH_AS(run(dry, only_supp), doctest::Contains("pool is empty"), Error);
  }

  SUBCASE("missing stratum count pool") {
    TinyWorld lost;
    lost.bundle.supp_count_pool.clear();
    CHECK_THROWS_WITH_AS(run(lost, lost.sc), doctest::Contains("count pool"), Error);
  }
}

TEST_CASE("exposure csv writer escapes strata and round trips values") {
  const std::string dir = scratch_dir("exposure_csv");
  const std::string path = dir + "/rows.csv";
  StratumTable census(std::vector<Stratum>{{"0-5", "fe,male", "no\"rth", 3}});

  ExposureRow row;
  row.iteration = 2;
  row.stratum = 0;
  row.source[0] = 0.1;
  row.source[1] = 1.0 / 3.0;
  row.source[2] = 2.5e-6;
  row.source[3] = 0.0;
  row.aggregated = row.source[0] + row.source[1] + row.source[2];
  {
    ExposureCsvWriter writer(path, census);
    writer(row);
    row.iteration = 3;
    writer(row);
    writer.close();
  }

  CsvTable t = read_csv(path);
  REQUIRE(t.rows.size() == 2);
  CHECK(std::string(ExposureCsvWriter::header())
            .rfind("iteration,stratum_age,stratum_gender,stratum_region", 0) == 0);
  auto field = [&](std::size_t r, const char* name) -> const std::string& {
    return t.rows[r][static_cast<std::size_t>(t.require_col(name))];
  };
  CHECK(field(0, "iteration") == "2");
  CHECK(field(1, "iteration") == "3");
  CHECK(field(0, "stratum_gender") == "fe,male");
  CHECK(field(0, "stratum_region") == "no\"rth");
  // %.17g output parses back to the exact double.
  CHECK(parse_double(t, 0, t.require_col("supplements")) == 1.0 / 3.0);
  CHECK(parse_double(t, 0, t.require_col("medicines")) == 2.5e-6);
  CHECK(parse_double(t, 0, t.require_col("aggregated")) == row.aggregated);
}

TEST_CASE("sim bundle built from training data round trips through json") {
  const auto& sd = synth_data();
  std::vector<std::vector<std::string>> levels;
  for (int k = 0; k < sd.cov.predictors(); ++k) levels.push_back(sd.cov.levels(k));
  SimBundle b = build_sim_bundle(sd.cfg, sd.cov.names(), levels, sd.census, sd.survey,
                                 sd.products, sd.tree, sd.concentrations, sd.pcp);

  CHECK(b.predictors == sd.cov.names());
  CHECK(b.food_categories == survey_categories(sd.survey, sd.tree, sd.cfg.food_root));
  REQUIRE(b.food_conc_index.size() == b.food_categories.size());
  REQUIRE(b.food_market_index.size() == b.food_categories.size());
  const auto food_market = product_categories(sd.products, sd.tree, sd.cfg.food_root);
  for (std::size_t g = 0; g < b.food_categories.size(); ++g) {
    REQUIRE(b.food_market_index[g] >= 0);
    CHECK(food_market[static_cast<std::size_t>(b.food_market_index[g])] == b.food_categories[g]);
  }
  CHECK_FALSE(b.supp_conc_pool.empty());
  REQUIRE(b.supp_count_pool.count("pooled") == 1);
  CHECK_FALSE(b.supp_count_pool.at("pooled").empty());
  CHECK(b.pcp_categories == product_categories(sd.products, sd.tree, sd.cfg.pcp_root));
  REQUIRE(b.pcp_conc_pools.size() == b.pcp_categories.size());
  CHECK(SimBundle::pool_key("a", "b", "c") == "a|b|c");

  const std::string path = scratch_dir("bundle") + "/sim_bundle.json";
  write_sim_bundle(path, b);
  SimBundle r = read_sim_bundle(path);
  CHECK(r.predictors == b.predictors);
  CHECK(r.levels == b.levels);
  REQUIRE(r.census.size() == b.census.size());
  for (std::size_t i = 0; i < b.census.size(); ++i) {
    CHECK(r.census[i].age_group == b.census[i].age_group);
    CHECK(r.census[i].gender == b.census[i].gender);
    CHECK(r.census[i].region == b.census[i].region);
    CHECK(r.census[i].population_count == b.census[i].population_count);
  }
  CHECK(r.food_categories == b.food_categories);
  CHECK(r.food_conc_index == b.food_conc_index);
  CHECK(r.food_market_index == b.food_market_index);
  CHECK(r.supp_conc_pool == b.supp_conc_pool);
  CHECK(r.supp_count_pool == b.supp_count_pool);
  CHECK(r.pcp_categories == b.pcp_categories);
  CHECK(r.pcp_labels == b.pcp_labels);
  CHECK(r.pcp_market_index == b.pcp_market_index);
  REQUIRE(r.pcp_constants.size() == b.pcp_constants.size());
  for (std::size_t i = 0; i < b.pcp_constants.size(); ++i) {
    CHECK(r.pcp_constants[i].category == b.pcp_constants[i].category);
    CHECK(r.pcp_constants[i].usage_probability == b.pcp_constants[i].usage_probability);
    CHECK(r.pcp_constants[i].median_amount_g_per_kg_day ==
          b.pcp_constants[i].median_amount_g_per_kg_day);
  }
  CHECK(r.pcp_conc_pools == b.pcp_conc_pools);
}

TEST_CASE("simulation runs end to end on the training-data bundle") {
  const auto& sd = synth_data();
  std::vector<std::vector<std::string>> levels;
  for (int k = 0; k < sd.cov.predictors(); ++k) levels.push_back(sd.cov.levels(k));
  SimBundle b = build_sim_bundle(sd.cfg, sd.cov.names(), levels, sd.census, sd.survey,
                                 sd.products, sd.tree, sd.concentrations, sd.pcp);

  // Two synthetic joint draws per graph; values near the prior center.
  auto fake = [&](const char* which) {
    ModelGraph g;
    if (std::string(which) == "food")
      g = build_food_graph(sd.survey, sd.tree, sd.cfg, sd.cov, true);
    else if (std::string(which) == "supplements")
      g = build_supplements_graph(sd.survey, sd.tree, sd.cfg, sd.cov, true);
    else if (std::string(which) == "medicines")
      g = build_medicines_graph(sd.medicines, sd.cfg, sd.cov, true);
    else if (std::string(which) == "conc_food")
      g = build_food_concentration_graph(sd.concentrations, sd.tree, sd.cfg.food_root);
    else if (std::string(which) == "market_food")
      g = build_market_graph(sd.products, sd.tree, sd.cfg.food_root, MarketSource::Food);
    else if (std::string(which) == "market_supplements")
      g = build_market_graph(sd.products, sd.tree, sd.cfg.supplement_root,
                             MarketSource::Supplements);
    else
      g = build_market_graph(sd.products, sd.tree, sd.cfg.pcp_root, MarketSource::Pcp);
    DrawSet ds;
    ds.graph_name = g.name;
    ds.chains = 1;
    ds.samples_per_chain = 2;
    for (const auto& r : g.report) ds.names.push_back(r.name);
    Eigen::VectorXd u = Eigen::VectorXd::Constant(g.dim(), 0.1);
    Eigen::VectorXd buf(g.buffer_dim());
    g.fill_buffer(u, buf);
    ds.draws.resize(2, static_cast<int>(ds.names.size()));
    for (std::size_t c = 0; c < g.report.size(); ++c) {
      ds.draws(0, static_cast<int>(c)) = buf[g.report[c].buf_index];
      ds.draws(1, static_cast<int>(c)) = buf[g.report[c].buf_index];
    }
    return ds;
  };
  DrawSet food = fake("food"), supp = fake("supplements"), medi = fake("medicines"),
          conc = fake("conc_food"), mf = fake("market_food"), msup = fake("market_supplements"),
          mp = fake("market_pcp");
  GraphDraws g;
  g.food = &food;
  g.supplements = &supp;
  g.medicines = &medi;
  g.conc_food = &conc;
  g.market_food = &mf;
  g.market_supplements = &msup;
  g.market_pcp = &mp;

  ScenarioConfig sc;
  sc.population_total = 200;
  SimReport rep;
  long long count = 0;
  double total = 0.0;
  rep = simulate_population(g, b, sd.census, sc, 5, [&](const ExposureRow& r) {
    ++count;
    CHECK(r.aggregated >= 0.0);
    CHECK(std::isfinite(r.aggregated));
    total += r.aggregated;
  });
  CHECK(rep.rows == count);
  CHECK(rep.rows == 2 * 200);
  CHECK(total > 0.0);
}
