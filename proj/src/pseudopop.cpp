#include "aggrex/pseudopop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aggrex/apportion.hpp"
#include "aggrex/builders.hpp"
#include "aggrex/csv.hpp"
#include "aggrex/distributions.hpp"
#include "aggrex/errors.hpp"
#include "aggrex/rng.hpp"
#include "aggrex/transforms.hpp"

namespace aggrex {
namespace {

// Fixed child-stream ids. Every random decision owns a stream derived from
// (draw, stratum, individual), so toggling one source or the market factor
// leaves every other decision's randomness untouched.
constexpr std::uint64_t kFood = 1, kSupplements = 2, kMedicines = 3, kPcp = 4, kNano = 5;
constexpr std::uint64_t kSubj = 1, kAmount = 2, kMarket = 3;
constexpr std::uint64_t kSuppComponent = 1, kSuppAmount = 2, kSuppTau = 3, kSuppCount = 4,
                        kSuppConc = 5, kSuppMarket = 6;
constexpr std::uint64_t kMedAmount = 1, kMedFreq = 2;
constexpr std::uint64_t kPcpRetention = 1, kPcpFreq = 2, kPcpConc = 3, kPcpMarket = 4;

double normal(double mu, double sd, RngStream& rng) {
  return mu + sd * sample_standard_normal(rng);
}

double uniform(double lo, double hi, RngStream& rng) { return lo + (hi - lo) * rng.next_u01(); }

double inv_logit(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

int must_col(const DrawSet& ds, const std::string& name) {
  const int c = ds.column_index(name);
  if (c < 0)
    throw_data("MissingBlock",
               "draws for graph '" + ds.graph_name + "' lack column '" + name + "'");
  return c;
}

const DrawSet& must_graph(const DrawSet* ds, const char* which) {
  if (ds == nullptr) throw_data("MissingBlock", std::string("no draws supplied for ") + which);
  return *ds;
}

// Column indices of one covariate effect family, [predictor][level].
std::vector<std::vector<int>> bind_effects(const DrawSet& ds, const std::string& base, int g,
                                           const SimBundle& b) {
  std::vector<std::vector<int>> t(b.predictors.size());
  for (int k = 0; k < static_cast<int>(b.predictors.size()); ++k) {
    const int count = static_cast<int>(b.levels[static_cast<std::size_t>(k)].size());
    for (int l = 0; l < count; ++l)
      t[static_cast<std::size_t>(k)].push_back(
          must_col(ds, g >= 0 ? col_name(base, {g, k, l}) : col_name(base, {k, l})));
  }
  return t;
}

int indexed_count(const DrawSet& ds, const std::string& base) {
  int n = 0;
  while (ds.column_index(col_name(base, {n})) >= 0) ++n;
  return n;
}

struct FoodBind {
  const DrawSet* ds = nullptr;
  const DrawSet* market = nullptr;
  const DrawSet* conc = nullptr;
  int lambda = -1, sigma = -1;
  std::vector<int> eta0, gamma0, sd0, sd1, corr, pi, conc_med;
  std::vector<std::vector<std::vector<int>>> eta, gamma;  // [g][k][l]
};

struct SuppBind {
  const DrawSet* ds = nullptr;
  const DrawSet* market = nullptr;
  int alpha0 = -1, sigma_tau = -1, pi = -1;
  std::vector<int> theta, rho0, sigma_s;
  std::vector<std::vector<int>> alpha, rho;
};

struct MedBind {
  const DrawSet* ds = nullptr;
  int freq0 = -1, phi0 = -1, lambda = -1, sigma = -1;
  std::vector<std::vector<int>> freq, phi;
};

struct PcpBind {
  const DrawSet* market = nullptr;
  std::vector<int> pi;
};

// Stratum-constant pieces resolved once per run.
struct StratumCtx {
  std::vector<int> lev;              // level index per predictor
  bool child = false;                // age band at or below the cutoff
  const std::vector<int>* counts = nullptr;  // supplement count pool
  std::vector<double> pcp_usage;     // per pcp category
  std::vector<double> pcp_median;
  std::vector<double> pcp_retention;  // fixed factor; NaN marks a child draw
};

struct Bindings {
  FoodBind food;
  SuppBind supp;
  MedBind med;
  PcpBind pcp;
  long long rows = 0;  // joint posterior draws
};

const std::string& stratum_value(const Stratum& st, const std::string& predictor) {
  if (predictor == "age_group") return st.age_group;
  if (predictor == "gender") return st.gender;
  if (predictor == "region") return st.region;
  throw_data("UnknownLevel", "census strata carry no predictor '" + predictor + "'");
}

void check_rows(long long* rows, const DrawSet& ds) {
  const long long n = ds.draws.rows();
  if (n <= 0) throw_data("MissingBlock", "draws for graph '" + ds.graph_name + "' are empty");
  if (*rows == 0) *rows = n;
  if (*rows != n)
    throw_data("DrawCountMismatch", "graph '" + ds.graph_name + "' holds " + std::to_string(n) +
                                        " draws where " + std::to_string(*rows) + " were expected");
}

Bindings bind_all(const GraphDraws& draws, const SimBundle& b, const ScenarioConfig& sc) {
  Bindings out;
  if (sc.source_enabled(Source::Food)) {
    FoodBind& f = out.food;
    f.ds = &must_graph(draws.food, "food");
    f.conc = &must_graph(draws.conc_food, "food concentrations");
    check_rows(&out.rows, *f.ds);
    check_rows(&out.rows, *f.conc);
    f.lambda = must_col(*f.ds, "lambda");
    f.sigma = must_col(*f.ds, "sigma_aw");
    const int G = static_cast<int>(b.food_categories.size());
    for (int g = 0; g < G; ++g) {
      f.eta0.push_back(must_col(*f.ds, col_name("eta0", {g})));
      f.gamma0.push_back(must_col(*f.ds, col_name("gamma0", {g})));
      f.sd0.push_back(must_col(*f.ds, col_name("subj_sd", {g, 0})));
      f.sd1.push_back(must_col(*f.ds, col_name("subj_sd", {g, 1})));
      f.corr.push_back(must_col(*f.ds, col_name("subj_corr", {g})));
      f.eta.push_back(bind_effects(*f.ds, "eta", g, b));
      f.gamma.push_back(bind_effects(*f.ds, "gamma", g, b));
      f.conc_med.push_back(
          must_col(*f.conc, col_name("cat_median", {b.food_conc_index[static_cast<std::size_t>(g)]})));
    }
    if (sc.market_presence) {
      f.market = &must_graph(draws.market_food, "food market");
      check_rows(&out.rows, *f.market);
      for (int g = 0; g < G; ++g)
        f.pi.push_back(
            must_col(*f.market, col_name("pi", {b.food_market_index[static_cast<std::size_t>(g)]})));
    }
  }

  if (sc.source_enabled(Source::Supplements)) {
    SuppBind& s = out.supp;
    s.ds = &must_graph(draws.supplements, "supplements");
    check_rows(&out.rows, *s.ds);
    s.alpha0 = must_col(*s.ds, "alpha0");
    s.sigma_tau = must_col(*s.ds, "sigma_tau");
    s.alpha = bind_effects(*s.ds, "alpha", -1, b);
    s.rho = bind_effects(*s.ds, "rho", -1, b);
    const int Z = indexed_count(*s.ds, "theta");
    if (Z == 0) throw_data("MissingBlock", "supplement draws lack mixture columns");
    for (int z = 0; z < Z; ++z) {
      s.theta.push_back(must_col(*s.ds, col_name("theta", {z})));
      s.rho0.push_back(must_col(*s.ds, col_name("rho0", {z})));
      s.sigma_s.push_back(must_col(*s.ds, col_name("sigma_s", {z})));
    }
    if (sc.market_presence) {
      s.market = &must_graph(draws.market_supplements, "supplement market");
      check_rows(&out.rows, *s.market);
      s.pi = must_col(*s.market, "pi");
    }
  }

  if (sc.source_enabled(Source::Medicines)) {
    MedBind& m = out.med;
    m.ds = &must_graph(draws.medicines, "medicines");
    check_rows(&out.rows, *m.ds);
    m.freq0 = must_col(*m.ds, "freq0");
    m.phi0 = must_col(*m.ds, "phi0");
    m.lambda = must_col(*m.ds, "lambda");
    m.sigma = must_col(*m.ds, "sigma_aw");
    m.freq = bind_effects(*m.ds, "freq", -1, b);
    m.phi = bind_effects(*m.ds, "phi", -1, b);
  }

  if (sc.source_enabled(Source::Pcp) && sc.market_presence) {
    PcpBind& p = out.pcp;
    p.market = &must_graph(draws.market_pcp, "pcp market");
    check_rows(&out.rows, *p.market);
    for (std::size_t g = 0; g < b.pcp_categories.size(); ++g)
      p.pi.push_back(must_col(*p.market, col_name("pi", {b.pcp_market_index[g]})));
  }
  if (out.rows == 0) throw_data("MissingBlock", "no source is enabled, nothing to simulate");
  return out;
}

std::vector<StratumCtx> bind_strata(const StratumTable& census, const SimBundle& b,
                                    const ScenarioConfig& sc) {
  std::vector<StratumCtx> out;
  const bool need_levels = sc.source_enabled(Source::Food) ||
                           sc.source_enabled(Source::Supplements) ||
                           sc.source_enabled(Source::Medicines);
  std::optional<PcpConstants> constants;
  if (sc.source_enabled(Source::Pcp)) constants.emplace(b.pcp_constants);
  for (const Stratum& st : census.strata()) {
    StratumCtx ctx;
    if (need_levels) {
      for (std::size_t k = 0; k < b.predictors.size(); ++k) {
        const std::string& value = stratum_value(st, b.predictors[k]);
        const auto& lv = b.levels[k];
        const auto it = std::lower_bound(lv.begin(), lv.end(), value);
        if (it == lv.end() || *it != value)
          throw_data("UnknownLevel", "census level '" + value + "' for predictor '" +
                                         b.predictors[k] + "' was not seen at fit time");
        ctx.lev.push_back(static_cast<int>(it - lv.begin()));
      }
    }
    if (sc.source_enabled(Source::Supplements)) {
      const auto it = b.supp_count_pool.find(SimBundle::pool_key(st.age_group, st.gender, st.region));
      if (it != b.supp_count_pool.end() && !it->second.empty()) {
        ctx.counts = &it->second;
      } else {
        const auto pooled = b.supp_count_pool.find("pooled");
        if (pooled == b.supp_count_pool.end() || pooled->second.empty())
          throw_data("EmptyPool", "no supplement count pool covers stratum " +
                                      SimBundle::pool_key(st.age_group, st.gender, st.region));
        ctx.counts = &pooled->second;
      }
    }
    if (sc.source_enabled(Source::Pcp)) {
      ctx.child = is_child_age_band(st.age_group, sc.child_age_cutoff);
      for (std::size_t g = 0; g < b.pcp_categories.size(); ++g) {
        const PcpConstantRow& row =
            constants->lookup(b.pcp_categories[g], st.age_group, st.gender);
        ctx.pcp_usage.push_back(row.usage_probability);
        ctx.pcp_median.push_back(row.median_amount_g_per_kg_day);
        const std::string& label = b.pcp_labels[g];
        if (ctx.child && label == sc.child_random_label) {
          ctx.pcp_retention.push_back(std::nan(""));
        } else {
          const auto it = sc.retention.find(label);
          ctx.pcp_retention.push_back(it != sc.retention.end() ? it->second : 1.0);
        }
      }
    }
    out.push_back(std::move(ctx));
  }
  return out;
}

double effect_sum(const Eigen::MatrixXd& d, long long j,
                  const std::vector<std::vector<int>>& cols, const std::vector<int>& lev) {
  double total = 0.0;
  for (std::size_t k = 0; k < cols.size(); ++k)
    total += d(j, cols[k][static_cast<std::size_t>(lev[k])]);
  return total;
}

// Draw-and-stratum dependent values hoisted out of the individual loop.
struct IterCtx {
  // food
  double lambda = 0.0, sigma = 0.0;
  std::vector<double> eta_lin, gamma_lin, sd0, sd1, corr, pi, conc;
  // supplements
  double alpha_lin = 0.0, sigma_tau = 0.0, rho_lin = 0.0, s_pi = 0.0;
  std::vector<double> theta, rho0, sigma_s;
  // medicines
  double m_pi = 0.0, phi_lin = 0.0, m_lambda = 0.0, m_sigma = 0.0;
  // pcp
  std::vector<double> p_pi;
};

void fill_iter_ctx(const Bindings& bn, const ScenarioConfig& sc, long long j,
                   const StratumCtx& st, IterCtx* c) {
  if (sc.source_enabled(Source::Food)) {
    const Eigen::MatrixXd& d = bn.food.ds->draws;
    const std::size_t G = bn.food.eta0.size();
    c->lambda = d(j, bn.food.lambda);
    c->sigma = d(j, bn.food.sigma);
    c->eta_lin.resize(G);
    c->gamma_lin.resize(G);
    c->sd0.resize(G);
    c->sd1.resize(G);
    c->corr.resize(G);
    c->pi.assign(G, 1.0);
    c->conc.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
      c->eta_lin[g] = d(j, bn.food.eta0[g]) + effect_sum(d, j, bn.food.eta[g], st.lev);
      c->gamma_lin[g] = d(j, bn.food.gamma0[g]) + effect_sum(d, j, bn.food.gamma[g], st.lev);
      c->sd0[g] = d(j, bn.food.sd0[g]);
      c->sd1[g] = d(j, bn.food.sd1[g]);
      c->corr[g] = d(j, bn.food.corr[g]);
      c->conc[g] = bn.food.conc->draws(j, bn.food.conc_med[g]);
      if (bn.food.market) c->pi[g] = bn.food.market->draws(j, bn.food.pi[g]);
    }
  }
  if (sc.source_enabled(Source::Supplements)) {
    const Eigen::MatrixXd& d = bn.supp.ds->draws;
    const std::size_t Z = bn.supp.theta.size();
    c->alpha_lin = d(j, bn.supp.alpha0) + effect_sum(d, j, bn.supp.alpha, st.lev);
    c->sigma_tau = d(j, bn.supp.sigma_tau);
    c->rho_lin = effect_sum(d, j, bn.supp.rho, st.lev);
    c->theta.resize(Z);
    c->rho0.resize(Z);
    c->sigma_s.resize(Z);
    for (std::size_t z = 0; z < Z; ++z) {
      c->theta[z] = d(j, bn.supp.theta[z]);
      c->rho0[z] = d(j, bn.supp.rho0[z]);
      c->sigma_s[z] = d(j, bn.supp.sigma_s[z]);
    }
    c->s_pi = bn.supp.market ? bn.supp.market->draws(j, bn.supp.pi) : 1.0;
  }
  if (sc.source_enabled(Source::Medicines)) {
    const Eigen::MatrixXd& d = bn.med.ds->draws;
    c->m_pi = inv_logit(d(j, bn.med.freq0) + effect_sum(d, j, bn.med.freq, st.lev));
    c->phi_lin = d(j, bn.med.phi0) + effect_sum(d, j, bn.med.phi, st.lev);
    c->m_lambda = d(j, bn.med.lambda);
    c->m_sigma = d(j, bn.med.sigma);
  }
  if (sc.source_enabled(Source::Pcp)) {
    const std::size_t G = st.pcp_usage.size();
    c->p_pi.assign(G, 1.0);
    if (bn.pcp.market)
      for (std::size_t g = 0; g < G; ++g) c->p_pi[g] = bn.pcp.market->draws(j, bn.pcp.pi[g]);
  }
}

struct BlockStats {
  ClampCounter clamps;
  long long degenerate_pert = 0;
};

// PERT draw on [0,1] whose boundary modes collapse to a point mass.
double pert01(double mode, RngStream& rng, BlockStats* stats) {
  if (mode <= 0.0 || mode >= 1.0) {
    ++stats->degenerate_pert;
    return mode <= 0.0 ? 0.0 : 1.0;
  }
  return sample_pert_or_point(0.0, mode, 1.0, rng);
}

int categorical(const std::vector<double>& probs, RngStream& rng) {
  const double u = rng.next_u01();
  double acc = 0.0;
  for (std::size_t z = 0; z < probs.size(); ++z) {
    acc += probs[z];
    if (u < acc) return static_cast<int>(z);
  }
  return static_cast<int>(probs.size()) - 1;
}

void simulate_individual(const SimBundle& b, const ScenarioConfig& sc,
                         const StratumCtx& st, const IterCtx& c, const RngStream& base,
                         BlockStats* stats, ExposureRow* row) {
  double& fs = row->source[0];
  double& ss = row->source[1];
  double& ms = row->source[2];
  double& ps = row->source[3];
  fs = ss = ms = ps = 0.0;

  if (sc.source_enabled(Source::Food)) {
    const BoxCoxLambda lambda{c.lambda};
    const RngStream food = base.derive(kFood);
    for (std::size_t g = 0; g < c.eta_lin.size(); ++g) {
      const RngStream cs = food.derive(static_cast<std::uint64_t>(g));
      RngStream subj = cs.derive(kSubj);
      const double z0 = sample_standard_normal(subj);
      const double z1 = sample_standard_normal(subj);
      const double r = c.corr[g];
      const double ups = c.sd0[g] * z0;
      const double nu = c.sd1[g] * (r * z0 + std::sqrt(std::max(0.0, 1.0 - r * r)) * z1);
      const double mean = c.gamma_lin[g] + nu;
      RngStream amt = cs.derive(kAmount);
      double amount = 0.0;
      for (int t = 0; t < 100; ++t)
        amount += boxcox_inverse(normal(mean, c.sigma, amt), lambda, &stats->clamps);
      amount /= 100.0;
      const double freq = inv_logit(c.eta_lin[g] + ups);
      double market = 1.0;
      if (sc.market_presence) {
        RngStream ms_rng = cs.derive(kMarket);
        market = pert01(c.pi[g], ms_rng, stats);
      }
      fs += amount * freq * c.conc[g] * market * sc.scale(Source::Food);
    }
  }

  if (sc.source_enabled(Source::Supplements)) {
    const RngStream supp = base.derive(kSupplements);
    RngStream comp = supp.derive(kSuppComponent);
    const std::size_t z = static_cast<std::size_t>(categorical(c.theta, comp));
    RngStream amt = supp.derive(kSuppAmount);
    const double amount = std::exp(normal(c.rho0[z] + c.rho_lin, c.sigma_s[z], amt));
    RngStream tau_rng = supp.derive(kSuppTau);
    const double tau = normal(0.0, c.sigma_tau, tau_rng);
    const double freq = inv_logit(c.alpha_lin + tau);
    RngStream count_rng = supp.derive(kSuppCount);
    const int r = (*st.counts)[count_rng.next_below(st.counts->size())];
    double conc = 0.0;
    if (r > 0) {
      if (b.supp_conc_pool.empty())
        throw_data("EmptyPool", "supplement concentration pool is empty");
      RngStream conc_rng = supp.derive(kSuppConc);
      for (int t = 0; t < r; ++t)
        conc += b.supp_conc_pool[conc_rng.next_below(b.supp_conc_pool.size())];
      conc /= static_cast<double>(r);
    }
    double market = 1.0;
    if (sc.market_presence) {
      RngStream ms_rng = supp.derive(kSuppMarket);
      market = pert01(c.s_pi, ms_rng, stats);
    }
    ss = amount * freq * conc * market * sc.scale(Source::Supplements);
  }

  if (sc.source_enabled(Source::Medicines)) {
    const RngStream med = base.derive(kMedicines);
    RngStream amt = med.derive(kMedAmount);
    const double amount =
        boxcox_inverse(normal(c.phi_lin, c.m_sigma, amt), BoxCoxLambda{c.m_lambda}, &stats->clamps);
    RngStream freq_rng = med.derive(kMedFreq);
    const double freq = pert01(c.m_pi, freq_rng, stats);
    ms = amount * freq * sc.scale(Source::Medicines);
  }

  if (sc.source_enabled(Source::Pcp)) {
    const RngStream pcp = base.derive(kPcp);
    for (std::size_t g = 0; g < st.pcp_usage.size(); ++g) {
      const RngStream cs = pcp.derive(static_cast<std::uint64_t>(g));
      double e = st.pcp_retention[g];
      if (std::isnan(e)) {
        RngStream ret = cs.derive(kPcpRetention);
        e = uniform(sc.child_retention_lo, sc.child_retention_hi, ret);
      }
      const double amount = st.pcp_median[g] * e;
      RngStream freq_rng = cs.derive(kPcpFreq);
      const double freq = pert01(st.pcp_usage[g], freq_rng, stats);
      const auto& pool = b.pcp_conc_pools[g];
      if (pool.empty())
        throw_data("EmptyPool", "empty concentration pool for '" + b.pcp_categories[g] + "'");
      RngStream conc_rng = cs.derive(kPcpConc);
      const double conc = pool[conc_rng.next_below(pool.size())];
      double market = 1.0;
      if (sc.market_presence) {
        RngStream ms_rng = cs.derive(kPcpMarket);
        market = pert01(c.p_pi[g], ms_rng, stats);
      }
      ps += amount * freq * conc * market * sc.scale(Source::Pcp);
    }
  }

  if (sc.nano) {
    RngStream nano = base.derive(kNano);
    const double frac = uniform(sc.nano_lo, sc.nano_hi, nano);
    fs *= frac;
    ss *= frac;
    ms *= frac;
  }
  row->aggregated = fs + ss + ms + ps;
}

struct IterBlock {
  std::vector<ExposureRow> rows;
  BlockStats stats;
};

IterBlock run_iteration(const Bindings& bn, const SimBundle& b, const StratumTable& census,
                        const ScenarioConfig& sc, const std::vector<StratumCtx>& strata,
                        const std::vector<long long>& alloc, const RngStream& master,
                        long long j) {
  IterBlock block;
  long long n = 0;
  for (long long a : alloc) n += a;
  block.rows.reserve(static_cast<std::size_t>(n));
  IterCtx ctx;
  for (std::size_t d = 0; d < census.size(); ++d) {
    if (alloc[d] == 0) continue;
    fill_iter_ctx(bn, sc, j, strata[d], &ctx);
    for (long long i = 0; i < alloc[d]; ++i) {
      ExposureRow row;
      row.iteration = j;
      row.stratum = static_cast<int>(d);
      const RngStream base = master.derive_path(
          {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(i)});
      simulate_individual(b, sc, strata[d], ctx, base, &block.stats, &row);
      block.rows.push_back(row);
    }
  }
  return block;
}

}  // namespace

SimReport simulate_population(const GraphDraws& draws, const SimBundle& bundle,
                              const StratumTable& census, const ScenarioConfig& scenario,
                              std::uint64_t seed, const ExposureSink& sink, int threads) {
  scenario.validate();
  const Bindings bn = bind_all(draws, bundle, scenario);
  const std::vector<long long> alloc = allocate_strata(census, scenario.population_total);
  const std::vector<StratumCtx> strata = bind_strata(census, bundle, scenario);
  const RngStream master(seed);
  const long long J = bn.rows;

  SimReport report;
  report.iterations = J;
  report.individuals = scenario.population_total;

  const auto emit = [&](IterBlock&& block) {
    for (const ExposureRow& row : block.rows) sink(row);
    report.rows += static_cast<long long>(block.rows.size());
    report.clamps.merge(block.stats.clamps);
    report.degenerate_pert += block.stats.degenerate_pert;
  };

  if (threads <= 1) {
    for (long long j = 0; j < J; ++j)
      emit(run_iteration(bn, bundle, census, scenario, strata, alloc, master, j));
    return report;
  }

  // Window of in-flight iterations; emission stays ordered by draw index.
  const std::size_t window = static_cast<std::size_t>(threads);
  std::vector<std::future<IterBlock>> pending;
  long long next = 0;
  while (next < J || !pending.empty()) {
    while (next < J && pending.size() < window) {
      pending.push_back(std::async(std::launch::async, run_iteration, std::cref(bn),
                                   std::cref(bundle), std::cref(census), std::cref(scenario),
                                   std::cref(strata), std::cref(alloc), std::cref(master), next));
      ++next;
    }
    emit(pending.front().get());
    pending.erase(pending.begin());
  }
  return report;
}

struct ExposureCsvWriter::Impl {
  std::ofstream out;
  std::string path;
  const StratumTable* census;
  bool closed = false;
};

const char* ExposureCsvWriter::header() {
  return "iteration,stratum_age,stratum_gender,stratum_region,food,supplements,medicines,pcp,"
         "aggregated";
}

ExposureCsvWriter::ExposureCsvWriter(const std::string& path, const StratumTable& census)
    : impl_(new Impl{std::ofstream(path), path, &census}) {
  if (!impl_->out) {
    delete impl_;
    impl_ = nullptr;
    throw_data("FileError", "cannot open '" + path + "' for writing");
  }
  impl_->out << header() << "\n";
}

ExposureCsvWriter::~ExposureCsvWriter() { delete impl_; }

void ExposureCsvWriter::operator()(const ExposureRow& row) {
  const Stratum& st = impl_->census->strata()[static_cast<std::size_t>(row.stratum)];
  char buf[256];
  std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g,%.17g\n", row.source[0], row.source[1],
                row.source[2], row.source[3], row.aggregated);
  impl_->out << row.iteration << ',' << csv_escape(st.age_group) << ',' << csv_escape(st.gender)
             << ',' << csv_escape(st.region) << buf;
}

void ExposureCsvWriter::close() {
  if (impl_->closed) return;
  impl_->closed = true;
  impl_->out.flush();
  if (!impl_->out.good()) throw_data("FileError", "failed writing '" + impl_->path + "'");
  impl_->out.close();
}

}  // namespace aggrex
