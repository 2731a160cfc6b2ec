#include "aggrex/builders.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "aggrex/errors.hpp"

namespace aggrex {
namespace {

constexpr double kWideSd = 2.5;  // intercept and hypermean prior scale

void add_std_normal(NormalPriorFactors& f, int c_off, int n) {
  for (int i = 0; i < n; ++i) f.add(c_off + i, 0.0, -1, 1.0, -1);
}

void add_normal(NormalPriorFactors& f, int c_off, int n, double sd) {
  for (int i = 0; i < n; ++i) f.add(c_off + i, 0.0, -1, sd, -1);
}

void add_halfnormal(HalfNormalPriorFactors& f, int c_off, int n, double scale = 1.0) {
  for (int i = 0; i < n; ++i) {
    f.x_idx.push_back(c_off + i);
    f.scale.push_back(scale);
  }
}

// raw block of n entries scaled entrywise: out[i] = scale(i) + optional loc
void add_scaled(ModelGraph& g, int out_off, int raw_off, int n,
                const std::vector<int>& scale_idx, int loc_idx) {
  auto comp = std::make_unique<ScaledOffset>();
  for (int i = 0; i < n; ++i) {
    comp->out.push_back(out_off + i);
    comp->raw.push_back(raw_off + i);
    comp->scale.push_back(scale_idx[static_cast<std::size_t>(i)]);
    comp->loc.push_back(loc_idx);
  }
  g.derived.push_back(std::move(comp));
}

void report_range(ModelGraph& g, const std::string& base, int off, int n) {
  for (int i = 0; i < n; ++i) g.report.push_back({col_name(base, {i}), off + i});
}

// Interaction-pair layout for the body-weight mean: one coefficient per level
// pair of adjacent predictors (k, k+1).
struct PairLayout {
  std::vector<int> offsets;  // per pair
  int total = 0;

  explicit PairLayout(const CovariateSpace& cov) {
    for (int k = 0; k + 1 < cov.predictors(); ++k) {
      offsets.push_back(total);
      total += cov.count(k) * cov.count(k + 1);
    }
  }
  int pairs() const { return static_cast<int>(offsets.size()); }
  int index(const CovariateSpace& cov, int pair, int l1, int l2) const {
    return offsets[static_cast<std::size_t>(pair)] + l1 * cov.count(pair + 1) + l2;
  }
};

void report_pairs(ModelGraph& g, const std::string& base, int off, const CovariateSpace& cov,
                  const PairLayout& pl) {
  for (int p = 0; p < pl.pairs(); ++p)
    for (int l1 = 0; l1 < cov.count(p); ++l1)
      for (int l2 = 0; l2 < cov.count(p + 1); ++l2)
        g.report.push_back({col_name(base, {p, l1, l2}), off + pl.index(cov, p, l1, l2)});
}

void report_levels(ModelGraph& g, const std::string& base, int off, const CovariateSpace& cov) {
  for (int k = 0; k < cov.predictors(); ++k)
    for (int l = 0; l < cov.count(k); ++l)
      g.report.push_back({col_name(base, {k, l}), off + cov.offset(k) + l});
}

// Per-individual state shared by the survey-based builders.
struct Person {
  std::string id;
  std::vector<int> lev;               // level index per predictor
  std::optional<double> weight;
  int weight_mis = -1;                // slot among missing-weight parameters
};

// Distinct individuals with validated, consistent covariates and weights.
std::vector<Person> collect_people(const std::vector<const SurveyObservation*>& rows,
                                   const CovariateSpace& cov) {
  std::map<std::string, Person> by_id;
  for (const SurveyObservation* r : rows) {
    auto [it, fresh] = by_id.try_emplace(r->individual_id);
    Person& p = it->second;
    if (fresh) {
      p.id = r->individual_id;
      for (int k = 0; k < cov.predictors(); ++k)
        p.lev.push_back(cov.index(k, covariate_value(*r, cov.names()[static_cast<std::size_t>(k)])));
      p.weight = r->body_weight_kg;
    } else {
      for (int k = 0; k < cov.predictors(); ++k) {
        if (p.lev[static_cast<std::size_t>(k)] !=
            cov.index(k, covariate_value(*r, cov.names()[static_cast<std::size_t>(k)])))
          throw_data("InconsistentCovariates",
                     "individual " + p.id + " has conflicting " + cov.names()[static_cast<std::size_t>(k)]);
      }
      if (r->body_weight_kg) {
        if (p.weight && *p.weight != *r->body_weight_kg)
          throw_data("InconsistentCovariates", "individual " + p.id + " has conflicting body weight");
        p.weight = r->body_weight_kg;
      }
    }
  }
  std::vector<Person> people;
  people.reserve(by_id.size());
  for (auto& [id, p] : by_id) people.push_back(std::move(p));
  return people;
}

int assign_missing_weight_slots(std::vector<Person>& people) {
  int m = 0;
  for (Person& p : people)
    if (!p.weight) p.weight_mis = m++;
  return m;
}

// Body-weight submodel: log(w) ~ Normal(b0 + pair effects, sigma_w); observed
// weights as data rows, missing ones around their latent entries.
void add_weight_model(ModelGraph& g, const std::vector<Person>& people, const CovariateSpace& cov,
                      const PairLayout& pl, int b0_idx, int pair_off, int sigma_idx,
                      int wmis_off) {
  for (const Person& p : people) {
    std::vector<int> mean{b0_idx};
    for (int k = 0; k < pl.pairs(); ++k)
      mean.push_back(pair_off + pl.index(cov, k, p.lev[static_cast<std::size_t>(k)],
                                         p.lev[static_cast<std::size_t>(k) + 1]));
    if (p.weight) {
      g.gaussian.mean.push_row(mean);
      g.gaussian.v.push_back(std::log(*p.weight));
      g.gaussian.c0.push_back(-std::log(*p.weight));
      g.gaussian.sd_idx.push_back(sigma_idx);
    } else {
      g.lognormal_latent.mean.push_row(mean);
      g.lognormal_latent.target.push_back(wmis_off + p.weight_mis);
      g.lognormal_latent.sd_idx.push_back(sigma_idx);
    }
  }
}

}  // namespace

CovariateSpace::CovariateSpace(std::vector<std::string> names,
                               std::vector<std::vector<std::string>> levels)
    : names_(std::move(names)), levels_(std::move(levels)) {
  if (names_.size() != levels_.size())
    throw_config("InvalidConfig", "covariate names and level lists differ in length");
  for (auto& ls : levels_) {
    if (ls.empty()) throw_data("UnknownLevel", "a predictor has no observed levels");
    offsets_.push_back(total_);
    total_ += static_cast<int>(ls.size());
  }
}

const std::string& covariate_value(const SurveyObservation& o, const std::string& predictor) {
  if (predictor == "age_group") return o.age_group;
  if (predictor == "gender") return o.gender;
  if (predictor == "region") return o.region;
  throw_config("InvalidConfig", "unknown predictor \"" + predictor + "\"");
}

const std::string& covariate_value(const MedicineUseObservation& o, const std::string& predictor) {
  if (predictor == "age_group") return o.age_group;
  if (predictor == "gender") return o.gender;
  if (predictor == "region") return o.region;
  throw_config("InvalidConfig", "unknown predictor \"" + predictor + "\"");
}

CovariateSpace CovariateSpace::from_survey(const std::vector<SurveyObservation>& rows,
                                           const std::vector<std::string>& predictors) {
  std::vector<std::vector<std::string>> levels;
  for (const auto& name : predictors) {
    std::set<std::string> vals;
    for (const auto& r : rows) vals.insert(covariate_value(r, name));
    levels.emplace_back(vals.begin(), vals.end());
  }
  return CovariateSpace(predictors, std::move(levels));
}

CovariateSpace CovariateSpace::from_medicines(const std::vector<MedicineUseObservation>& rows,
                                              const std::vector<std::string>& predictors) {
  std::vector<std::vector<std::string>> levels;
  for (const auto& name : predictors) {
    std::set<std::string> vals;
    for (const auto& r : rows) vals.insert(covariate_value(r, name));
    levels.emplace_back(vals.begin(), vals.end());
  }
  return CovariateSpace(predictors, std::move(levels));
}

int CovariateSpace::index(int k, const std::string& value) const {
  const auto& ls = levels_[static_cast<std::size_t>(k)];
  auto it = std::lower_bound(ls.begin(), ls.end(), value);
  if (it == ls.end() || *it != value)
    throw_data("UnknownLevel",
               "level \"" + value + "\" of " + names_[static_cast<std::size_t>(k)] +
                   " was not present in the fitted data");
  return static_cast<int>(it - ls.begin());
}

std::string col_name(const std::string& base, std::initializer_list<int> idx) {
  std::string s = base;
  s.push_back('[');
  bool first = true;
  for (int i : idx) {
    if (!first) s.push_back(',');
    s += std::to_string(i);
    first = false;
  }
  s.push_back(']');
  return s;
}

std::vector<std::string> survey_categories(const std::vector<SurveyObservation>& rows,
                                           const CategoryTree& tree, const std::string& root) {
  std::set<std::string> cats;
  for (const auto& r : rows)
    if (tree.is_under(r.category, root)) cats.insert(r.category);
  return {cats.begin(), cats.end()};
}

std::vector<std::string> product_categories(const std::vector<ProductObservation>& rows,
                                            const CategoryTree& tree, const std::string& root) {
  std::set<std::string> cats;
  for (const auto& r : rows)
    if (tree.is_under(r.category, root)) cats.insert(r.category);
  return {cats.begin(), cats.end()};
}

void concentration_nodes(const CategoryTree& tree, const std::string& root,
                         std::vector<std::string>* mids, std::vector<std::string>* leaves) {
  if (!tree.contains(root)) throw_data("UnknownCategory", "concentration root \"" + root + "\" not in the category tree");
  mids->assign(tree.children(root).begin(), tree.children(root).end());
  std::sort(mids->begin(), mids->end());
  leaves->clear();
  for (const auto& m : *mids)
    for (const auto& leaf : tree.children(m)) {
      if (!tree.children(leaf).empty())
        throw_data("EmptyTree", "concentration hierarchy under \"" + root + "\" is deeper than three levels at \"" + leaf + "\"");
      leaves->push_back(leaf);
    }
  std::sort(leaves->begin(), leaves->end());
  if (mids->empty() || leaves->empty())
    throw_data("EmptyTree", "no three-level hierarchy under concentration root \"" + root + "\"");
}

ModelGraph build_food_graph(const std::vector<SurveyObservation>& survey, const CategoryTree& tree,
                            const ModelConfig& cfg, const CovariateSpace& cov,
                            bool include_likelihood) {
  std::vector<const SurveyObservation*> rows;
  for (const auto& r : survey)
    if (tree.is_under(r.category, cfg.food_root)) rows.push_back(&r);
  if (rows.empty()) throw_data("EmptyCategory", "no survey rows under category \"" + cfg.food_root + "\"");

  std::vector<std::string> cats = survey_categories(survey, tree, cfg.food_root);
  std::map<std::string, int> cat_index;
  for (std::size_t i = 0; i < cats.size(); ++i) cat_index[cats[i]] = static_cast<int>(i);
  const int G = static_cast<int>(cats.size());

  std::vector<Person> people = collect_people(rows, cov);
  std::map<std::string, int> ind_index;
  for (std::size_t i = 0; i < people.size(); ++i) ind_index[people[i].id] = static_cast<int>(i);
  const int N = static_cast<int>(people.size());

  std::vector<int> consumed_per_cat(static_cast<std::size_t>(G), 0);
  bool any_weight = false;
  for (const SurveyObservation* r : rows)
    if (r->consumed) ++consumed_per_cat[static_cast<std::size_t>(cat_index[r->category])];
  for (const Person& p : people) any_weight = any_weight || p.weight.has_value();
  for (int gidx = 0; gidx < G; ++gidx)
    if (consumed_per_cat[static_cast<std::size_t>(gidx)] == 0)
      throw_data("EmptyCategory", "category \"" + cats[static_cast<std::size_t>(gidx)] + "\" has no consumed observations");
  if (!any_weight) throw_data("AllWeightsMissing", "no individual has an observed body weight");

  const int K = cov.predictors();
  const int Lt = cov.total_levels();
  const PairLayout pl(cov);
  const int M = include_likelihood ? assign_missing_weight_slots(people) : 0;

  ModelGraph g;
  g.name = "food";
  auto& L = g.layout;
  L.add("mu0_eta", {1}, Constraint::None);
  L.add("sigma0_eta", {1}, Constraint::Positive);
  L.add("eta0_z", {G}, Constraint::None);
  L.add("sigma_eta", {G, K}, Constraint::Positive);
  L.add("eta_z", {G, Lt}, Constraint::None);
  L.add("mu0_gamma", {1}, Constraint::None);
  L.add("sigma0_gamma", {1}, Constraint::Positive);
  L.add("gamma0_z", {G}, Constraint::None);
  L.add("sigma_gamma", {G, K}, Constraint::Positive);
  L.add("gamma_z", {G, Lt}, Constraint::None);
  L.add("lambda", {1}, Constraint::Bounded, cfg.lambda_lo, cfg.lambda_hi);
  L.add("sigma_aw", {1}, Constraint::Positive);
  L.add("subj_sd", {G, 2}, Constraint::Positive);
  L.add("subj_corr", {G}, Constraint::Correlation);
  L.add("subj_z", {G, N, 2}, Constraint::None);
  L.add("beta0", {1}, Constraint::None);
  if (pl.total > 0) L.add("beta", {pl.total}, Constraint::None);
  L.add("sigma_w", {1}, Constraint::Positive);
  if (M > 0) L.add("weight_mis", {M}, Constraint::Positive);

  const int mu0_eta = L.block("mu0_eta").c_offset;
  const int sigma0_eta = L.block("sigma0_eta").c_offset;
  const int eta0_z = L.block("eta0_z").c_offset;
  const int sigma_eta = L.block("sigma_eta").c_offset;
  const int eta_z = L.block("eta_z").c_offset;
  const int mu0_gamma = L.block("mu0_gamma").c_offset;
  const int sigma0_gamma = L.block("sigma0_gamma").c_offset;
  const int gamma0_z = L.block("gamma0_z").c_offset;
  const int sigma_gamma = L.block("sigma_gamma").c_offset;
  const int gamma_z = L.block("gamma_z").c_offset;
  const int lambda = L.block("lambda").c_offset;
  const int sigma_aw = L.block("sigma_aw").c_offset;
  const int subj_sd = L.block("subj_sd").c_offset;
  const int subj_corr = L.block("subj_corr").c_offset;
  const int subj_z = L.block("subj_z").c_offset;
  const int beta0 = L.block("beta0").c_offset;
  const int beta = pl.total > 0 ? L.block("beta").c_offset : -1;
  const int sigma_w = L.block("sigma_w").c_offset;
  const int wmis = M > 0 ? L.block("weight_mis").c_offset : -1;

  // Derived layout: centered effects and per-subject pairs.
  int d = L.c_dim();
  const int eta0_d = d; d += G;
  const int eta_d = d; d += G * Lt;
  const int gamma0_d = d; d += G;
  const int gamma_d = d; d += G * Lt;
  const int ups_d = d; d += G * N;
  const int nu_d = d; d += G * N;
  g.derived_dim = d - L.c_dim();

  add_scaled(g, eta0_d, eta0_z, G, std::vector<int>(static_cast<std::size_t>(G), sigma0_eta), mu0_eta);
  add_scaled(g, gamma0_d, gamma0_z, G, std::vector<int>(static_cast<std::size_t>(G), sigma0_gamma), mu0_gamma);
  {
    std::vector<int> se, sg;
    for (int gi = 0; gi < G; ++gi)
      for (int k = 0; k < K; ++k)
        for (int l = 0; l < cov.count(k); ++l) {
          se.push_back(sigma_eta + gi * K + k);
          sg.push_back(sigma_gamma + gi * K + k);
        }
    add_scaled(g, eta_d, eta_z, G * Lt, se, -1);
    add_scaled(g, gamma_d, gamma_z, G * Lt, sg, -1);
  }
  {
    auto pairs = std::make_unique<PairEffects>();
    for (int gi = 0; gi < G; ++gi)
      for (int i = 0; i < N; ++i) {
        PairEffects::Entry e;
        e.out_u = ups_d + gi * N + i;
        e.out_v = nu_d + gi * N + i;
        e.z0 = subj_z + (gi * N + i) * 2;
        e.z1 = e.z0 + 1;
        e.s0 = subj_sd + gi * 2;
        e.s1 = e.s0 + 1;
        e.r = subj_corr + gi;
        pairs->entries.push_back(e);
      }
    g.derived.push_back(std::move(pairs));
  }

  // Priors.
  g.normal_prior.add(mu0_eta, 0.0, -1, kWideSd, -1);
  g.normal_prior.add(mu0_gamma, 0.0, -1, kWideSd, -1);
  g.normal_prior.add(beta0, 0.0, -1, kWideSd, -1);
  add_std_normal(g.normal_prior, eta0_z, G);
  add_std_normal(g.normal_prior, gamma0_z, G);
  add_std_normal(g.normal_prior, eta_z, G * Lt);
  add_std_normal(g.normal_prior, gamma_z, G * Lt);
  add_std_normal(g.normal_prior, subj_z, G * N * 2);
  if (pl.total > 0) add_std_normal(g.normal_prior, beta, pl.total);
  add_halfnormal(g.halfnormal_prior, sigma0_eta, 1);
  add_halfnormal(g.halfnormal_prior, sigma0_gamma, 1);
  add_halfnormal(g.halfnormal_prior, sigma_eta, G * K);
  add_halfnormal(g.halfnormal_prior, sigma_gamma, G * K);
  add_halfnormal(g.halfnormal_prior, sigma_aw, 1);
  add_halfnormal(g.halfnormal_prior, subj_sd, G * 2);
  add_halfnormal(g.halfnormal_prior, sigma_w, 1);
  // Flat densities of the bounded lambda and the correlations.
  g.lp_constant -= std::log(cfg.lambda_hi - cfg.lambda_lo);
  g.lp_constant -= G * std::log(2.0);

  if (include_likelihood) {
    g.boxcox_obs.lambda_idx = lambda;
    g.boxcox_obs.sd_idx = sigma_aw;
    for (const SurveyObservation* r : rows) {
      const int gi = cat_index[r->category];
      const int i = ind_index[r->individual_id];
      const Person& p = people[static_cast<std::size_t>(i)];
      std::vector<int> freq{eta0_d + gi};
      for (int k = 0; k < K; ++k)
        freq.push_back(eta_d + gi * Lt + cov.offset(k) + p.lev[static_cast<std::size_t>(k)]);
      freq.push_back(ups_d + gi * N + i);
      g.bernoulli.lp.push_row(freq);
      g.bernoulli.y.push_back(r->consumed ? 1 : 0);

      if (r->consumed) {
        std::vector<int> mean{gamma0_d + gi};
        for (int k = 0; k < K; ++k)
          mean.push_back(gamma_d + gi * Lt + cov.offset(k) + p.lev[static_cast<std::size_t>(k)]);
        mean.push_back(nu_d + gi * N + i);
        g.boxcox_obs.mean.push_row(mean);
        g.boxcox_obs.amount.push_back(r->amount_g);
        if (p.weight) {
          g.boxcox_obs.w_const.push_back(*p.weight);
          g.boxcox_obs.w_idx.push_back(-1);
        } else {
          g.boxcox_obs.w_const.push_back(0.0);
          g.boxcox_obs.w_idx.push_back(wmis + p.weight_mis);
        }
      }
    }
    add_weight_model(g, people, cov, pl, beta0, beta, sigma_w, wmis);
  }

  report_range(g, "eta0", eta0_d, G);
  for (int gi = 0; gi < G; ++gi)
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < cov.count(k); ++l)
        g.report.push_back({col_name("eta", {gi, k, l}), eta_d + gi * Lt + cov.offset(k) + l});
  g.report.push_back({"mu0_eta", mu0_eta});
  g.report.push_back({"sigma0_eta", sigma0_eta});
  for (int gi = 0; gi < G; ++gi)
    for (int k = 0; k < K; ++k)
      g.report.push_back({col_name("sigma_eta", {gi, k}), sigma_eta + gi * K + k});
  report_range(g, "gamma0", gamma0_d, G);
  for (int gi = 0; gi < G; ++gi)
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < cov.count(k); ++l)
        g.report.push_back({col_name("gamma", {gi, k, l}), gamma_d + gi * Lt + cov.offset(k) + l});
  g.report.push_back({"mu0_gamma", mu0_gamma});
  g.report.push_back({"sigma0_gamma", sigma0_gamma});
  for (int gi = 0; gi < G; ++gi)
    for (int k = 0; k < K; ++k)
      g.report.push_back({col_name("sigma_gamma", {gi, k}), sigma_gamma + gi * K + k});
  g.report.push_back({"lambda", lambda});
  g.report.push_back({"sigma_aw", sigma_aw});
  for (int gi = 0; gi < G; ++gi) {
    g.report.push_back({col_name("subj_sd", {gi, 0}), subj_sd + gi * 2});
    g.report.push_back({col_name("subj_sd", {gi, 1}), subj_sd + gi * 2 + 1});
  }
  report_range(g, "subj_corr", subj_corr, G);
  g.report.push_back({"beta0", beta0});
  if (pl.total > 0) report_pairs(g, "beta", beta, cov, pl);
  g.report.push_back({"sigma_w", sigma_w});
  return g;
}

ModelGraph build_supplements_graph(const std::vector<SurveyObservation>& survey,
                                   const CategoryTree& tree, const ModelConfig& cfg,
                                   const CovariateSpace& cov, bool include_likelihood) {
  std::vector<const SurveyObservation*> rows;
  for (const auto& r : survey)
    if (tree.is_under(r.category, cfg.supplement_root)) rows.push_back(&r);
  if (rows.empty())
    throw_data("EmptyCategory", "no survey rows under category \"" + cfg.supplement_root + "\"");

  std::vector<Person> people = collect_people(rows, cov);
  std::map<std::string, int> ind_index;
  for (std::size_t i = 0; i < people.size(); ++i) ind_index[people[i].id] = static_cast<int>(i);
  const int N = static_cast<int>(people.size());

  // Collapse categories: a person-day consumes supplements when any row says
  // so; day amounts add up. The amount model sees the mean over consumption
  // days.
  struct DayAgg { bool consumed = false; double amount = 0.0; };
  std::vector<std::map<int, DayAgg>> days(static_cast<std::size_t>(N));
  for (const SurveyObservation* r : rows) {
    DayAgg& a = days[static_cast<std::size_t>(ind_index[r->individual_id])][r->day];
    if (r->consumed) {
      a.consumed = true;
      a.amount += r->amount_g;
    }
  }
  struct AmountRow { int person; double mean_amount; };
  std::vector<AmountRow> amount_rows;
  int consumed_any = 0;
  for (int i = 0; i < N; ++i) {
    int t = 0;
    double total = 0.0;
    for (const auto& [day, a] : days[static_cast<std::size_t>(i)])
      if (a.consumed) {
        ++t;
        total += a.amount;
      }
    if (t > 0) {
      amount_rows.push_back({i, total / t});
      ++consumed_any;
    }
  }
  if (consumed_any == 0)
    throw_data("EmptyCategory", "no individual consumed under \"" + cfg.supplement_root + "\"");
  bool any_weight = false;
  for (const Person& p : people) any_weight = any_weight || p.weight.has_value();
  if (!any_weight) throw_data("AllWeightsMissing", "no individual has an observed body weight");

  const int K = cov.predictors();
  const int Lt = cov.total_levels();
  const int Z = cfg.mixture_components;
  const PairLayout pl(cov);
  const int M = include_likelihood ? assign_missing_weight_slots(people) : 0;

  ModelGraph g;
  g.name = "supplements";
  auto& L = g.layout;
  L.add("alpha0", {1}, Constraint::None);
  L.add("sigma_alpha", {K}, Constraint::Positive);
  L.add("alpha_z", {Lt}, Constraint::None);
  L.add("sigma_tau", {1}, Constraint::Positive);
  L.add("tau_z", {N}, Constraint::None);
  L.add("rho0_first", {1}, Constraint::None);
  if (Z > 1) L.add("rho0_incr", {Z - 1}, Constraint::Positive);
  L.add("sigma_rho", {1}, Constraint::Positive);
  L.add("rho_z", {Lt}, Constraint::None);
  L.add("sigma_s", {Z}, Constraint::Positive);
  L.add("theta", {Z}, Constraint::Simplex);
  L.add("zeta0", {1}, Constraint::None);
  if (pl.total > 0) L.add("zeta", {pl.total}, Constraint::None);
  L.add("sigma_w", {1}, Constraint::Positive);
  if (M > 0) L.add("weight_mis", {M}, Constraint::Positive);

  const int alpha0 = L.block("alpha0").c_offset;
  const int sigma_alpha = L.block("sigma_alpha").c_offset;
  const int alpha_z = L.block("alpha_z").c_offset;
  const int sigma_tau = L.block("sigma_tau").c_offset;
  const int tau_z = L.block("tau_z").c_offset;
  const int rho0_first = L.block("rho0_first").c_offset;
  const int rho0_incr = Z > 1 ? L.block("rho0_incr").c_offset : -1;
  const int sigma_rho = L.block("sigma_rho").c_offset;
  const int rho_z = L.block("rho_z").c_offset;
  const int sigma_s = L.block("sigma_s").c_offset;
  const int theta = L.block("theta").c_offset;
  const int zeta0 = L.block("zeta0").c_offset;
  const int zeta = pl.total > 0 ? L.block("zeta").c_offset : -1;
  const int sigma_w = L.block("sigma_w").c_offset;
  const int wmis = M > 0 ? L.block("weight_mis").c_offset : -1;

  int d = L.c_dim();
  const int alpha_d = d; d += Lt;
  const int tau_d = d; d += N;
  const int rho0_d = d; d += Z;
  const int rho_d = d; d += Lt;
  g.derived_dim = d - L.c_dim();

  {
    std::vector<int> sa, sr;
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < cov.count(k); ++l) {
        sa.push_back(sigma_alpha + k);
        sr.push_back(sigma_rho);
      }
    add_scaled(g, alpha_d, alpha_z, Lt, sa, -1);
    add_scaled(g, rho_d, rho_z, Lt, sr, -1);
  }
  add_scaled(g, tau_d, tau_z, N, std::vector<int>(static_cast<std::size_t>(N), sigma_tau), -1);
  {
    auto oc = std::make_unique<OrderedCumsum>();
    oc->out0 = rho0_d;
    oc->first = rho0_first;
    for (int z = 0; z + 1 < Z; ++z) oc->incr.push_back(rho0_incr + z);
    g.derived.push_back(std::move(oc));
  }

  g.normal_prior.add(alpha0, 0.0, -1, kWideSd, -1);
  g.normal_prior.add(zeta0, 0.0, -1, kWideSd, -1);
  add_std_normal(g.normal_prior, alpha_z, Lt);
  add_std_normal(g.normal_prior, tau_z, N);
  add_std_normal(g.normal_prior, rho_z, Lt);
  if (pl.total > 0) add_std_normal(g.normal_prior, zeta, pl.total);
  add_normal(g.normal_prior, rho0_d, Z, kWideSd);  // prior lives on the ordered values
  add_halfnormal(g.halfnormal_prior, sigma_alpha, K);
  add_halfnormal(g.halfnormal_prior, sigma_tau, 1);
  add_halfnormal(g.halfnormal_prior, sigma_rho, 1);
  add_halfnormal(g.halfnormal_prior, sigma_w, 1);
  for (int z = 0; z < Z; ++z) {
    g.log_scale_prior.x_idx.push_back(sigma_s + z);
    g.log_scale_prior.mu.push_back(0.0);
    g.log_scale_prior.s.push_back(2.0);
  }
  g.lp_constant += std::lgamma(static_cast<double>(Z));  // flat simplex density

  if (include_likelihood) {
    for (int i = 0; i < N; ++i) {
      const Person& p = people[static_cast<std::size_t>(i)];
      for (const auto& [day, a] : days[static_cast<std::size_t>(i)]) {
        std::vector<int> freq{alpha0};
        for (int k = 0; k < K; ++k)
          freq.push_back(alpha_d + cov.offset(k) + p.lev[static_cast<std::size_t>(k)]);
        freq.push_back(tau_d + i);
        g.bernoulli.lp.push_row(freq);
        g.bernoulli.y.push_back(a.consumed ? 1 : 0);
      }
    }
    g.mixture.K = Z;
    for (int z = 0; z < Z; ++z) {
      g.mixture.comp_mean_idx.push_back(rho0_d + z);
      g.mixture.comp_sd_idx.push_back(sigma_s + z);
    }
    g.mixture.theta_idx = theta;
    for (const AmountRow& row : amount_rows) {
      const Person& p = people[static_cast<std::size_t>(row.person)];
      std::vector<int> shared;
      for (int k = 0; k < K; ++k)
        shared.push_back(rho_d + cov.offset(k) + p.lev[static_cast<std::size_t>(k)]);
      g.mixture.shared_mean.push_row(shared);
      double v = std::log(row.mean_amount);
      g.mixture.c0.push_back(-v);
      if (p.weight) {
        v -= std::log(*p.weight);
        g.mixture.w_idx.push_back(-1);
      } else {
        g.mixture.w_idx.push_back(wmis + p.weight_mis);
      }
      g.mixture.v_const.push_back(v);
    }
    add_weight_model(g, people, cov, pl, zeta0, zeta, sigma_w, wmis);
  }

  g.report.push_back({"alpha0", alpha0});
  report_levels(g, "alpha", alpha_d, cov);
  report_range(g, "sigma_alpha", sigma_alpha, K);
  g.report.push_back({"sigma_tau", sigma_tau});
  report_range(g, "theta", theta, Z);
  report_range(g, "rho0", rho0_d, Z);
  report_levels(g, "rho", rho_d, cov);
  g.report.push_back({"sigma_rho", sigma_rho});
  report_range(g, "sigma_s", sigma_s, Z);
  g.report.push_back({"zeta0", zeta0});
  if (pl.total > 0) report_pairs(g, "zeta", zeta, cov, pl);
  g.report.push_back({"sigma_w", sigma_w});
  return g;
}

ModelGraph build_medicines_graph(const std::vector<MedicineUseObservation>& med,
                                 const ModelConfig& cfg, const CovariateSpace& cov,
                                 bool include_likelihood) {
  if (med.empty()) throw_data("NoRegularUsers", "medicine dataset is empty");
  const int K = cov.predictors();
  const int Lt = cov.total_levels();
  const PairLayout pl(cov);

  struct MedPerson {
    const MedicineUseObservation* obs;
    std::vector<int> lev;
    int weight_mis = -1;
    int unit_off = -1, unit_count = 0;
  };
  std::vector<MedPerson> people;
  people.reserve(med.size());
  std::set<std::string> seen;
  bool any_weight = false;
  int users = 0, units_total = 0, missing = 0;
  for (const auto& r : med) {
    if (!seen.insert(r.individual_id).second)
      throw_data("DuplicateIndividual", "duplicate medicine individual " + r.individual_id);
    MedPerson p;
    p.obs = &r;
    for (int k = 0; k < K; ++k)
      p.lev.push_back(cov.index(k, covariate_value(r, cov.names()[static_cast<std::size_t>(k)])));
    any_weight = any_weight || r.body_weight_kg.has_value();
    if (include_likelihood) {
      if (!r.body_weight_kg) p.weight_mis = missing++;
      if (r.regular_user) {
        ++users;
        p.unit_count = static_cast<int>(std::min<long long>(r.units_per_day, cfg.max_latent_units));
        p.unit_off = units_total;
        units_total += p.unit_count;
      }
    }
    people.push_back(std::move(p));
  }
  if (include_likelihood) {
    if (users == 0) throw_data("NoRegularUsers", "no regular medicine user with units_per_day >= 1");
    if (!any_weight) throw_data("AllWeightsMissing", "no medicine individual has an observed body weight");
  }

  ModelGraph g;
  g.name = "medicines";
  auto& L = g.layout;
  L.add("freq0", {1}, Constraint::None);
  L.add("sigma_freq", {K}, Constraint::Positive);
  L.add("freq_z", {Lt}, Constraint::None);
  L.add("phi0", {1}, Constraint::None);
  L.add("sigma_phi", {K}, Constraint::Positive);
  L.add("phi_z", {Lt}, Constraint::None);
  L.add("lambda", {1}, Constraint::Bounded, cfg.lambda_lo, cfg.lambda_hi);
  L.add("sigma_aw", {1}, Constraint::Positive);
  if (units_total > 0)
    L.add("unit_mass", {units_total}, Constraint::Bounded, cfg.unit_mass_lo, cfg.unit_mass_hi);
  L.add("omega0", {1}, Constraint::None);
  if (pl.total > 0) L.add("omega", {pl.total}, Constraint::None);
  L.add("sigma_w", {1}, Constraint::Positive);
  if (missing > 0) L.add("weight_mis", {missing}, Constraint::Positive);

  const int freq0 = L.block("freq0").c_offset;
  const int sigma_freq = L.block("sigma_freq").c_offset;
  const int freq_z = L.block("freq_z").c_offset;
  const int phi0 = L.block("phi0").c_offset;
  const int sigma_phi = L.block("sigma_phi").c_offset;
  const int phi_z = L.block("phi_z").c_offset;
  const int lambda = L.block("lambda").c_offset;
  const int sigma_aw = L.block("sigma_aw").c_offset;
  const int unit_mass = units_total > 0 ? L.block("unit_mass").c_offset : -1;
  const int omega0 = L.block("omega0").c_offset;
  const int omega = pl.total > 0 ? L.block("omega").c_offset : -1;
  const int sigma_w = L.block("sigma_w").c_offset;
  const int wmis = missing > 0 ? L.block("weight_mis").c_offset : -1;

  int d = L.c_dim();
  const int freq_d = d; d += Lt;
  const int phi_d = d; d += Lt;
  g.derived_dim = d - L.c_dim();

  {
    std::vector<int> sf, sp;
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < cov.count(k); ++l) {
        sf.push_back(sigma_freq + k);
        sp.push_back(sigma_phi + k);
      }
    add_scaled(g, freq_d, freq_z, Lt, sf, -1);
    add_scaled(g, phi_d, phi_z, Lt, sp, -1);
  }

  g.normal_prior.add(freq0, 0.0, -1, kWideSd, -1);
  g.normal_prior.add(phi0, 0.0, -1, kWideSd, -1);
  g.normal_prior.add(omega0, 0.0, -1, kWideSd, -1);
  add_std_normal(g.normal_prior, freq_z, Lt);
  add_std_normal(g.normal_prior, phi_z, Lt);
  if (pl.total > 0) add_std_normal(g.normal_prior, omega, pl.total);
  add_halfnormal(g.halfnormal_prior, sigma_freq, K);
  add_halfnormal(g.halfnormal_prior, sigma_phi, K);
  add_halfnormal(g.halfnormal_prior, sigma_aw, 1);
  add_halfnormal(g.halfnormal_prior, sigma_w, 1);
  g.lp_constant -= std::log(cfg.lambda_hi - cfg.lambda_lo);
  g.lp_constant -= units_total * std::log(cfg.unit_mass_hi - cfg.unit_mass_lo);

  if (include_likelihood) {
    g.boxcox_latent.lambda_idx = lambda;
    g.boxcox_latent.sd_idx = sigma_aw;
    for (const MedPerson& p : people) {
      std::vector<int> freq{freq0};
      for (int k = 0; k < K; ++k)
        freq.push_back(freq_d + cov.offset(k) + p.lev[static_cast<std::size_t>(k)]);
      g.bernoulli.lp.push_row(freq);
      g.bernoulli.y.push_back(p.obs->regular_user ? 1 : 0);

      if (p.obs->regular_user) {
        std::vector<int> units;
        std::vector<double> w(static_cast<std::size_t>(p.unit_count), 1.0);
        for (int u = 0; u < p.unit_count; ++u) units.push_back(unit_mass + p.unit_off + u);
        // Units beyond the latent cap share the last latent mass.
        w.back() += static_cast<double>(p.obs->units_per_day - p.unit_count);
        std::vector<int> mean{phi0};
        for (int k = 0; k < K; ++k)
          mean.push_back(phi_d + cov.offset(k) + p.lev[static_cast<std::size_t>(k)]);
        g.boxcox_latent.mean.push_row(mean);
        g.boxcox_latent.amount.push_row(units, w);
        if (p.obs->body_weight_kg) {
          g.boxcox_latent.w_const.push_back(*p.obs->body_weight_kg);
          g.boxcox_latent.w_idx.push_back(-1);
        } else {
          g.boxcox_latent.w_const.push_back(0.0);
          g.boxcox_latent.w_idx.push_back(wmis + p.weight_mis);
        }
      }
      std::vector<int> wmean{omega0};
      for (int k = 0; k < pl.pairs(); ++k)
        wmean.push_back(omega + pl.index(cov, k, p.lev[static_cast<std::size_t>(k)],
                                         p.lev[static_cast<std::size_t>(k) + 1]));
      if (p.obs->body_weight_kg) {
        g.gaussian.mean.push_row(wmean);
        g.gaussian.v.push_back(std::log(*p.obs->body_weight_kg));
        g.gaussian.c0.push_back(-std::log(*p.obs->body_weight_kg));
        g.gaussian.sd_idx.push_back(sigma_w);
      } else {
        g.lognormal_latent.mean.push_row(wmean);
        g.lognormal_latent.target.push_back(wmis + p.weight_mis);
        g.lognormal_latent.sd_idx.push_back(sigma_w);
      }
    }
  }

  g.report.push_back({"freq0", freq0});
  report_levels(g, "freq", freq_d, cov);
  report_range(g, "sigma_freq", sigma_freq, K);
  g.report.push_back({"phi0", phi0});
  report_levels(g, "phi", phi_d, cov);
  report_range(g, "sigma_phi", sigma_phi, K);
  g.report.push_back({"lambda", lambda});
  g.report.push_back({"sigma_aw", sigma_aw});
  g.report.push_back({"omega0", omega0});
  if (pl.total > 0) report_pairs(g, "omega", omega, cov, pl);
  g.report.push_back({"sigma_w", sigma_w});
  return g;
}

ModelGraph build_market_graph(const std::vector<ProductObservation>& products,
                              const CategoryTree& tree, const std::string& root,
                              MarketSource source) {
  std::vector<const ProductObservation*> rows;
  for (const auto& r : products)
    if (tree.is_under(r.category, root)) rows.push_back(&r);
  if (rows.empty()) throw_data("EmptyCategory", "no products under category \"" + root + "\"");

  ModelGraph g;
  auto& L = g.layout;
  if (source == MarketSource::Supplements) {
    g.name = "market_supplements";
    L.add("logit_pi", {1}, Constraint::None);
    const int lp = L.block("logit_pi").c_offset;
    const int pi_d = L.c_dim();
    g.derived_dim = 1;
    auto lg = std::make_unique<LogisticEntries>();
    lg->out.push_back(pi_d);
    lg->in.push_back(lp);
    g.derived.push_back(std::move(lg));
    g.normal_prior.add(lp, 0.0, -1, kWideSd, -1);
    for (const ProductObservation* r : rows) {
      g.bernoulli.lp.push_row({lp});
      g.bernoulli.y.push_back(r->contains_chemical ? 1 : 0);
    }
    g.report.push_back({"logit_pi", lp});
    g.report.push_back({"pi", pi_d});
    return g;
  }

  const bool food = source == MarketSource::Food;
  g.name = food ? "market_food" : "market_pcp";
  const std::string b0_name = food ? "delta0" : "xi0";
  const std::string eff_name = food ? "delta" : "xi";
  const std::string sd_name = food ? "sigma_delta" : "sigma_xi";

  std::vector<std::string> cats = product_categories(products, tree, root);
  std::map<std::string, int> cat_index;
  for (std::size_t i = 0; i < cats.size(); ++i) cat_index[cats[i]] = static_cast<int>(i);
  const int G = static_cast<int>(cats.size());

  L.add(b0_name, {1}, Constraint::None);
  L.add(sd_name, {1}, Constraint::Positive);
  L.add(eff_name + "_z", {G}, Constraint::None);
  const int b0 = L.block(b0_name).c_offset;
  const int sd = L.block(sd_name).c_offset;
  const int z = L.block(eff_name + "_z").c_offset;

  int d = L.c_dim();
  const int eff_d = d; d += G;
  const int lin_d = d; d += G;
  const int pi_d = d; d += G;
  g.derived_dim = d - L.c_dim();

  add_scaled(g, eff_d, z, G, std::vector<int>(static_cast<std::size_t>(G), sd), -1);
  {
    auto sum = std::make_unique<SumEntries>();
    for (int gi = 0; gi < G; ++gi) {
      sum->out.push_back(lin_d + gi);
      sum->inputs.push_row({b0, eff_d + gi});
    }
    g.derived.push_back(std::move(sum));
    auto lg = std::make_unique<LogisticEntries>();
    for (int gi = 0; gi < G; ++gi) {
      lg->out.push_back(pi_d + gi);
      lg->in.push_back(lin_d + gi);
    }
    g.derived.push_back(std::move(lg));
  }

  g.normal_prior.add(b0, 0.0, -1, kWideSd, -1);
  add_std_normal(g.normal_prior, z, G);
  add_halfnormal(g.halfnormal_prior, sd, 1);

  for (const ProductObservation* r : rows) {
    g.bernoulli.lp.push_row({b0, eff_d + cat_index[r->category]});
    g.bernoulli.y.push_back(r->contains_chemical ? 1 : 0);
  }

  g.report.push_back({b0_name, b0});
  report_range(g, eff_name, eff_d, G);
  g.report.push_back({sd_name, sd});
  report_range(g, "pi", pi_d, G);
  return g;
}

ModelGraph build_food_concentration_graph(const std::vector<ConcentrationObservation>& conc,
                                          const CategoryTree& tree, const std::string& root) {
  std::vector<std::string> mids, leaves;
  concentration_nodes(tree, root, &mids, &leaves);
  std::map<std::string, int> mid_index, leaf_index;
  for (std::size_t i = 0; i < mids.size(); ++i) mid_index[mids[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < leaves.size(); ++i) leaf_index[leaves[i]] = static_cast<int>(i);
  const int nm = static_cast<int>(mids.size());
  const int nl = static_cast<int>(leaves.size());

  std::vector<const ConcentrationObservation*> rows;
  int latents = 0;
  for (const auto& r : conc) {
    if (!tree.is_under(r.category, root)) continue;
    if (!leaf_index.count(r.category))
      throw_data("UnknownCategory",
                 "concentration row for \"" + r.category + "\" is not a leaf under \"" + root + "\"");
    rows.push_back(&r);
    if (r.std_error_mg_per_kg) ++latents;
  }

  ModelGraph g;
  g.name = "conc_food";
  auto& L = g.layout;
  L.add("level1", {1}, Constraint::None);
  L.add("sigma2", {1}, Constraint::Positive);
  L.add("off2_z", {nm}, Constraint::None);
  L.add("sigma3", {1}, Constraint::Positive);
  L.add("off3_z", {nl}, Constraint::None);
  L.add("log_shape", {1}, Constraint::Positive);
  if (latents > 0) L.add("latent_conc", {latents}, Constraint::Positive);

  const int level1 = L.block("level1").c_offset;
  const int sigma2 = L.block("sigma2").c_offset;
  const int off2_z = L.block("off2_z").c_offset;
  const int sigma3 = L.block("sigma3").c_offset;
  const int off3_z = L.block("off3_z").c_offset;
  const int log_shape = L.block("log_shape").c_offset;
  const int latent = latents > 0 ? L.block("latent_conc").c_offset : -1;

  int d = L.c_dim();
  const int off2_d = d; d += nm;
  const int off3_d = d; d += nl;
  const int lmed_d = d; d += nl;
  const int med_d = d; d += nl;
  const int catlmed_d = d; d += nm;
  const int catmed_d = d; d += nm;
  const int shape_d = d; d += 1;
  g.derived_dim = d - L.c_dim();

  add_scaled(g, off2_d, off2_z, nm, std::vector<int>(static_cast<std::size_t>(nm), sigma2), -1);
  add_scaled(g, off3_d, off3_z, nl, std::vector<int>(static_cast<std::size_t>(nl), sigma3), -1);
  {
    auto sum = std::make_unique<SumEntries>();
    for (int l = 0; l < nl; ++l) {
      sum->out.push_back(lmed_d + l);
      const int mid = mid_index[tree.node(leaves[static_cast<std::size_t>(l)]).parent];
      sum->inputs.push_row({level1, off2_d + mid, off3_d + l});
    }
    // Mid-level medians (no product offset) feed the simulator.
    for (int m = 0; m < nm; ++m) {
      sum->out.push_back(catlmed_d + m);
      sum->inputs.push_row({level1, off2_d + m});
    }
    g.derived.push_back(std::move(sum));
    auto ex = std::make_unique<ExpEntries>();
    for (int l = 0; l < nl; ++l) {
      ex->out.push_back(med_d + l);
      ex->in.push_back(lmed_d + l);
    }
    for (int m = 0; m < nm; ++m) {
      ex->out.push_back(catmed_d + m);
      ex->in.push_back(catlmed_d + m);
    }
    ex->out.push_back(shape_d);
    ex->in.push_back(log_shape);
    g.derived.push_back(std::move(ex));
  }

  g.normal_prior.add(level1, 0.0, -1, kWideSd, -1);
  add_std_normal(g.normal_prior, off2_z, nm);
  add_std_normal(g.normal_prior, off3_z, nl);
  add_halfnormal(g.halfnormal_prior, sigma2, 1);
  add_halfnormal(g.halfnormal_prior, sigma3, 1);
  add_halfnormal(g.halfnormal_prior, log_shape, 1);

  g.gamma_median.log_shape_idx = log_shape;
  int li = 0;
  for (const ConcentrationObservation* r : rows) {
    g.gamma_median.log_median.push_row({lmed_d + leaf_index[r->category]});
    if (r->std_error_mg_per_kg) {
      g.gamma_median.y_const.push_back(0.0);
      g.gamma_median.y_idx.push_back(latent + li);
      g.measurement.y.push_back(r->value_mg_per_kg);
      g.measurement.se.push_back(*r->std_error_mg_per_kg);
      g.measurement.latent_idx.push_back(latent + li);
      ++li;
    } else {
      g.gamma_median.y_const.push_back(r->value_mg_per_kg);
      g.gamma_median.y_idx.push_back(-1);
    }
  }

  g.report.push_back({"level1", level1});
  g.report.push_back({"sigma2", sigma2});
  g.report.push_back({"sigma3", sigma3});
  report_range(g, "off2", off2_d, nm);
  report_range(g, "off3", off3_d, nl);
  g.report.push_back({"shape", shape_d});
  report_range(g, "median", med_d, nl);
  report_range(g, "cat_median", catmed_d, nm);
  return g;
}

}  // namespace aggrex
