#include "aggrex/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aggrex/apportion.hpp"
#include "aggrex/datasets.hpp"
#include "aggrex/distributions.hpp"
#include "aggrex/errors.hpp"
#include "aggrex/rng.hpp"
#include "aggrex/scenario.hpp"
#include "aggrex/special_functions.hpp"
#include "aggrex/sim_bundle.hpp"
#include "aggrex/transforms.hpp"
#include "aggrex/types.hpp"

namespace aggrex {
namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_config("ParseError", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw_config("ParseError", path + ": not valid JSON");
  return j;
}

double inv_logit(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double normal(double mu, double sd, RngStream& rng) {
  return mu + sd * sample_standard_normal(rng);
}

// Amount draw on the transformed scale, redrawn while the inverse would leave
// the positive domain so generated amounts follow the model's conditional law.
double positive_boxcox_draw(double mean, double sd, const BoxCoxLambda& lambda, RngStream& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double t = normal(mean, sd, rng);
    if (lambda.log_branch() || lambda.value * t + 1.0 > 0.0) return boxcox_inverse(t, lambda);
  }
  throw_data("DegenerateAmounts", "amount distribution lies almost entirely outside the "
                                  "transform's domain; check lambda against the amount scale");
}

struct EffectTruth {
  double intercept = 0.0;
  std::vector<std::vector<double>> levels;  // [predictor][level]

  double lin(const std::vector<int>& lev) const {
    double s = intercept;
    for (std::size_t k = 0; k < levels.size(); ++k)
      s += levels[k][static_cast<std::size_t>(lev[k])];
    return s;
  }
};

EffectTruth effect_truth(const json& intercept, const json& levels) {
  EffectTruth t;
  t.intercept = intercept.get<double>();
  t.levels = levels.get<std::vector<std::vector<double>>>();
  return t;
}

struct Person {
  std::string id;
  int stratum = 0;
  double weight = 0.0;
  bool weight_missing = false;
};

std::vector<Person> make_people(const StratumTable& table, long long n, const char* prefix,
                                double base_adult_kg, double base_child_kg, double missing_rate,
                                RngStream& rng) {
  const std::vector<long long> alloc = allocate_strata(table, n);
  std::vector<Person> people;
  people.reserve(static_cast<std::size_t>(n));
  int seq = 0;
  for (std::size_t d = 0; d < table.size(); ++d) {
    const bool child = is_child_age_band(table.strata()[d].age_group, 12);
    for (long long i = 0; i < alloc[d]; ++i) {
      Person p;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%05d", prefix, ++seq);
      p.id = buf;
      p.stratum = static_cast<int>(d);
      p.weight = std::exp(normal(std::log(child ? base_child_kg : base_adult_kg), 0.12, rng));
      people.push_back(std::move(p));
    }
  }
  // Mask exactly round(rate * n) weights via a partial shuffle.
  const long long k = std::llround(missing_rate * static_cast<double>(n));
  std::vector<std::size_t> idx(people.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (long long i = 0; i < k; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) + rng.next_below(idx.size() - static_cast<std::size_t>(i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    people[idx[static_cast<std::size_t>(i)]].weight_missing = true;
  }
  return people;
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

}  // namespace

std::string default_truth_text() {
  return R"({
  "predictors": ["age_group", "gender", "region"],
  "levels": {
    "age_group": ["0-12", "13-64", "65+"],
    "gender": ["female", "male"],
    "region": ["north", "south"]
  },
  "strata": [
    {"age_group": "0-12", "gender": "female", "region": "north", "count": 450},
    {"age_group": "0-12", "gender": "female", "region": "south", "count": 430},
    {"age_group": "0-12", "gender": "male", "region": "north", "count": 470},
    {"age_group": "0-12", "gender": "male", "region": "south", "count": 440},
    {"age_group": "13-64", "gender": "female", "region": "north", "count": 1300},
    {"age_group": "13-64", "gender": "female", "region": "south", "count": 1280},
    {"age_group": "13-64", "gender": "male", "region": "north", "count": 1340},
    {"age_group": "13-64", "gender": "male", "region": "south", "count": 1260},
    {"age_group": "65+", "gender": "female", "region": "north", "count": 540},
    {"age_group": "65+", "gender": "female", "region": "south", "count": 520},
    {"age_group": "65+", "gender": "male", "region": "north", "count": 560},
    {"age_group": "65+", "gender": "male", "region": "south", "count": 530}
  ],
  "food": {
    "categories": ["beverages", "confectionery", "dairy"],
    "eta0": [-0.3, -1.1, 0.6],
    "eta": [
      [[-0.25, 0.05, 0.2], [-0.1, 0.1], [0.05, -0.05]],
      [[0.3, -0.1, -0.2], [0.15, -0.15], [-0.05, 0.05]],
      [[-0.1, 0.2, -0.1], [0.0, 0.0], [0.1, -0.1]]
    ],
    "gamma0": [0.4, -0.6, 1.0],
    "gamma": [
      [[-0.2, 0.05, 0.15], [-0.05, 0.05], [0.02, -0.02]],
      [[0.15, -0.05, -0.1], [0.1, -0.1], [0.0, 0.0]],
      [[-0.05, 0.1, -0.05], [0.05, -0.05], [-0.04, 0.04]]
    ],
    "subj_sd": [[0.6, 0.5], [0.7, 0.6], [0.5, 0.4]],
    "subj_corr": [0.3, 0.2, 0.4],
    "lambda": 0.3,
    "sigma_aw": 0.5,
    "market_pi": [0.35, 0.2, 0.55],
    "conc_median": [12.0, 30.0, 8.0],
    "conc_shape": 2.0
  },
  "supplements": {
    "alpha0": -1.2,
    "alpha": [[-0.2, 0.1, 0.1], [-0.1, 0.1], [0.05, -0.05]],
    "sigma_tau": 0.8,
    "theta": [0.5, 0.3, 0.2],
    "rho0": [-2.2, -1.0, 0.2],
    "rho": [[-0.1, 0.05, 0.05], [0.08, -0.08], [-0.03, 0.03]],
    "sigma_s": [0.5, 0.4, 0.6],
    "market_pi": 0.3,
    "conc_pool": [32.0, 45.0, 51.0, 58.0, 64.0, 70.0, 77.0, 85.0, 92.0, 101.0, 110.0, 118.0,
                  127.0, 135.0, 144.0, 152.0, 161.0, 170.0, 181.0, 190.0, 199.0, 207.0, 214.0,
                  221.0],
    "count_pool": {"pooled": [1, 1, 1, 2, 1, 1, 2, 3, 1, 2]}
  },
  "medicines": {
    "freq0": -1.6,
    "freq": [[-0.3, 0.1, 0.2], [-0.1, 0.1], [0.0, 0.0]],
    "phi0": -1.5,
    "phi": [[-0.2, 0.1, 0.1], [0.05, -0.05], [0.0, 0.0]],
    "lambda": 0.4,
    "sigma_aw": 0.5
  },
  "pcp": {
    "categories": ["pcp_lip_balm", "pcp_toothpaste"],
    "labels": ["lip balm", "toothpaste"],
    "market_pi": [0.25, 0.45],
    "constants": [
      {"category": "pcp_lip_balm", "age_group": "0-12", "gender": "female", "usage_probability": 0.2, "median_amount_g_per_kg_day": 0.01},
      {"category": "pcp_lip_balm", "age_group": "0-12", "gender": "male", "usage_probability": 0.12, "median_amount_g_per_kg_day": 0.009},
      {"category": "pcp_lip_balm", "age_group": "13-64", "gender": "female", "usage_probability": 0.5, "median_amount_g_per_kg_day": 0.008},
      {"category": "pcp_lip_balm", "age_group": "13-64", "gender": "male", "usage_probability": 0.25, "median_amount_g_per_kg_day": 0.007},
      {"category": "pcp_lip_balm", "age_group": "65+", "gender": "female", "usage_probability": 0.4, "median_amount_g_per_kg_day": 0.007},
      {"category": "pcp_lip_balm", "age_group": "65+", "gender": "male", "usage_probability": 0.2, "median_amount_g_per_kg_day": 0.006},
      {"category": "pcp_toothpaste", "age_group": "0-12", "gender": "female", "usage_probability": 0.92, "median_amount_g_per_kg_day": 0.03},
      {"category": "pcp_toothpaste", "age_group": "0-12", "gender": "male", "usage_probability": 0.9, "median_amount_g_per_kg_day": 0.03},
      {"category": "pcp_toothpaste", "age_group": "13-64", "gender": "female", "usage_probability": 0.96, "median_amount_g_per_kg_day": 0.02},
      {"category": "pcp_toothpaste", "age_group": "13-64", "gender": "male", "usage_probability": 0.95, "median_amount_g_per_kg_day": 0.02},
      {"category": "pcp_toothpaste", "age_group": "65+", "gender": "female", "usage_probability": 0.94, "median_amount_g_per_kg_day": 0.018},
      {"category": "pcp_toothpaste", "age_group": "65+", "gender": "male", "usage_probability": 0.93, "median_amount_g_per_kg_day": 0.018}
    ],
    "conc_pool": [
      [105.0, 140.0, 180.0, 210.0, 245.0, 280.0, 330.0, 390.0],
      [310.0, 380.0, 450.0, 510.0, 570.0, 640.0, 710.0, 780.0, 850.0, 905.0]
    ]
  },
  "gen": {
    "individuals": 400,
    "days": 2,
    "missing_weight_rate": 0.1,
    "medicine_individuals": 300,
    "supplement_categories": 3,
    "products_per_category": 60,
    "conc_per_leaf": 15,
    "leaves_per_category": 2
  }
})";
}

SynthOutput run_synth(const std::string& truth_path, std::uint64_t seed,
                      const std::string& out_dir) {
  json truth = load_json(truth_path);
  SynthOutput out;

  const auto predictors = truth.at("predictors").get<std::vector<std::string>>();
  std::vector<std::vector<std::string>> levels;
  for (const auto& p : predictors) {
    auto lv = truth.at("levels").at(p).get<std::vector<std::string>>();
    if (!std::is_sorted(lv.begin(), lv.end()))
      throw_config("UnsortedLevels", "levels for predictor '" + p +
                                         "' must be listed in ascending order so positions match "
                                         "the fitted effect layout");
    levels.push_back(std::move(lv));
  }

  std::vector<Stratum> strata;
  std::vector<std::vector<int>> stratum_lev;
  for (const auto& s : truth.at("strata")) {
    Stratum st;
    st.age_group = s.at("age_group").get<std::string>();
    st.gender = s.at("gender").get<std::string>();
    st.region = s.at("region").get<std::string>();
    st.population_count = s.at("count").get<long long>();
    std::vector<int> lev;
    for (std::size_t k = 0; k < predictors.size(); ++k) {
      const std::string& want = predictors[k] == "age_group"
                                    ? st.age_group
                                    : (predictors[k] == "gender" ? st.gender : st.region);
      const auto& lv = levels[k];
      const auto it = std::lower_bound(lv.begin(), lv.end(), want);
      if (it == lv.end() || *it != want)
        throw_config("UnknownLevel", "stratum level '" + want + "' missing from truth levels");
      lev.push_back(static_cast<int>(it - lv.begin()));
    }
    stratum_lev.push_back(std::move(lev));
    strata.push_back(std::move(st));
  }
  const StratumTable table(std::move(strata));

  const json& gen = truth.contains("gen") ? truth.at("gen") : json::object();
  const long long n_people = gen.value("individuals", 400LL);
  const int days = gen.value("days", 2);
  const double missing_rate = gen.value("missing_weight_rate", 0.1);
  const long long n_med = gen.value("medicine_individuals", 300LL);
  const int n_supp_cats = gen.value("supplement_categories", 3);
  const int products_per_cat = gen.value("products_per_category", 60);
  const int conc_per_leaf = gen.value("conc_per_leaf", 15);
  const int leaves_per_cat = gen.value("leaves_per_category", 2);
  if (n_people <= 0 || days <= 0 || n_supp_cats <= 0 || products_per_cat <= 0 ||
      conc_per_leaf <= 0 || leaves_per_cat <= 0)
    throw_config("BadGeneratorSize", "generation sizes must be positive");

  // Truth parameters.
  const json& tf = truth.at("food");
  const auto food_cats = tf.at("categories").get<std::vector<std::string>>();
  std::vector<EffectTruth> eta, gamma;
  for (std::size_t g = 0; g < food_cats.size(); ++g) {
    eta.push_back(effect_truth(tf.at("eta0")[g], tf.at("eta")[g]));
    gamma.push_back(effect_truth(tf.at("gamma0")[g], tf.at("gamma")[g]));
  }
  const auto subj_sd = tf.at("subj_sd").get<std::vector<std::vector<double>>>();
  const auto subj_corr = tf.at("subj_corr").get<std::vector<double>>();
  const BoxCoxLambda food_lambda{tf.at("lambda").get<double>()};
  const double food_sigma = tf.at("sigma_aw").get<double>();
  const auto food_market = tf.at("market_pi").get<std::vector<double>>();
  const auto conc_median = tf.at("conc_median").get<std::vector<double>>();
  const double conc_shape = tf.value("conc_shape", 2.0);

  const json& ts = truth.at("supplements");
  const EffectTruth alpha = effect_truth(ts.at("alpha0"), ts.at("alpha"));
  const double sigma_tau = ts.at("sigma_tau").get<double>();
  const auto theta = ts.at("theta").get<std::vector<double>>();
  const auto rho0 = ts.at("rho0").get<std::vector<double>>();
  const EffectTruth rho = effect_truth(json(0.0), ts.at("rho"));
  const auto sigma_s = ts.at("sigma_s").get<std::vector<double>>();
  const double supp_market = ts.at("market_pi").get<double>();
  const auto supp_pool = ts.at("conc_pool").get<std::vector<double>>();
  if (!std::is_sorted(rho0.begin(), rho0.end()))
    throw_config("UnsortedComponents", "mixture location vector rho0 must be ascending");

  const json& tm = truth.at("medicines");
  const EffectTruth m_freq = effect_truth(tm.at("freq0"), tm.at("freq"));
  const EffectTruth m_phi = effect_truth(tm.at("phi0"), tm.at("phi"));
  const BoxCoxLambda med_lambda{tm.at("lambda").get<double>()};
  const double med_sigma = tm.at("sigma_aw").get<double>();

  const json& tp = truth.at("pcp");
  const auto pcp_cats = tp.at("categories").get<std::vector<std::string>>();
  const auto pcp_labels = tp.at("labels").get<std::vector<std::string>>();
  const auto pcp_market = tp.at("market_pi").get<std::vector<double>>();
  std::vector<std::vector<double>> pcp_pools;
  for (const auto& pool : tp.at("conc_pool"))
    pcp_pools.push_back(pool.get<std::vector<double>>());
  std::vector<PcpConstantRow> pcp_rows;
  for (const auto& row : tp.at("constants")) {
    PcpConstantRow r;
    r.category = row.at("category").get<std::string>();
    r.age_group = row.at("age_group").get<std::string>();
    r.gender = row.at("gender").get<std::string>();
    r.usage_probability = row.at("usage_probability").get<double>();
    r.median_amount_g_per_kg_day = row.at("median_amount_g_per_kg_day").get<double>();
    pcp_rows.push_back(std::move(r));
  }

  // Category tree: three-level food hierarchy, flat supplement and pcp roots.
  std::vector<CategoryNode> nodes;
  nodes.push_back({"food", "", 1, "food"});
  std::vector<std::vector<std::string>> food_leaves(food_cats.size());
  for (std::size_t g = 0; g < food_cats.size(); ++g) {
    nodes.push_back({food_cats[g], "food", 2, food_cats[g]});
    for (int l = 0; l < leaves_per_cat; ++l) {
      const std::string leaf = food_cats[g] + "_p" + std::to_string(l);
      nodes.push_back({leaf, food_cats[g], 3, leaf});
      food_leaves[g].push_back(leaf);
    }
  }
  nodes.push_back({"supplements", "", 1, "supplements"});
  std::vector<std::string> supp_cats;
  for (int c = 0; c < n_supp_cats; ++c) {
    const std::string id = "supp_" + std::to_string(c);
    nodes.push_back({id, "supplements", 2, id});
    supp_cats.push_back(id);
  }
  nodes.push_back({"pcp", "", 1, "pcp"});
  for (std::size_t g = 0; g < pcp_cats.size(); ++g)
    nodes.push_back({pcp_cats[g], "pcp", 2, pcp_labels[g]});
  const CategoryTree tree(std::move(nodes));

  RngStream master(seed);
  RngStream surv_rng = master.derive(1);
  RngStream med_rng = master.derive(2);
  RngStream prod_rng = master.derive(3);
  RngStream conc_rng = master.derive(4);

  // Survey: consumption, amounts, and supplement mixture draws per person.
  const std::vector<Person> people =
      make_people(table, n_people, "i", 72.0, 30.0, missing_rate, surv_rng);
  std::vector<SurveyObservation> survey;
  std::map<std::string, std::vector<long long>> count_pool;
  std::vector<long long>& pooled_counts = count_pool["pooled"];

  for (const Person& person : people) {
    const Stratum& st = table.strata()[static_cast<std::size_t>(person.stratum)];
    const std::vector<int>& lev = stratum_lev[static_cast<std::size_t>(person.stratum)];
    SurveyObservation base;
    base.individual_id = person.id;
    base.age_group = st.age_group;
    base.gender = st.gender;
    base.region = st.region;
    if (!person.weight_missing) base.body_weight_kg = person.weight;
    if (person.weight_missing) ++out.missing_weights;

    // Food rows: every (day, category) cell is observed.
    for (std::size_t g = 0; g < food_cats.size(); ++g) {
      const double z0 = sample_standard_normal(surv_rng);
      const double z1 = sample_standard_normal(surv_rng);
      const double r = subj_corr[g];
      const double ups = subj_sd[g][0] * z0;
      const double nu = subj_sd[g][1] * (r * z0 + std::sqrt(1.0 - r * r) * z1);
      const double p_consume = inv_logit(eta[g].lin(lev) + ups);
      const double mean_t = gamma[g].lin(lev) + nu;
      for (int d = 1; d <= days; ++d) {
        SurveyObservation row = base;
        row.day = d;
        row.category = food_cats[g];
        row.consumed = surv_rng.next_u01() < p_consume;
        if (row.consumed)
          row.amount_g =
              positive_boxcox_draw(mean_t, food_sigma, food_lambda, surv_rng) * person.weight;
        survey.push_back(std::move(row));
      }
    }

    // Supplement rows: mixture component and individual frequency effect are
    // person-level; consuming days spread the daily amount over 1-3 products.
    const int z = categorical(theta, surv_rng);
    const double mean_per_kg =
        std::exp(normal(rho0[static_cast<std::size_t>(z)] + rho.lin(lev),
                        sigma_s[static_cast<std::size_t>(z)], surv_rng));
    const double tau = normal(0.0, sigma_tau, surv_rng);
    const double p_supp = inv_logit(alpha.lin(lev) + tau);
    const std::string key = SimBundle::pool_key(st.age_group, st.gender, st.region);
    for (int d = 1; d <= days; ++d) {
      const bool consumed = surv_rng.next_u01() < p_supp;
      if (!consumed) {
        SurveyObservation row = base;
        row.day = d;
        row.category = supp_cats[0];
        row.consumed = false;
        survey.push_back(std::move(row));
        continue;
      }
      int r = 1;
      if (n_supp_cats > 1 && surv_rng.next_u01() < 0.35) ++r;
      if (n_supp_cats > 2 && r == 2 && surv_rng.next_u01() < 0.5) ++r;
      std::vector<int> order(supp_cats.size());
      for (std::size_t c = 0; c < order.size(); ++c) order[c] = static_cast<int>(c);
      for (int c = 0; c < r; ++c) {
        const std::size_t pick = static_cast<std::size_t>(c) +
                                 surv_rng.next_below(order.size() - static_cast<std::size_t>(c));
        std::swap(order[static_cast<std::size_t>(c)], order[pick]);
      }
      const double total_g = mean_per_kg * person.weight;
      for (int c = 0; c < r; ++c) {
        SurveyObservation row = base;
        row.day = d;
        row.category = supp_cats[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])];
        row.consumed = true;
        row.amount_g = total_g / static_cast<double>(r);
        survey.push_back(std::move(row));
      }
      count_pool[key].push_back(r);
      pooled_counts.push_back(r);
    }
  }
  out.survey_rows = static_cast<long long>(survey.size());

  // Medicines: independent panel with its own weights.
  const std::vector<Person> med_people =
      make_people(table, n_med, "m", 72.0, 30.0, missing_rate, med_rng);
  std::vector<MedicineUseObservation> medicines;
  for (const Person& person : med_people) {
    const Stratum& st = table.strata()[static_cast<std::size_t>(person.stratum)];
    const std::vector<int>& lev = stratum_lev[static_cast<std::size_t>(person.stratum)];
    MedicineUseObservation row;
    row.individual_id = person.id;
    row.age_group = st.age_group;
    row.gender = st.gender;
    row.region = st.region;
    if (!person.weight_missing) row.body_weight_kg = person.weight;
    row.regular_user = med_rng.next_u01() < inv_logit(m_freq.lin(lev));
    if (row.regular_user) {
      const double total_g =
          positive_boxcox_draw(m_phi.lin(lev), med_sigma, med_lambda, med_rng) * person.weight;
      row.units_per_day = std::max(1LL, std::min(60LL, std::llround(total_g / 1.7)));
    }
    medicines.push_back(std::move(row));
  }
  out.medicine_rows = static_cast<long long>(medicines.size());

  // Market presence flags.
  std::vector<ProductObservation> products;
  int prod_seq = 0;
  const auto emit_products = [&](const std::string& category, double pi) {
    for (int k = 0; k < products_per_cat; ++k) {
      ProductObservation p;
      char buf[32];
      std::snprintf(buf, sizeof buf, "p%05d", ++prod_seq);
      p.product_id = buf;
      p.category = category;
      p.contains_chemical = prod_rng.next_u01() < pi;
      products.push_back(std::move(p));
    }
  };
  for (std::size_t g = 0; g < food_cats.size(); ++g) emit_products(food_cats[g], food_market[g]);
  for (int c = 0; c < n_supp_cats; ++c)
    emit_products(supp_cats[static_cast<std::size_t>(c)], supp_market);
  for (std::size_t g = 0; g < pcp_cats.size(); ++g) emit_products(pcp_cats[g], pcp_market[g]);

  // Concentrations: model draws for food leaves, verbatim pools elsewhere so
  // the fitted pipeline resamples exactly the values the truth file carries.
  std::vector<ConcentrationObservation> concentrations;
  int conc_seq = 0;
  const auto next_conc_id = [&]() {
    char buf[32];
    std::snprintf(buf, sizeof buf, "c%05d", ++conc_seq);
    return std::string(buf);
  };
  for (std::size_t g = 0; g < food_cats.size(); ++g) {
    const double rate = gamma_median(conc_shape) / conc_median[g];
    for (const std::string& leaf : food_leaves[g]) {
      for (int k = 0; k < conc_per_leaf; ++k) {
        ConcentrationObservation c;
        c.product_id = next_conc_id();
        c.category = leaf;
        c.value_mg_per_kg = sample_gamma(conc_shape, rate, conc_rng);
        if (k % 5 == 4) c.std_error_mg_per_kg = 0.05 * c.value_mg_per_kg;
        concentrations.push_back(std::move(c));
      }
    }
  }
  for (std::size_t k = 0; k < supp_pool.size(); ++k) {
    ConcentrationObservation c;
    c.product_id = next_conc_id();
    c.category = supp_cats[k % supp_cats.size()];
    c.value_mg_per_kg = supp_pool[k];
    concentrations.push_back(std::move(c));
  }
  for (std::size_t g = 0; g < pcp_cats.size(); ++g)
    for (double v : pcp_pools[g]) {
      ConcentrationObservation c;
      c.product_id = next_conc_id();
      c.category = pcp_cats[g];
      c.value_mg_per_kg = v;
      concentrations.push_back(std::move(c));
    }

  // Write the bundle.
  const auto path = [&](const char* name) { return out_dir + "/" + name; };
  write_stratum_table(path("strata.csv"), table);
  write_category_tree(path("category_tree.csv"), tree);
  write_survey(path("survey.csv"), survey);
  write_products(path("products.csv"), products);
  write_concentrations(path("concentrations.csv"), concentrations);
  write_medicines(path("medicines.csv"), medicines);
  write_pcp_constants(path("pcp_constants.csv"), PcpConstants(pcp_rows));

  // Echo the truth with the realized count pools; the reference runner and
  // the fitted pipeline must resample counts from the same lists.
  json counts = json::object();
  for (const auto& kv : count_pool) counts[kv.first] = kv.second;
  truth["supplements"]["count_pool"] = counts;
  {
    std::ofstream tout(path("truth_params.json"));
    if (!tout) throw_data("FileError", "cannot open truth_params.json for writing");
    tout << truth.dump(2) << "\n";
    if (!tout.good()) throw_data("FileError", "failed writing truth_params.json");
  }

  out.files = {path("strata.csv"),       path("category_tree.csv"), path("survey.csv"),
               path("products.csv"),     path("concentrations.csv"), path("medicines.csv"),
               path("pcp_constants.csv"), path("truth_params.json")};
  return out;
}

}  // namespace aggrex
