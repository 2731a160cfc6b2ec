// Straight-line reference simulation. Everything here is intentionally
// self-contained and linear: standard-library RNG, inline transforms, inline
// apportionment. Do not refactor pieces of this file to share code with the
// engine; its value is independence.
#include "aggrex/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aggrex/errors.hpp"

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

double inv_logit(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double boxcox_inv(double f, double lambda) {
  if (std::abs(lambda) <= 1e-8) return std::exp(f);
  const double base = lambda * f + 1.0;
  if (base <= 0.0) return 0.0;
  return std::pow(base, 1.0 / lambda);
}

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double normal(double mu, double sd) {
    std::normal_distribution<double> d(mu, sd);
    return d(gen);
  }
  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(gen);
  }
  double pert01(double mode) {
    if (mode <= 0.0) return std::max(0.0, mode);
    if (mode >= 1.0) return std::min(1.0, mode);
    std::gamma_distribution<double> ga(1.0 + 4.0 * mode, 1.0);
    std::gamma_distribution<double> gb(1.0 + 4.0 * (1.0 - mode), 1.0);
    const double a = ga(gen), b = gb(gen);
    return a / (a + b);
  }
  int categorical(const std::vector<double>& probs) {
    double u = uniform(0.0, 1.0), acc = 0.0;
    for (std::size_t z = 0; z < probs.size(); ++z) {
      acc += probs[z];
      if (u < acc) return static_cast<int>(z);
    }
    return static_cast<int>(probs.size()) - 1;
  }
  std::size_t index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(gen);
  }
};

std::vector<double> get_vec(const json& j) { return j.get<std::vector<double>>(); }

// effects[k][l] nested arrays
std::vector<std::vector<double>> get_mat(const json& j) {
  return j.get<std::vector<std::vector<double>>>();
}

bool child_band(const std::string& band, int cutoff) {
  const auto dash = band.find('-');
  if (dash == std::string::npos) return false;  // "lo+" style bands are adult
  return std::stol(band.substr(dash + 1)) <= cutoff;
}

}  // namespace

OracleResult oracle_run(const std::string& truth_path, const std::string& scenario_path,
                        std::uint64_t seed) {
  const json truth = load_json(truth_path);
  const json sc = load_json(scenario_path);

  // Scenario knobs, read permissively (the engine owns strict validation).
  bool enabled[4] = {true, true, true, true};
  if (sc.contains("preset") && sc["preset"].get<std::string>() == "post_ban")
    enabled[0] = enabled[1] = false;
  if (sc.contains("sources")) {
    for (int s = 0; s < 4; ++s) enabled[s] = false;
    for (const auto& v : sc["sources"]) {
      const std::string name = v.get<std::string>();
      if (name == "food") enabled[0] = true;
      if (name == "supplements") enabled[1] = true;
      if (name == "medicines") enabled[2] = true;
      if (name == "pcp") enabled[3] = true;
    }
  }
  const bool market_on = sc.value("market_presence", true);
  bool nano = false;
  double nano_lo = 0.03, nano_hi = 0.41;
  if (sc.contains("nano")) {
    if (sc["nano"].is_boolean()) {
      nano = sc["nano"].get<bool>();
    } else {
      nano = true;
      nano_lo = sc["nano"].value("low", 0.03);
      nano_hi = sc["nano"].value("high", 0.41);
    }
  }
  const long long pop_total = sc.value("population_total", 100000LL);
  const int iters = sc.value("iterations", 50);
  const int cutoff = sc.value("child_age_cutoff", 12);
  double child_lo = 0.26, child_hi = 0.67;
  if (sc.contains("child_retention")) {
    child_lo = sc["child_retention"][0].get<double>();
    child_hi = sc["child_retention"][1].get<double>();
  }
  std::map<std::string, double> retention{{"lip balm", 1.0}, {"toothpaste", 0.05}};
  if (sc.contains("retention"))
    for (auto it = sc["retention"].begin(); it != sc["retention"].end(); ++it)
      retention[it.key()] = it.value().get<double>();
  const std::string child_label = sc.value("child_random_category", std::string("toothpaste"));
  double scale[4] = {1e-3, 1e-3, 1e-6, 1e-6};
  if (sc.contains("unit_scale")) {
    const auto& us = sc["unit_scale"];
    if (us.contains("food")) scale[0] = us["food"].get<double>();
    if (us.contains("supplements")) scale[1] = us["supplements"].get<double>();
    if (us.contains("medicines")) scale[2] = us["medicines"].get<double>();
    if (us.contains("pcp")) scale[3] = us["pcp"].get<double>();
  }

  // Truth file: predictor levels, strata, and per-source parameters.
  const std::vector<std::string> predictors = truth.at("predictors").get<std::vector<std::string>>();
  std::vector<std::vector<std::string>> levels;
  for (const auto& p : predictors)
    levels.push_back(truth.at("levels").at(p).get<std::vector<std::string>>());

  struct StratumRow {
    std::string age, gender, region;
    long long count;
    std::vector<int> lev;
  };
  std::vector<StratumRow> strata;
  for (const auto& s : truth.at("strata")) {
    StratumRow r;
    r.age = s.at("age_group").get<std::string>();
    r.gender = s.at("gender").get<std::string>();
    r.region = s.at("region").get<std::string>();
    r.count = s.at("count").get<long long>();
    for (std::size_t k = 0; k < predictors.size(); ++k) {
      const std::string& want =
          predictors[k] == "age_group" ? r.age : (predictors[k] == "gender" ? r.gender : r.region);
      int idx = -1;
      for (std::size_t l = 0; l < levels[k].size(); ++l)
        if (levels[k][l] == want) idx = static_cast<int>(l);
      if (idx < 0) throw_data("UnknownLevel", "stratum level \"" + want + "\" not in truth levels");
      r.lev.push_back(idx);
    }
    strata.push_back(std::move(r));
  }

  // Largest-remainder apportionment with minimum one per populated stratum.
  long long popsum = 0;
  for (const auto& s : strata) popsum += s.count;
  if (popsum <= 0) throw_data("EmptyPopulation", "truth strata have no population");
  std::vector<long long> alloc(strata.size(), 0);
  {
    std::vector<double> rem(strata.size(), 0.0);
    long long assigned = 0;
    for (std::size_t d = 0; d < strata.size(); ++d) {
      const double q = static_cast<double>(pop_total) * static_cast<double>(strata[d].count) /
                       static_cast<double>(popsum);
      alloc[d] = static_cast<long long>(std::floor(q));
      rem[d] = q - static_cast<double>(alloc[d]);
      assigned += alloc[d];
    }
    std::vector<std::size_t> order;
    for (std::size_t d = 0; d < strata.size(); ++d)
      if (strata[d].count > 0) order.push_back(d);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < pop_total; ++k) {
      ++alloc[order[k % order.size()]];
      ++assigned;
    }
    for (std::size_t d = 0; d < strata.size(); ++d) {
      if (strata[d].count <= 0 || alloc[d] > 0) continue;
      std::size_t donor = 0;
      for (std::size_t k = 1; k < strata.size(); ++k)
        if (alloc[k] > alloc[donor]) donor = k;
      --alloc[donor];
      ++alloc[d];
    }
  }

  // Food parameters.
  const json& tf = truth.at("food");
  const auto food_eta0 = get_vec(tf.at("eta0"));
  const auto food_gamma0 = get_vec(tf.at("gamma0"));
  std::vector<std::vector<std::vector<double>>> food_eta, food_gamma;
  for (const auto& cat : tf.at("eta")) food_eta.push_back(get_mat(cat));
  for (const auto& cat : tf.at("gamma")) food_gamma.push_back(get_mat(cat));
  const auto food_subj_sd = tf.at("subj_sd").get<std::vector<std::vector<double>>>();
  const auto food_corr = get_vec(tf.at("subj_corr"));
  const double food_lambda = tf.at("lambda").get<double>();
  const double food_sigma = tf.at("sigma_aw").get<double>();
  const auto food_market = get_vec(tf.at("market_pi"));
  const auto food_conc = get_vec(tf.at("conc_median"));
  const std::size_t GF = food_eta0.size();

  // Supplements.
  const json& ts = truth.at("supplements");
  const double s_alpha0 = ts.at("alpha0").get<double>();
  const auto s_alpha = get_mat(ts.at("alpha"));
  const double s_sigma_tau = ts.at("sigma_tau").get<double>();
  const auto s_theta = get_vec(ts.at("theta"));
  const auto s_rho0 = get_vec(ts.at("rho0"));
  const auto s_rho = get_mat(ts.at("rho"));
  const auto s_sigma = get_vec(ts.at("sigma_s"));
  const double s_market = ts.at("market_pi").get<double>();
  const auto s_pool = get_vec(ts.at("conc_pool"));
  std::map<std::string, std::vector<long long>> s_counts;
  for (auto it = ts.at("count_pool").begin(); it != ts.at("count_pool").end(); ++it)
    s_counts[it.key()] = it.value().get<std::vector<long long>>();

  // Medicines.
  const json& tm = truth.at("medicines");
  const double m_freq0 = tm.at("freq0").get<double>();
  const auto m_freq = get_mat(tm.at("freq"));
  const double m_phi0 = tm.at("phi0").get<double>();
  const auto m_phi = get_mat(tm.at("phi"));
  const double m_lambda = tm.at("lambda").get<double>();
  const double m_sigma = tm.at("sigma_aw").get<double>();

  // Personal care products.
  const json& tp = truth.at("pcp");
  const auto p_categories = tp.at("categories").get<std::vector<std::string>>();
  const auto p_labels = tp.at("labels").get<std::vector<std::string>>();
  const auto p_market = get_vec(tp.at("market_pi"));
  std::vector<std::vector<double>> p_pools;
  for (const auto& pool : tp.at("conc_pool")) p_pools.push_back(get_vec(pool));
  // constants[(category, age, gender)] = (usage_probability, median_amount)
  std::map<std::string, std::pair<double, double>> p_constants;
  for (const auto& row : tp.at("constants")) {
    const std::string key = row.at("category").get<std::string>() + "|" +
                            row.at("age_group").get<std::string>() + "|" +
                            row.at("gender").get<std::string>();
    p_constants[key] = {row.at("usage_probability").get<double>(),
                        row.at("median_amount_g_per_kg_day").get<double>()};
  }

  auto effect_sum = [&](const std::vector<std::vector<double>>& eff, const StratumRow& st) {
    double total = 0.0;
    for (std::size_t k = 0; k < eff.size(); ++k) total += eff[k][static_cast<std::size_t>(st.lev[k])];
    return total;
  };

  Rng rng(seed);
  std::vector<double> agg;
  agg.reserve(static_cast<std::size_t>(iters) * static_cast<std::size_t>(pop_total));

  for (int j = 0; j < iters; ++j) {
    for (std::size_t d = 0; d < strata.size(); ++d) {
      const StratumRow& st = strata[d];
      for (long long i = 0; i < alloc[d]; ++i) {
        double fs = 0.0, ss = 0.0, ms = 0.0, ps = 0.0;

        if (enabled[0]) {
          for (std::size_t g = 0; g < GF; ++g) {
            const double z0 = rng.normal(0.0, 1.0), z1 = rng.normal(0.0, 1.0);
            const double r = food_corr[g];
            const double ups = food_subj_sd[g][0] * z0;
            const double nu = food_subj_sd[g][1] * (r * z0 + std::sqrt(1.0 - r * r) * z1);
            const double mean = food_gamma0[g] + effect_sum(food_gamma[g], st) + nu;
            double amount = 0.0;
            for (int t = 0; t < 100; ++t)
              amount += boxcox_inv(rng.normal(mean, food_sigma), food_lambda);
            amount /= 100.0;
            const double freq = inv_logit(food_eta0[g] + effect_sum(food_eta[g], st) + ups);
            const double market = market_on ? rng.pert01(food_market[g]) : 1.0;
            fs += amount * freq * food_conc[g] * market * scale[0];
          }
        }

        if (enabled[1]) {
          const int z = rng.categorical(s_theta);
          const double amount =
              std::exp(rng.normal(s_rho0[static_cast<std::size_t>(z)] + effect_sum(s_rho, st),
                                  s_sigma[static_cast<std::size_t>(z)]));
          const double tau = rng.normal(0.0, s_sigma_tau);
          const double freq = inv_logit(s_alpha0 + effect_sum(s_alpha, st) + tau);
          const std::string key = st.age + "|" + st.gender + "|" + st.region;
          const auto pool_it = s_counts.count(key) && !s_counts.at(key).empty()
                                   ? s_counts.find(key)
                                   : s_counts.find("pooled");
          if (pool_it == s_counts.end() || pool_it->second.empty())
            throw_data("EmptyPool", "no supplement count pool for stratum " + key);
          const long long r = pool_it->second[rng.index(pool_it->second.size())];
          double conc = 0.0;
          if (r > 0) {
            if (s_pool.empty()) throw_data("EmptyPool", "supplement concentration pool is empty");
            for (long long t = 0; t < r; ++t) conc += s_pool[rng.index(s_pool.size())];
            conc /= static_cast<double>(r);
          }
          const double market = market_on ? rng.pert01(s_market) : 1.0;
          ss = amount * freq * conc * market * scale[1];
        }

        if (enabled[2]) {
          const double x = rng.normal(m_phi0 + effect_sum(m_phi, st), m_sigma);
          const double amount = boxcox_inv(x, m_lambda);
          const double pi = inv_logit(m_freq0 + effect_sum(m_freq, st));
          const double freq = rng.pert01(pi);
          ms = amount * freq * scale[2];
        }

        if (enabled[3]) {
          for (std::size_t g = 0; g < p_categories.size(); ++g) {
            const std::string& label = p_labels[g];
            double e;
            if (label == child_label && child_band(st.age, cutoff)) {
              e = rng.uniform(child_lo, child_hi);
            } else {
              const auto it = retention.find(label);
              e = it != retention.end() ? it->second : 1.0;
            }
            const auto cit = p_constants.find(p_categories[g] + "|" + st.age + "|" + st.gender);
            if (cit == p_constants.end())
              throw_data("MissingConstants", "no personal-care constants for " + p_categories[g] +
                                                 " in stratum " + st.age + "|" + st.gender);
            const double amount = cit->second.second * e;
            const double freq = rng.pert01(cit->second.first);
            if (p_pools[g].empty())
              throw_data("EmptyPool", "empty concentration pool for " + p_categories[g]);
            const double conc = p_pools[g][rng.index(p_pools[g].size())];
            const double market = market_on ? rng.pert01(p_market[g]) : 1.0;
            ps += amount * freq * conc * market * scale[3];
          }
        }

        if (nano) {
          const double frac = rng.uniform(nano_lo, nano_hi);
          fs *= frac;
          ss *= frac;
          ms *= frac;
        }
        agg.push_back(fs + ss + ms + ps);
      }
    }
  }

  std::sort(agg.begin(), agg.end());
  auto quantile = [&](double p) {
    const double h = (static_cast<double>(agg.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= agg.size()) return agg.back();
    return agg[lo] + (h - std::floor(h)) * (agg[lo + 1] - agg[lo]);
  };
  OracleResult res;
  res.samples = static_cast<long long>(agg.size());
  res.p05 = quantile(0.05);
  res.p50 = quantile(0.50);
  res.p95 = quantile(0.95);
  return res;
}

void write_oracle_file(const std::string& path, const OracleResult& result) {
  std::ofstream out(path);
  if (!out) throw_data("ParseError", "cannot open " + path + " for writing");
  char buf[64];
  out << "probe,value\n";
  std::snprintf(buf, sizeof buf, "%.17g", result.p05);
  out << "0.05," << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", result.p50);
  out << "0.5," << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", result.p95);
  out << "0.95," << buf << "\n";
  out << "samples," << result.samples << "\n";
}

}  // namespace aggrex
