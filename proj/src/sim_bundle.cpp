#include "aggrex/sim_bundle.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "aggrex/builders.hpp"
#include "aggrex/errors.hpp"

namespace aggrex {
namespace {

using nlohmann::json;

json to_json(const SimBundle& b) {
  json j;
  j["version"] = 1;
  j["predictors"] = b.predictors;
  json levels = json::object();
  for (std::size_t k = 0; k < b.predictors.size(); ++k) levels[b.predictors[k]] = b.levels[k];
  j["levels"] = levels;
  json census = json::array();
  for (const Stratum& s : b.census)
    census.push_back({{"age_group", s.age_group},
                      {"gender", s.gender},
                      {"region", s.region},
                      {"count", s.population_count}});
  j["census"] = census;

  j["food"]["categories"] = b.food_categories;
  j["food"]["conc_index"] = b.food_conc_index;
  j["food"]["market_index"] = b.food_market_index;

  j["supplements"]["conc_pool"] = b.supp_conc_pool;
  json counts = json::object();
  for (const auto& kv : b.supp_count_pool) counts[kv.first] = kv.second;
  j["supplements"]["count_pool"] = counts;

  j["pcp"]["categories"] = b.pcp_categories;
  j["pcp"]["labels"] = b.pcp_labels;
  j["pcp"]["market_index"] = b.pcp_market_index;
  json consts = json::array();
  for (const PcpConstantRow& r : b.pcp_constants) {
    consts.push_back({{"category", r.category},
                      {"age_group", r.age_group},
                      {"gender", r.gender},
                      {"usage_probability", r.usage_probability},
                      {"median_amount_g_per_kg_day", r.median_amount_g_per_kg_day}});
  }
  j["pcp"]["constants"] = consts;
  j["pcp"]["conc_pools"] = b.pcp_conc_pools;
  return j;
}

SimBundle from_json(const json& j, const std::string& origin) {
  SimBundle b;
  try {
    b.predictors = j.at("predictors").get<std::vector<std::string>>();
    const json& levels = j.at("levels");
    for (const std::string& p : b.predictors)
      b.levels.push_back(levels.at(p).get<std::vector<std::string>>());
    for (const json& s : j.at("census")) {
      Stratum st;
      st.age_group = s.at("age_group").get<std::string>();
      st.gender = s.at("gender").get<std::string>();
      st.region = s.at("region").get<std::string>();
      st.population_count = s.at("count").get<long long>();
      b.census.push_back(std::move(st));
    }

    const json& food = j.at("food");
    b.food_categories = food.at("categories").get<std::vector<std::string>>();
    b.food_conc_index = food.at("conc_index").get<std::vector<int>>();
    b.food_market_index = food.at("market_index").get<std::vector<int>>();

    const json& supp = j.at("supplements");
    b.supp_conc_pool = supp.at("conc_pool").get<std::vector<double>>();
    for (const auto& kv : supp.at("count_pool").items())
      b.supp_count_pool[kv.key()] = kv.value().get<std::vector<int>>();

    const json& pcp = j.at("pcp");
    b.pcp_categories = pcp.at("categories").get<std::vector<std::string>>();
    b.pcp_labels = pcp.at("labels").get<std::vector<std::string>>();
    b.pcp_market_index = pcp.at("market_index").get<std::vector<int>>();
    for (const json& r : pcp.at("constants")) {
      PcpConstantRow row;
      row.category = r.at("category").get<std::string>();
      row.age_group = r.at("age_group").get<std::string>();
      row.gender = r.at("gender").get<std::string>();
      row.usage_probability = r.at("usage_probability").get<double>();
      row.median_amount_g_per_kg_day = r.at("median_amount_g_per_kg_day").get<double>();
      b.pcp_constants.push_back(std::move(row));
    }
    b.pcp_conc_pools = pcp.at("conc_pools").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw_data("BadBundle", origin + ": " + e.what());
  }
  if (b.food_conc_index.size() != b.food_categories.size() ||
      b.food_market_index.size() != b.food_categories.size())
    throw_data("BadBundle", origin + ": food index arrays do not match categories");
  if (b.pcp_labels.size() != b.pcp_categories.size() ||
      b.pcp_market_index.size() != b.pcp_categories.size() ||
      b.pcp_conc_pools.size() != b.pcp_categories.size())
    throw_data("BadBundle", origin + ": pcp arrays do not share one length");
  return b;
}

}  // namespace

std::string SimBundle::pool_key(const std::string& age_group, const std::string& gender,
                                const std::string& region) {
  return age_group + "|" + gender + "|" + region;
}

SimBundle build_sim_bundle(const ModelConfig& cfg,
                           const std::vector<std::string>& predictors,
                           const std::vector<std::vector<std::string>>& levels,
                           const StratumTable& census,
                           const std::vector<SurveyObservation>& survey,
                           const std::vector<ProductObservation>& products,
                           const CategoryTree& tree,
                           const std::vector<ConcentrationObservation>& concentrations,
                           const PcpConstants& pcp_constants) {
  SimBundle b;
  b.predictors = predictors;
  b.levels = levels;
  b.census = census.strata();

  const auto market_position = [](const std::vector<std::string>& cats, const std::string& cat,
                                  const char* source) {
    const auto it = std::lower_bound(cats.begin(), cats.end(), cat);
    if (it == cats.end() || *it != cat)
      throw_data("MissingMarket", std::string(source) + " category '" + cat +
                                      "' has no products in the market data");
    return static_cast<int>(it - cats.begin());
  };

  b.food_categories = survey_categories(survey, tree, cfg.food_root);
  std::vector<std::string> mids;
  std::vector<std::string> leaves;
  concentration_nodes(tree, cfg.food_root, &mids, &leaves);
  const std::vector<std::string> food_market = product_categories(products, tree, cfg.food_root);
  for (const std::string& cat : b.food_categories) {
    const auto it = std::lower_bound(mids.begin(), mids.end(), cat);
    if (it == mids.end() || *it != cat)
      throw_data("MissingConcentration",
                 "food category '" + cat + "' has no node in the concentration model");
    b.food_conc_index.push_back(static_cast<int>(it - mids.begin()));
    b.food_market_index.push_back(market_position(food_market, cat, "food"));
  }

  for (const ConcentrationObservation& r : concentrations)
    if (tree.is_under(r.category, cfg.supplement_root)) b.supp_conc_pool.push_back(r.value_mg_per_kg);
  if (b.supp_conc_pool.empty())
    throw_data("EmptyPool", "no concentration values under '" + cfg.supplement_root + "'");

  // Supplements consumed per person per day. Counts come from consuming
  // person-days only; the separate frequency model owns the zeros.
  std::map<std::pair<std::string, int>, std::pair<std::string, int>> day_counts;
  for (const SurveyObservation& r : survey) {
    if (!tree.is_under(r.category, cfg.supplement_root)) continue;
    auto& slot = day_counts[{r.individual_id, r.day}];
    if (slot.first.empty()) slot.first = SimBundle::pool_key(r.age_group, r.gender, r.region);
    if (r.consumed) slot.second += 1;
  }
  std::vector<int>& pooled = b.supp_count_pool["pooled"];
  for (const auto& kv : day_counts) {
    if (kv.second.second < 1) continue;
    b.supp_count_pool[kv.second.first].push_back(kv.second.second);
    pooled.push_back(kv.second.second);
  }
  if (pooled.empty())
    throw_data("EmptyPool", "no consuming person-days under '" + cfg.supplement_root + "'");

  b.pcp_categories = pcp_constants.categories();
  const std::vector<std::string> pcp_market = product_categories(products, tree, cfg.pcp_root);
  for (const std::string& cat : b.pcp_categories) {
    if (!tree.contains(cat))
      throw_data("UnknownCategory", "pcp category '" + cat + "' is not in the category tree");
    b.pcp_labels.push_back(tree.node(cat).label);
    b.pcp_market_index.push_back(market_position(pcp_market, cat, "pcp"));
  }
  b.pcp_constants = pcp_constants.rows();
  b.pcp_conc_pools.resize(b.pcp_categories.size());
  for (const ConcentrationObservation& r : concentrations) {
    for (std::size_t g = 0; g < b.pcp_categories.size(); ++g)
      if (tree.is_under(r.category, b.pcp_categories[g]))
        b.pcp_conc_pools[g].push_back(r.value_mg_per_kg);
  }
  for (std::size_t g = 0; g < b.pcp_categories.size(); ++g)
    if (b.pcp_conc_pools[g].empty())
      throw_data("EmptyPool",
                 "no concentration values under pcp category '" + b.pcp_categories[g] + "'");
  return b;
}

void write_sim_bundle(const std::string& path, const SimBundle& bundle) {
  std::ofstream out(path);
  if (!out) throw_data("FileError", "cannot open '" + path + "' for writing");
  out << to_json(bundle).dump(2) << "\n";
  if (!out.good()) throw_data("FileError", "failed writing '" + path + "'");
}

SimBundle read_sim_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("FileError", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw_data("ParseError", path + ": " + e.what());
  }
  return from_json(j, path);
}

}  // namespace aggrex
