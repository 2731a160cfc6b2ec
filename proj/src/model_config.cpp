#include "aggrex/model_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aggrex/errors.hpp"

namespace aggrex {
namespace {

using nlohmann::json;

void require_known_keys(const json& obj, const std::set<std::string>& known,
                        const std::string& origin, const std::string& scope) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key()))
      throw_config("UnknownKey", origin + ": unknown key \"" + it.key() + "\" in " + scope);
  }
}

json parse_json(const std::string& text, const std::string& origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw_config("ParseError", origin + ": not valid JSON");
  if (!j.is_object()) throw_config("ParseError", origin + ": top level must be an object");
  return j;
}

}  // namespace

void SamplerSettings::validate() const {
  if (chains < 1) throw_config("InvalidConfig", "chains must be >= 1");
  if (warmup < 0) throw_config("InvalidConfig", "warmup must be >= 0");
  if (samples < 1) throw_config("InvalidConfig", "samples must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw_config("InvalidConfig", "target_accept must lie in (0,1)");
  if (max_tree_depth < 1) throw_config("InvalidConfig", "max_tree_depth must be >= 1");
  if (!(init_radius > 0.0)) throw_config("InvalidConfig", "init_radius must be > 0");
}

void ModelConfig::validate() const {
  if (predictors.empty()) throw_config("InvalidConfig", "predictors must be nonempty");
  const std::set<std::string> allowed{"age_group", "gender", "region"};
  std::set<std::string> seen;
  for (const auto& p : predictors) {
    if (!allowed.count(p))
      throw_config("InvalidConfig", "unknown predictor \"" + p + "\" (survey covariates are age_group, gender, region)");
    if (!seen.insert(p).second)
      throw_config("InvalidConfig", "duplicate predictor \"" + p + "\"");
  }
  if (mixture_components < 1 || mixture_components > 8)
    throw_config("InvalidConfig", "mixture_components must lie in [1,8]");
  if (!(lambda_lo < lambda_hi))
    throw_config("InvalidConfig", "lambda prior bounds must satisfy lo < hi");
  if (!(unit_mass_lo > 0.0 && unit_mass_lo < unit_mass_hi))
    throw_config("InvalidConfig", "unit mass bounds must satisfy 0 < lo < hi");
  if (max_latent_units < 1) throw_config("InvalidConfig", "max_latent_units must be >= 1");
  sampler.validate();
}

ModelConfig ModelConfig::from_json_text(const std::string& text, const std::string& origin) {
  json j = parse_json(text, origin);
  require_known_keys(j,
                     {"predictors", "mixture_components", "lambda_prior", "unit_mass_bounds",
                      "max_latent_units", "food_root", "supplement_root", "pcp_root", "sampler"},
                     origin, "model config");
  ModelConfig cfg;
  try {
    if (j.contains("predictors")) cfg.predictors = j["predictors"].get<std::vector<std::string>>();
    if (j.contains("mixture_components")) cfg.mixture_components = j["mixture_components"].get<int>();
    if (j.contains("lambda_prior")) {
      auto v = j["lambda_prior"].get<std::vector<double>>();
      if (v.size() != 2) throw_config("InvalidConfig", origin + ": lambda_prior must be [lo, hi]");
      cfg.lambda_lo = v[0];
      cfg.lambda_hi = v[1];
    }
    if (j.contains("unit_mass_bounds")) {
      auto v = j["unit_mass_bounds"].get<std::vector<double>>();
      if (v.size() != 2) throw_config("InvalidConfig", origin + ": unit_mass_bounds must be [lo, hi]");
      cfg.unit_mass_lo = v[0];
      cfg.unit_mass_hi = v[1];
    }
    if (j.contains("max_latent_units")) cfg.max_latent_units = j["max_latent_units"].get<int>();
    if (j.contains("food_root")) cfg.food_root = j["food_root"].get<std::string>();
    if (j.contains("supplement_root")) cfg.supplement_root = j["supplement_root"].get<std::string>();
    if (j.contains("pcp_root")) cfg.pcp_root = j["pcp_root"].get<std::string>();
    if (j.contains("sampler")) {
      const json& s = j["sampler"];
      if (!s.is_object()) throw_config("InvalidConfig", origin + ": sampler must be an object");
      require_known_keys(s,
                         {"chains", "warmup", "samples", "target_accept", "max_tree_depth",
                          "init_radius"},
                         origin, "sampler");
      if (s.contains("chains")) cfg.sampler.chains = s["chains"].get<int>();
      if (s.contains("warmup")) cfg.sampler.warmup = s["warmup"].get<int>();
      if (s.contains("samples")) cfg.sampler.samples = s["samples"].get<int>();
      if (s.contains("target_accept")) cfg.sampler.target_accept = s["target_accept"].get<double>();
      if (s.contains("max_tree_depth")) cfg.sampler.max_tree_depth = s["max_tree_depth"].get<int>();
      if (s.contains("init_radius")) cfg.sampler.init_radius = s["init_radius"].get<double>();
    }
  } catch (const json::exception& e) {
    throw_config("ParseError", origin + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("FileNotFound", "cannot open model config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), path);
}

}  // namespace aggrex
