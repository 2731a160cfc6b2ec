#include "aggrex/scenario.hpp"

#include <cctype>
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

int source_index(const std::string& name, const std::string& origin) {
  for (int s = 0; s < 4; ++s)
    if (name == source_name(static_cast<Source>(s))) return s;
  throw_config("InvalidConfig", origin + ": unknown source \"" + name + "\"");
}

}  // namespace

const char* source_name(Source s) {
  switch (s) {
    case Source::Food: return "food";
    case Source::Supplements: return "supplements";
    case Source::Medicines: return "medicines";
    case Source::Pcp: return "pcp";
  }
  return "";
}

void ScenarioConfig::validate() const {
  if (population_total < 1) throw_config("InvalidConfig", "population_total must be >= 1");
  if (!(nano_lo >= 0.0 && nano_lo < nano_hi && nano_hi <= 1.0))
    throw_config("InvalidConfig", "nano fraction range must satisfy 0 <= low < high <= 1");
  if (child_age_cutoff < 0) throw_config("InvalidConfig", "child_age_cutoff must be >= 0");
  if (!(child_retention_lo >= 0.0 && child_retention_lo < child_retention_hi &&
        child_retention_hi <= 1.0))
    throw_config("InvalidConfig", "child retention range must satisfy 0 <= low < high <= 1");
  for (const auto& [label, value] : retention)
    if (!(value >= 0.0 && value <= 1.0))
      throw_config("InvalidConfig", "retention for \"" + label + "\" must lie in [0,1]");
  for (double s : unit_scale)
    if (!(s > 0.0)) throw_config("InvalidConfig", "unit scales must be positive");
  if (iterations_hint < 0) throw_config("InvalidConfig", "iterations must be >= 0");
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_config("ParseError", "cannot open scenario file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), path);
}

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text, const std::string& origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw_config("ParseError", origin + ": not valid JSON");
  if (!j.is_object()) throw_config("ParseError", origin + ": top level must be an object");
  require_known_keys(j,
                     {"preset", "sources", "market_presence", "nano", "population_total",
                      "iterations", "child_age_cutoff", "child_retention", "retention",
                      "child_random_category", "unit_scale"},
                     origin, "scenario");

  ScenarioConfig sc;
  if (j.contains("preset")) {
    const std::string preset = j["preset"].get<std::string>();
    if (preset == "pre_ban") {
      // all four sources, the default
    } else if (preset == "post_ban") {
      sc.enabled[0] = sc.enabled[1] = false;  // the food-additive uses stop
    } else {
      throw_config("InvalidConfig", origin + ": unknown preset \"" + preset + "\"");
    }
  }
  if (j.contains("sources")) {
    if (!j["sources"].is_array())
      throw_config("InvalidConfig", origin + ": sources must be an array");
    for (int s = 0; s < 4; ++s) sc.enabled[s] = false;
    for (const auto& v : j["sources"])
      sc.enabled[source_index(v.get<std::string>(), origin)] = true;
  }
  if (j.contains("market_presence")) sc.market_presence = j["market_presence"].get<bool>();
  if (j.contains("nano")) {
    const auto& v = j["nano"];
    if (v.is_boolean()) {
      sc.nano = v.get<bool>();
    } else if (v.is_object()) {
      require_known_keys(v, {"low", "high"}, origin, "nano");
      sc.nano = true;
      sc.nano_lo = v.at("low").get<double>();
      sc.nano_hi = v.at("high").get<double>();
    } else {
      throw_config("InvalidConfig", origin + ": nano must be a boolean or {low, high}");
    }
  }
  if (j.contains("population_total")) sc.population_total = j["population_total"].get<long long>();
  if (j.contains("iterations")) sc.iterations_hint = j["iterations"].get<int>();
  if (j.contains("child_age_cutoff")) sc.child_age_cutoff = j["child_age_cutoff"].get<int>();
  if (j.contains("child_retention")) {
    const auto& v = j["child_retention"];
    if (!v.is_array() || v.size() != 2)
      throw_config("InvalidConfig", origin + ": child_retention must be [low, high]");
    sc.child_retention_lo = v[0].get<double>();
    sc.child_retention_hi = v[1].get<double>();
  }
  if (j.contains("retention")) {
    if (!j["retention"].is_object())
      throw_config("InvalidConfig", origin + ": retention must map category labels to constants");
    for (auto it = j["retention"].begin(); it != j["retention"].end(); ++it)
      sc.retention[it.key()] = it.value().get<double>();
  }
  if (j.contains("child_random_category"))
    sc.child_random_label = j["child_random_category"].get<std::string>();
  if (j.contains("unit_scale")) {
    if (!j["unit_scale"].is_object())
      throw_config("InvalidConfig", origin + ": unit_scale must map sources to factors");
    for (auto it = j["unit_scale"].begin(); it != j["unit_scale"].end(); ++it)
      sc.unit_scale[source_index(it.key(), origin)] = it.value().get<double>();
  }
  sc.validate();
  return sc;
}

bool is_child_age_band(const std::string& age_group, int cutoff) {
  // "lo-hi" or "lo+"; open-ended bands are never child bands.
  std::size_t i = 0;
  auto read_int = [&](long long& out) {
    std::size_t start = i;
    while (i < age_group.size() && std::isdigit(static_cast<unsigned char>(age_group[i]))) ++i;
    if (i == start) return false;
    out = std::stoll(age_group.substr(start, i - start));
    return true;
  };
  long long lo = 0, hi = 0;
  if (!read_int(lo)) throw_data("ParseError", "age band \"" + age_group + "\" must be lo-hi or lo+");
  if (i < age_group.size() && age_group[i] == '+') {
    if (i + 1 != age_group.size())
      throw_data("ParseError", "age band \"" + age_group + "\" must be lo-hi or lo+");
    return false;
  }
  if (i >= age_group.size() || age_group[i] != '-')
    throw_data("ParseError", "age band \"" + age_group + "\" must be lo-hi or lo+");
  ++i;
  if (!read_int(hi) || i != age_group.size() || hi < lo)
    throw_data("ParseError", "age band \"" + age_group + "\" must be lo-hi or lo+");
  return hi <= cutoff;
}

}  // namespace aggrex
