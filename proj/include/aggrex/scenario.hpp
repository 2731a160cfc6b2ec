#pragma once

#include <map>
#include <optional>
#include <string>

#include "aggrex/types.hpp"

namespace aggrex {

enum class Source { Food = 0, Supplements = 1, Medicines = 2, Pcp = 3 };

const char* source_name(Source s);  // "food", "supplements", "medicines", "pcp"

// Simulation scenario: which sources run, how market presence and the
// nanoparticle fraction are treated, retention rules, and scale factors.
struct ScenarioConfig {
  bool enabled[4] = {true, true, true, true};
  bool market_presence = true;

  // Fraction multiplying the food-grade sources (food, supplements,
  // medicines) per pseudo-individual when enabled.
  bool nano = false;
  double nano_lo = 0.03, nano_hi = 0.41;

  long long population_total = 100000;
  int iterations_hint = 0;  // used by the straight-line reference runner only

  int child_age_cutoff = 12;
  double child_retention_lo = 0.26, child_retention_hi = 0.67;
  // Adult retention constant per personal-care category label; categories
  // not listed keep factor 1. The label marked child_random draws the child
  // range below the age cutoff instead of its constant.
  std::map<std::string, double> retention{{"lip balm", 1.0}, {"toothpaste", 0.05}};
  std::string child_random_label = "toothpaste";

  double unit_scale[4] = {1e-3, 1e-3, 1e-6, 1e-6};

  bool source_enabled(Source s) const { return enabled[static_cast<int>(s)]; }
  double scale(Source s) const { return unit_scale[static_cast<int>(s)]; }

  void validate() const;
  static ScenarioConfig load(const std::string& path);
  static ScenarioConfig from_json_text(const std::string& text, const std::string& origin);
};

// Age bands are "lo-hi" or "lo+"; a band is a child band when its upper bound
// is at most the cutoff. Malformed bands are data errors.
bool is_child_age_band(const std::string& age_group, int cutoff);

}  // namespace aggrex
