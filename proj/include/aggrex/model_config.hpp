#pragma once

#include <string>
#include <vector>

namespace aggrex {

struct SamplerSettings {
  int chains = 4;
  int warmup = 1000;
  int samples = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  double init_radius = 2.0;

  void validate() const;  // throws Config errors
};

// Fit-time configuration. Parsed from a JSON file; unknown keys are rejected
// so typos cannot silently change a run.
struct ModelConfig {
  std::vector<std::string> predictors{"age_group", "gender", "region"};
  int mixture_components = 3;
  double lambda_lo = -2.0;
  double lambda_hi = 2.0;
  double unit_mass_lo = 0.8;
  double unit_mass_hi = 2.6;
  int max_latent_units = 10;
  std::string food_root = "food";
  std::string supplement_root = "supplements";
  std::string pcp_root = "pcp";
  SamplerSettings sampler;

  void validate() const;
  static ModelConfig load(const std::string& path);
  static ModelConfig from_json_text(const std::string& text, const std::string& origin);
};

}  // namespace aggrex
