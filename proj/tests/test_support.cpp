#include "test_support.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "aggrex/datasets.hpp"
#include "aggrex/rng.hpp"
#include "aggrex/synth.hpp"

namespace aggrex_test {

namespace fs = std::filesystem;

std::string scratch_dir(const std::string& tag) {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() /
                 ("aggrex_tests_" + std::to_string(static_cast<long long>(::getpid())));
    fs::create_directories(p);
    return p;
  }();
  fs::path dir = root / tag;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

SynthData::SynthData()
    : dir(scratch_dir("synth_shared")),
      census(std::vector<aggrex::Stratum>{{"0-1", "x", "y", 1}}),  // placeholder, replaced below
      tree(std::vector<aggrex::CategoryNode>{{"root", "", 1, "root"}}),
      pcp(std::vector<aggrex::PcpConstantRow>{{"c", "a", "g", 0.5, 0.1}}) {
  std::string truth = dir + "/truth.json";
  {
    std::FILE* f = std::fopen(truth.c_str(), "wb");
    std::string text = aggrex::default_truth_text();
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  }
  aggrex::run_synth(truth, 11, dir);
  cfg = aggrex::ModelConfig{};
  census = aggrex::load_stratum_table(dir + "/strata.csv");
  tree = aggrex::load_category_tree(dir + "/category_tree.csv");
  survey = aggrex::load_survey(dir + "/survey.csv", tree);
  products = aggrex::load_products(dir + "/products.csv", tree);
  concentrations = aggrex::load_concentrations(dir + "/concentrations.csv", tree);
  medicines = aggrex::load_medicines(dir + "/medicines.csv");
  pcp = aggrex::load_pcp_constants(dir + "/pcp_constants.csv");
  cov = aggrex::CovariateSpace::from_survey(survey, cfg.predictors);
}

const SynthData& synth_data() {
  static SynthData data;
  return data;
}

double max_grad_error(const aggrex::ModelGraph& graph, std::uint64_t seed, int points,
                      int directions_per_point, double h) {
  aggrex::RngStream rng(seed);
  const int n = graph.dim();
  Eigen::VectorXd u(n), v(n), grad(n);
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    for (int i = 0; i < n; ++i) u[i] = 2.0 * (rng.next_u01() - 0.5);
    graph.log_posterior(u, &grad);
    for (int d = 0; d < directions_per_point; ++d) {
      for (int i = 0; i < n; ++i) v[i] = 2.0 * (rng.next_u01() - 0.5);
      v /= v.norm();
      const double fd = (graph.log_posterior(u + h * v) - graph.log_posterior(u - h * v)) /
                        (2.0 * h);
      const double an = grad.dot(v);
      const double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace aggrex_test
