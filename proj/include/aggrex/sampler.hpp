#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aggrex/model_graph.hpp"

namespace aggrex {

struct SamplerConfig {
  int chains = 4;
  int warmup = 1000;
  int samples = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  double init_radius = 2.0;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 -> one thread per chain up to hardware concurrency
};

struct ChainStats {
  int divergences = 0;      // post-warmup only
  int max_depth_hits = 0;   // post-warmup only
  double step_size = 0.0;   // adapted value used for sampling
  double mean_accept = 0.0; // post-warmup mean acceptance statistic
};

// Posterior draws over a graph's report columns, chain-major: row
// c * samples_per_chain + s holds draw s of chain c.
struct DrawSet {
  std::string graph_name;
  std::vector<std::string> names;
  int chains = 0;
  int samples_per_chain = 0;
  Eigen::MatrixXd draws;
  std::vector<ChainStats> chain_stats;

  int total_divergences() const {
    int n = 0;
    for (const auto& c : chain_stats) n += c.divergences;
    return n;
  }
  Eigen::VectorXd column(int j) const { return draws.col(j); }
  int column_index(const std::string& name) const;  // -1 when absent
};

// No-U-turn sampling with dual-averaging step-size adaptation and windowed
// diagonal metric estimation. Chains run in parallel and are reproducible
// per (seed, graph name, chain index) regardless of thread scheduling.
DrawSet run_nuts(const ModelGraph& graph, const SamplerConfig& cfg);

}  // namespace aggrex
