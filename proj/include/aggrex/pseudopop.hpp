#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aggrex/sampler.hpp"
#include "aggrex/scenario.hpp"
#include "aggrex/sim_bundle.hpp"
#include "aggrex/transforms.hpp"
#include "aggrex/types.hpp"

namespace aggrex {

// One simulated individual: per-source daily intake (mg per kg body weight)
// and their sum. Disabled sources stay exactly zero.
struct ExposureRow {
  long long iteration = 0;
  int stratum = 0;  // index into the census table
  double source[4] = {0.0, 0.0, 0.0, 0.0};
  double aggregated = 0.0;
};

struct SimReport {
  long long iterations = 0;
  long long individuals = 0;  // per iteration
  long long rows = 0;
  ClampCounter clamps;             // negative-domain power-transform inversions
  long long degenerate_pert = 0;   // market/frequency modes on a boundary
};

// Posterior draw matrices for the seven fitted graphs. All enabled graphs
// must hold the same number of rows; rows with equal index form one joint
// posterior draw.
struct GraphDraws {
  const DrawSet* food = nullptr;
  const DrawSet* market_food = nullptr;
  const DrawSet* conc_food = nullptr;
  const DrawSet* supplements = nullptr;
  const DrawSet* market_supplements = nullptr;
  const DrawSet* medicines = nullptr;
  const DrawSet* market_pcp = nullptr;
};

// Receives rows in deterministic (iteration, stratum, individual) order.
using ExposureSink = std::function<void(const ExposureRow&)>;

// Generates the pseudo-population: apportions the census over strata, then
// for every posterior draw simulates each individual's per-source intake.
// Streams are derived per (draw, stratum, individual, source), so output is
// independent of thread count and a disabled source or market factor never
// shifts the randomness of the others.
SimReport simulate_population(const GraphDraws& draws, const SimBundle& bundle,
                              const StratumTable& census, const ScenarioConfig& scenario,
                              std::uint64_t seed, const ExposureSink& sink, int threads = 1);

// Streaming CSV sink with one row per simulated individual.
class ExposureCsvWriter {
 public:
  ExposureCsvWriter(const std::string& path, const StratumTable& census);
  ~ExposureCsvWriter();

  ExposureCsvWriter(const ExposureCsvWriter&) = delete;
  ExposureCsvWriter& operator=(const ExposureCsvWriter&) = delete;

  void operator()(const ExposureRow& row);
  void close();  // flushes and reports write failures

  static const char* header();

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace aggrex
