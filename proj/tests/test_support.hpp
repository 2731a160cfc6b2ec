#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "aggrex/builders.hpp"
#include "aggrex/model_config.hpp"
#include "aggrex/model_graph.hpp"
#include "aggrex/types.hpp"

namespace aggrex_test {

// Fresh scratch directory under the system temp root; removed on process exit.
std::string scratch_dir(const std::string& tag);

// One small synthetic data set, generated once per process (seed 11) and the
// datasets loaded from it. Shared by the graph and engine tests.
struct SynthData {
  std::string dir;
  aggrex::ModelConfig cfg;
  aggrex::StratumTable census;
  aggrex::CategoryTree tree;
  std::vector<aggrex::SurveyObservation> survey;
  std::vector<aggrex::ProductObservation> products;
  std::vector<aggrex::ConcentrationObservation> concentrations;
  std::vector<aggrex::MedicineUseObservation> medicines;
  aggrex::PcpConstants pcp;
  aggrex::CovariateSpace cov;

  SynthData();
};

const SynthData& synth_data();

// Max relative error between analytic and central-difference directional
// derivatives at `points` random positions (relative to max(1, |fd|, |grad|)).
double max_grad_error(const aggrex::ModelGraph& graph, std::uint64_t seed, int points,
                      int directions_per_point = 4, double h = 1e-5);

}  // namespace aggrex_test
