#pragma once

#include <map>
#include <string>
#include <vector>

#include "aggrex/model_config.hpp"
#include "aggrex/types.hpp"

namespace aggrex {

class CategoryTree;

// Everything the simulator needs besides the draw matrices: the fitted
// predictor layout, per-source category inventories, and the empirical
// resampling pools. The fit command writes this next to the draw files so a
// later simulate run never has to re-open the training data.
struct SimBundle {
  std::vector<std::string> predictors;
  std::vector<std::vector<std::string>> levels;  // sorted, one list per predictor
  std::vector<Stratum> census;                   // population cells to apportion

  std::vector<std::string> food_categories;  // order of the food graph blocks
  // Per food category: mid-node position inside the concentration graph, i.e.
  // the index of its cat_median column.
  std::vector<int> food_conc_index;
  // Per food category: its pi column position in the food market graph.
  std::vector<int> food_market_index;

  std::vector<double> supp_conc_pool;  // observed mg/kg values
  // Keyed "age|gender|region"; "pooled" holds the union and is the fallback
  // for strata with no consuming person-days of their own.
  std::map<std::string, std::vector<int>> supp_count_pool;

  std::vector<std::string> pcp_categories;  // constants-table order
  std::vector<std::string> pcp_labels;      // tree labels, drive retention rules
  std::vector<int> pcp_market_index;        // pi column position per category
  std::vector<PcpConstantRow> pcp_constants;
  std::vector<std::vector<double>> pcp_conc_pools;  // one pool per category

  // Stratum-pool key for a census cell.
  static std::string pool_key(const std::string& age_group, const std::string& gender,
                              const std::string& region);
};

// Assembles the bundle from the training datasets. Pools and inventories are
// recomputed with the same rules the graph builders use, so column indices in
// the bundle line up with draw-matrix columns by construction.
SimBundle build_sim_bundle(const ModelConfig& cfg,
                           const std::vector<std::string>& predictors,
                           const std::vector<std::vector<std::string>>& levels,
                           const StratumTable& census,
                           const std::vector<SurveyObservation>& survey,
                           const std::vector<ProductObservation>& products,
                           const CategoryTree& tree,
                           const std::vector<ConcentrationObservation>& concentrations,
                           const PcpConstants& pcp_constants);

void write_sim_bundle(const std::string& path, const SimBundle& bundle);
SimBundle read_sim_bundle(const std::string& path);

}  // namespace aggrex
