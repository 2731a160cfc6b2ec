#pragma once

#include <string>
#include <vector>

#include "aggrex/model_config.hpp"
#include "aggrex/model_graph.hpp"
#include "aggrex/types.hpp"

namespace aggrex {

// Levels of the fit-time predictors, in sorted order per predictor. Shared by
// the builders (effect layout) and the simulator (stratum -> level lookup).
class CovariateSpace {
 public:
  CovariateSpace() = default;
  CovariateSpace(std::vector<std::string> names, std::vector<std::vector<std::string>> levels);

  static CovariateSpace from_survey(const std::vector<SurveyObservation>& rows,
                                    const std::vector<std::string>& predictors);
  static CovariateSpace from_medicines(const std::vector<MedicineUseObservation>& rows,
                                       const std::vector<std::string>& predictors);

  int predictors() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& levels(int k) const { return levels_[static_cast<std::size_t>(k)]; }
  int count(int k) const { return static_cast<int>(levels_[static_cast<std::size_t>(k)].size()); }
  int total_levels() const { return total_; }
  int offset(int k) const { return offsets_[static_cast<std::size_t>(k)]; }

  // Level position of `value` for predictor k; UnknownLevel otherwise.
  int index(int k, const std::string& value) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> levels_;
  std::vector<int> offsets_;
  int total_ = 0;
};

// Predictor value of a survey or medicine record by predictor name.
const std::string& covariate_value(const SurveyObservation& o, const std::string& predictor);
const std::string& covariate_value(const MedicineUseObservation& o, const std::string& predictor);

// Draw-matrix column name, e.g. col_name("eta", {2, 0, 1}) -> "eta[2,0,1]".
std::string col_name(const std::string& base, std::initializer_list<int> idx);

enum class MarketSource { Food, Supplements, Pcp };

// Category ids modeled by each builder, in model order (sorted distinct).
std::vector<std::string> survey_categories(const std::vector<SurveyObservation>& rows,
                                           const CategoryTree& tree, const std::string& root);
std::vector<std::string> product_categories(const std::vector<ProductObservation>& rows,
                                            const CategoryTree& tree, const std::string& root);
// Mid-level nodes and leaves of the three-level concentration subtree.
void concentration_nodes(const CategoryTree& tree, const std::string& root,
                         std::vector<std::string>* mids, std::vector<std::string>* leaves);

// Builders assemble the per-source factor graphs from loaded datasets.
// include_likelihood=false keeps priors, transforms, and derived quantities
// but drops every data term (and data-coupled latents), for prior-only runs.
ModelGraph build_food_graph(const std::vector<SurveyObservation>& survey, const CategoryTree& tree,
                            const ModelConfig& cfg, const CovariateSpace& cov,
                            bool include_likelihood = true);

ModelGraph build_supplements_graph(const std::vector<SurveyObservation>& survey,
                                   const CategoryTree& tree, const ModelConfig& cfg,
                                   const CovariateSpace& cov, bool include_likelihood = true);

ModelGraph build_medicines_graph(const std::vector<MedicineUseObservation>& med,
                                 const ModelConfig& cfg, const CovariateSpace& cov,
                                 bool include_likelihood = true);

ModelGraph build_market_graph(const std::vector<ProductObservation>& products,
                              const CategoryTree& tree, const std::string& root,
                              MarketSource source);

ModelGraph build_food_concentration_graph(const std::vector<ConcentrationObservation>& conc,
                                          const CategoryTree& tree, const std::string& root);

}  // namespace aggrex
