#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace aggrex {

// One post-stratification cell. The (age_group, gender, region) triple is
// unique within a table.
struct Stratum {
  std::string age_group;
  std::string gender;
  std::string region;
  long long population_count = 0;
};

// Census table with deterministic (sorted) iteration order.
class StratumTable {
 public:
  explicit StratumTable(std::vector<Stratum> strata);

  const std::vector<Stratum>& strata() const { return strata_; }
  long long total_population() const { return total_; }
  std::size_t size() const { return strata_.size(); }

  // Index of the triple or -1.
  int find(const std::string& age_group, const std::string& gender,
           const std::string& region) const;

 private:
  std::vector<Stratum> strata_;
  long long total_ = 0;
};

// Node in the category hierarchy. Root nodes have an empty parent and level 1;
// every other node's level is its parent's plus one.
struct CategoryNode {
  std::string id;
  std::string parent;  // empty for roots
  int level = 1;
  std::string label;
};

class CategoryTree {
 public:
  explicit CategoryTree(std::vector<CategoryNode> nodes);

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  const CategoryNode& node(const std::string& id) const;
  const std::vector<CategoryNode>& nodes() const { return nodes_; }
  const std::vector<std::string>& children(const std::string& id) const;

  // True when `id` equals `ancestor` or lies underneath it.
  bool is_under(const std::string& id, const std::string& ancestor) const;

  // Leaf ids under `ancestor` (nodes with no children), sorted.
  std::vector<std::string> leaves_under(const std::string& ancestor) const;

  // Resolve a label path starting at a root label, e.g.
  // {"food","confectionery","chewing gum"}. UnknownCategory when no match,
  // AmbiguousPath when labels collide at any step.
  const CategoryNode& resolve(const std::vector<std::string>& path_labels) const;

 private:
  std::vector<CategoryNode> nodes_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<std::string>> children_;
  static const std::vector<std::string> kNoChildren;
};

// (scheme, code) -> category id translation used at load time.
class CategoryMap {
 public:
  CategoryMap() = default;
  explicit CategoryMap(std::vector<std::array<std::string, 3>> entries);  // scheme, code, id

  // Translated id; UnknownCategory when the pair is unmapped.
  const std::string& translate(const std::string& scheme, const std::string& code) const;
  bool empty() const { return map_.empty(); }

 private:
  std::map<std::pair<std::string, std::string>, std::string> map_;
};

// One person-day-category record from the consumption survey. `amount_g` is
// present exactly when `consumed` is true; `body_weight` is empty when the
// weight was not measured.
struct SurveyObservation {
  std::string individual_id;
  int day = 1;  // 1 or 2
  std::string category;
  bool consumed = false;
  double amount_g = 0.0;
  std::optional<double> body_weight_kg;
  std::string age_group;
  std::string gender;
  std::string region;
};

struct ProductObservation {
  std::string product_id;
  std::string category;
  bool contains_chemical = false;
};

struct ConcentrationObservation {
  std::string product_id;
  std::string category;
  double value_mg_per_kg = 0.0;
  std::optional<double> std_error_mg_per_kg;
};

struct MedicineUseObservation {
  std::string individual_id;
  bool regular_user = false;
  long long units_per_day = 0;  // 0 iff not a regular user
  std::optional<double> body_weight_kg;
  std::string age_group;
  std::string gender;
  std::string region;
};

// Published per-category usage constants for personal care products.
struct PcpConstantRow {
  std::string category;
  std::string age_group;
  std::string gender;
  double usage_probability = 0.0;          // in [0, 1]
  double median_amount_g_per_kg_day = 0.0; // daily amount per kg body weight
};

class PcpConstants {
 public:
  explicit PcpConstants(std::vector<PcpConstantRow> rows);

  const std::vector<PcpConstantRow>& rows() const { return rows_; }
  std::vector<std::string> categories() const;

  // MissingConstants when the triple is absent.
  const PcpConstantRow& lookup(const std::string& category, const std::string& age_group,
                               const std::string& gender) const;

 private:
  std::vector<PcpConstantRow> rows_;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index_;
};

}  // namespace aggrex
