#include "aggrex/types.hpp"

#include <algorithm>

#include "aggrex/errors.hpp"

namespace aggrex {

StratumTable::StratumTable(std::vector<Stratum> strata) : strata_(std::move(strata)) {
  if (strata_.empty()) throw_data("EmptyTable", "stratum table has no rows");
  std::sort(strata_.begin(), strata_.end(), [](const Stratum& a, const Stratum& b) {
    return std::tie(a.age_group, a.gender, a.region) < std::tie(b.age_group, b.gender, b.region);
  });
  for (std::size_t i = 0; i < strata_.size(); ++i) {
    const auto& s = strata_[i];
    if (s.population_count < 0)
      throw_data("NegativeCount", "stratum (" + s.age_group + ", " + s.gender + ", " + s.region +
                                      ") has a negative population count");
    if (i > 0) {
      const auto& prev = strata_[i - 1];
      if (prev.age_group == s.age_group && prev.gender == s.gender && prev.region == s.region)
        throw_data("DuplicateStratum", "duplicate stratum (" + s.age_group + ", " + s.gender +
                                           ", " + s.region + ")");
    }
    total_ += s.population_count;
  }
}

int StratumTable::find(const std::string& age_group, const std::string& gender,
                       const std::string& region) const {
  for (std::size_t i = 0; i < strata_.size(); ++i) {
    const auto& s = strata_[i];
    if (s.age_group == age_group && s.gender == gender && s.region == region)
      return static_cast<int>(i);
  }
  return -1;
}

const std::vector<std::string> CategoryTree::kNoChildren;

CategoryTree::CategoryTree(std::vector<CategoryNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw_data("EmptyTree", "category tree has no nodes");
  std::sort(nodes_.begin(), nodes_.end(),
            [](const CategoryNode& a, const CategoryNode& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].id, i).second)
      throw_data("ParseError", "duplicate category id '" + nodes_[i].id + "'");
  }
  for (const auto& n : nodes_) {
    if (n.parent.empty()) {
      if (n.level != 1)
        throw_data("ParseError", "root category '" + n.id + "' must have level 1");
      continue;
    }
    auto it = index_.find(n.parent);
    if (it == index_.end())
      throw_data("UnknownCategory", "category '" + n.id + "' references unknown parent '" +
                                        n.parent + "'");
    if (n.level != nodes_[it->second].level + 1)
      throw_data("ParseError", "category '" + n.id + "' has level " + std::to_string(n.level) +
                                   ", expected parent level + 1");
    children_[n.parent].push_back(n.id);
  }
  for (auto& [id, kids] : children_) std::sort(kids.begin(), kids.end());
}

const CategoryNode& CategoryTree::node(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw_data("UnknownCategory", "unknown category '" + id + "'");
  return nodes_[it->second];
}

const std::vector<std::string>& CategoryTree::children(const std::string& id) const {
  auto it = children_.find(id);
  return it == children_.end() ? kNoChildren : it->second;
}

bool CategoryTree::is_under(const std::string& id, const std::string& ancestor) const {
  std::string cur = id;
  for (;;) {
    if (cur == ancestor) return true;
    const auto& n = node(cur);
    if (n.parent.empty()) return false;
    cur = n.parent;
  }
}

std::vector<std::string> CategoryTree::leaves_under(const std::string& ancestor) const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (children(n.id).empty() && is_under(n.id, ancestor)) out.push_back(n.id);
  }
  return out;
}

const CategoryNode& CategoryTree::resolve(const std::vector<std::string>& path_labels) const {
  if (path_labels.empty()) throw_data("UnknownCategory", "empty category path");
  const CategoryNode* cur = nullptr;
  for (const auto& n : nodes_) {
    if (!n.parent.empty() || n.label != path_labels[0]) continue;
    if (cur) throw_data("AmbiguousPath", "root label '" + path_labels[0] + "' is ambiguous");
    cur = &n;
  }
  if (!cur) throw_data("UnknownCategory", "no root with label '" + path_labels[0] + "'");
  for (std::size_t step = 1; step < path_labels.size(); ++step) {
    const CategoryNode* next = nullptr;
    for (const auto& child_id : children(cur->id)) {
      const auto& child = node(child_id);
      if (child.label != path_labels[step]) continue;
      if (next)
        throw_data("AmbiguousPath", "label '" + path_labels[step] + "' is ambiguous under '" +
                                        cur->id + "'");
      next = &child;
    }
    if (!next)
      throw_data("UnknownCategory", "no category labelled '" + path_labels[step] + "' under '" +
                                        cur->id + "'");
    cur = next;
  }
  return *cur;
}

CategoryMap::CategoryMap(std::vector<std::array<std::string, 3>> entries) {
  for (auto& e : entries) {
    if (!map_.emplace(std::make_pair(e[0], e[1]), e[2]).second)
      throw_data("ParseError", "duplicate category mapping for (" + e[0] + ", " + e[1] + ")");
  }
}

const std::string& CategoryMap::translate(const std::string& scheme, const std::string& code) const {
  auto it = map_.find(std::make_pair(scheme, code));
  if (it == map_.end())
    throw_data("UnknownCategory", "unmapped code '" + code + "' in scheme '" + scheme + "'");
  return it->second;
}

PcpConstants::PcpConstants(std::vector<PcpConstantRow> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw_data("EmptyTable", "personal care constants table has no rows");
  std::sort(rows_.begin(), rows_.end(), [](const PcpConstantRow& a, const PcpConstantRow& b) {
    return std::tie(a.category, a.age_group, a.gender) <
           std::tie(b.category, b.age_group, b.gender);
  });
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (r.usage_probability < 0.0 || r.usage_probability > 1.0)
      throw_data("ParseError", "usage probability out of [0, 1] for category '" + r.category + "'");
    if (r.median_amount_g_per_kg_day < 0.0)
      throw_data("ParseError", "negative median amount for category '" + r.category + "'");
    if (!index_.emplace(std::make_tuple(r.category, r.age_group, r.gender), i).second)
      throw_data("ParseError", "duplicate constants row for (" + r.category + ", " + r.age_group +
                                   ", " + r.gender + ")");
  }
}

std::vector<std::string> PcpConstants::categories() const {
  std::vector<std::string> out;
  for (const auto& r : rows_)
    if (out.empty() || out.back() != r.category) out.push_back(r.category);
  return out;
}

const PcpConstantRow& PcpConstants::lookup(const std::string& category,
                                           const std::string& age_group,
                                           const std::string& gender) const {
  auto it = index_.find(std::make_tuple(category, age_group, gender));
  if (it == index_.end())
    throw_data("MissingConstants", "no constants for (" + category + ", " + age_group + ", " +
                                       gender + ")");
  return rows_[it->second];
}

}  // namespace aggrex
