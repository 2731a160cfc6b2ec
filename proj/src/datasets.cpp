#include "aggrex/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aggrex/csv.hpp"
#include "aggrex/errors.hpp"

namespace aggrex {

namespace {

std::string mapped_category(const std::string& raw, const CategoryTree& tree,
                            const CategoryMap* map, const std::string& scheme,
                            const std::string& path) {
  std::string id = (map && !map->empty()) ? map->translate(scheme, raw) : raw;
  if (!tree.contains(id))
    throw_data("UnknownCategory", path + ": category '" + id + "' is not in the tree");
  return id;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("ParseError", path + ": cannot open for writing");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

StratumTable load_stratum_table(const std::string& path) {
  CsvTable t = read_csv(path);
  const int age = t.require_col("age_group");
  const int gender = t.require_col("gender");
  const int region = t.require_col("region");
  const int count = t.require_col("count");
  std::vector<Stratum> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Stratum s;
    s.age_group = t.rows[r][age];
    s.gender = t.rows[r][gender];
    s.region = t.rows[r][region];
    s.population_count = parse_int(t, r, count);
    rows.push_back(std::move(s));
  }
  return StratumTable(std::move(rows));
}

CategoryTree load_category_tree(const std::string& path) {
  CsvTable t = read_csv(path);
  const int id = t.require_col("id");
  const int parent = t.require_col("parent_id");
  const int level = t.require_col("level");
  const int label = t.require_col("label");
  std::vector<CategoryNode> nodes;
  nodes.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    CategoryNode n;
    n.id = t.rows[r][id];
    n.parent = t.rows[r][parent];
    n.level = static_cast<int>(parse_int(t, r, level));
    n.label = t.rows[r][label];
    nodes.push_back(std::move(n));
  }
  return CategoryTree(std::move(nodes));
}

CategoryMap load_category_map(const std::string& path) {
  CsvTable t = read_csv(path);
  const int scheme = t.require_col("scheme");
  const int code = t.require_col("code");
  const int id = t.require_col("category_id");
  std::vector<std::array<std::string, 3>> entries;
  entries.reserve(t.rows.size());
  for (const auto& row : t.rows)
    entries.push_back({row[scheme], row[code], row[id]});
  return CategoryMap(std::move(entries));
}

std::vector<SurveyObservation> load_survey(const std::string& path, const CategoryTree& tree,
                                           const CategoryMap* map, const std::string& scheme) {
  CsvTable t = read_csv(path);
  const int id = t.require_col("individual_id");
  const int day = t.require_col("day");
  const int cat = t.require_col("category");
  const int consumed = t.require_col("consumed");
  const int amount = t.require_col("amount_g");
  const int bw = t.require_col("body_weight_kg");
  const int age = t.require_col("age_group");
  const int gender = t.require_col("gender");
  const int region = t.require_col("region");
  std::vector<SurveyObservation> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    SurveyObservation o;
    o.individual_id = t.rows[r][id];
    o.day = static_cast<int>(parse_int(t, r, day));
    if (o.day != 1 && o.day != 2)
      throw_data("ParseError", path + ": row " + std::to_string(r + 1) + ": day must be 1 or 2");
    o.category = mapped_category(t.rows[r][cat], tree, map, scheme, path);
    o.consumed = parse_bool(t, r, consumed);
    auto amt = parse_optional_double(t, r, amount);
    if (o.consumed) {
      if (!amt || !(*amt > 0.0))
        throw_data("ParseError", path + ": row " + std::to_string(r + 1) +
                                     ": consumed rows need a positive amount_g");
      o.amount_g = *amt;
    } else if (amt) {
      throw_data("ParseError", path + ": row " + std::to_string(r + 1) +
                                   ": amount_g must be empty when consumed is 0");
    }
    o.body_weight_kg = parse_optional_double(t, r, bw);
    if (o.body_weight_kg && !(*o.body_weight_kg > 0.0))
      throw_data("ParseError", path + ": row " + std::to_string(r + 1) +
                                   ": body_weight_kg must be positive when present");
    o.age_group = t.rows[r][age];
    o.gender = t.rows[r][gender];
    o.region = t.rows[r][region];
    rows.push_back(std::move(o));
  }
  return rows;
}

std::vector<ProductObservation> load_products(const std::string& path, const CategoryTree& tree,
                                              const CategoryMap* map, const std::string& scheme) {
  CsvTable t = read_csv(path);
  const int id = t.require_col("product_id");
  const int cat = t.require_col("category");
  const int contains = t.require_col("contains_chemical");
  std::vector<ProductObservation> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ProductObservation o;
    o.product_id = t.rows[r][id];
    o.category = mapped_category(t.rows[r][cat], tree, map, scheme, path);
    o.contains_chemical = parse_bool(t, r, contains);
    rows.push_back(std::move(o));
  }
  return rows;
}

std::vector<ConcentrationObservation> load_concentrations(const std::string& path,
                                                          const CategoryTree& tree,
                                                          const CategoryMap* map,
                                                          const std::string& scheme) {
  CsvTable t = read_csv(path);
  const int id = t.require_col("product_id");
  const int cat = t.require_col("category");
  const int value = t.require_col("value_mg_per_kg");
  const int se = t.require_col("std_error_mg_per_kg");
  std::vector<ConcentrationObservation> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ConcentrationObservation o;
    o.product_id = t.rows[r][id];
    o.category = mapped_category(t.rows[r][cat], tree, map, scheme, path);
    o.value_mg_per_kg = parse_double(t, r, value);
    if (!(o.value_mg_per_kg > 0.0))
      throw_data("ParseError", path + ": row " + std::to_string(r + 1) +
                                   ": value_mg_per_kg must be positive");
    o.std_error_mg_per_kg = parse_optional_double(t, r, se);
    if (o.std_error_mg_per_kg && !(*o.std_error_mg_per_kg > 0.0))
      throw_data("ParseError", path + ": row " + std::to_string(r + 1) +
                                   ": std_error_mg_per_kg must be positive when present");
    rows.push_back(std::move(o));
  }
  return rows;
}

std::vector<MedicineUseObservation> load_medicines(const std::string& path) {
  CsvTable t = read_csv(path);
  const int id = t.require_col("individual_id");
  const int regular = t.require_col("regular_user");
  const int units = t.require_col("units_per_day");
  const int bw = t.require_col("body_weight_kg");
  const int age = t.require_col("age_group");
  const int gender = t.require_col("gender");
  const int region = t.require_col("region");
  std::vector<MedicineUseObservation> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    MedicineUseObservation o;
    o.individual_id = t.rows[r][id];
    o.regular_user = parse_bool(t, r, regular);
    o.units_per_day = parse_int(t, r, units);
    if (!o.regular_user && o.units_per_day != 0)
      throw_data("ParseError", path + ": row " + std::to_string(r + 1) +
                                   ": non-users must have units_per_day = 0");
    if (o.regular_user && o.units_per_day < 1)
      throw_data("ParseError", path + ": row " + std::to_string(r + 1) +
                                   ": regular users need units_per_day >= 1");
    o.body_weight_kg = parse_optional_double(t, r, bw);
    if (o.body_weight_kg && !(*o.body_weight_kg > 0.0))
      throw_data("ParseError", path + ": row " + std::to_string(r + 1) +
                                   ": body_weight_kg must be positive when present");
    o.age_group = t.rows[r][age];
    o.gender = t.rows[r][gender];
    o.region = t.rows[r][region];
    rows.push_back(std::move(o));
  }
  return rows;
}

PcpConstants load_pcp_constants(const std::string& path) {
  CsvTable t = read_csv(path);
  const int cat = t.require_col("category");
  const int age = t.require_col("age_group");
  const int gender = t.require_col("gender");
  const int prob = t.require_col("usage_probability");
  const int amount = t.require_col("median_amount_g_per_kg_day");
  std::vector<PcpConstantRow> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    PcpConstantRow o;
    o.category = t.rows[r][cat];
    o.age_group = t.rows[r][age];
    o.gender = t.rows[r][gender];
    o.usage_probability = parse_double(t, r, prob);
    o.median_amount_g_per_kg_day = parse_double(t, r, amount);
    rows.push_back(std::move(o));
  }
  return PcpConstants(std::move(rows));
}

void write_stratum_table(const std::string& path, const StratumTable& table) {
  auto out = open_out(path);
  out << "age_group,gender,region,count\n";
  for (const auto& s : table.strata())
    out << csv_escape(s.age_group) << ',' << csv_escape(s.gender) << ',' << csv_escape(s.region)
        << ',' << s.population_count << '\n';
}

void write_category_tree(const std::string& path, const CategoryTree& tree) {
  auto out = open_out(path);
  out << "id,parent_id,level,label\n";
  for (const auto& n : tree.nodes())
    out << csv_escape(n.id) << ',' << csv_escape(n.parent) << ',' << n.level << ','
        << csv_escape(n.label) << '\n';
}

void write_category_map(const std::string& path,
                        const std::vector<std::array<std::string, 3>>& entries) {
  auto out = open_out(path);
  out << "scheme,code,category_id\n";
  for (const auto& e : entries)
    out << csv_escape(e[0]) << ',' << csv_escape(e[1]) << ',' << csv_escape(e[2]) << '\n';
}

void write_survey(const std::string& path, const std::vector<SurveyObservation>& rows) {
  auto out = open_out(path);
  out << "individual_id,day,category,consumed,amount_g,body_weight_kg,age_group,gender,region\n";
  for (const auto& o : rows) {
    out << csv_escape(o.individual_id) << ',' << o.day << ',' << csv_escape(o.category) << ','
        << (o.consumed ? '1' : '0') << ',';
    if (o.consumed) out << format_double(o.amount_g);
    out << ',';
    if (o.body_weight_kg) out << format_double(*o.body_weight_kg);
    out << ',' << csv_escape(o.age_group) << ',' << csv_escape(o.gender) << ','
        << csv_escape(o.region) << '\n';
  }
}

void write_products(const std::string& path, const std::vector<ProductObservation>& rows) {
  auto out = open_out(path);
  out << "product_id,category,contains_chemical\n";
  for (const auto& o : rows)
    out << csv_escape(o.product_id) << ',' << csv_escape(o.category) << ','
        << (o.contains_chemical ? '1' : '0') << '\n';
}

void write_concentrations(const std::string& path,
                          const std::vector<ConcentrationObservation>& rows) {
  auto out = open_out(path);
  out << "product_id,category,value_mg_per_kg,std_error_mg_per_kg\n";
  for (const auto& o : rows) {
    out << csv_escape(o.product_id) << ',' << csv_escape(o.category) << ','
        << format_double(o.value_mg_per_kg) << ',';
    if (o.std_error_mg_per_kg) out << format_double(*o.std_error_mg_per_kg);
    out << '\n';
  }
}

void write_medicines(const std::string& path, const std::vector<MedicineUseObservation>& rows) {
  auto out = open_out(path);
  out << "individual_id,regular_user,units_per_day,body_weight_kg,age_group,gender,region\n";
  for (const auto& o : rows) {
    out << csv_escape(o.individual_id) << ',' << (o.regular_user ? '1' : '0') << ','
        << o.units_per_day << ',';
    if (o.body_weight_kg) out << format_double(*o.body_weight_kg);
    out << ',' << csv_escape(o.age_group) << ',' << csv_escape(o.gender) << ','
        << csv_escape(o.region) << '\n';
  }
}

void write_pcp_constants(const std::string& path, const PcpConstants& constants) {
  auto out = open_out(path);
  out << "category,age_group,gender,usage_probability,median_amount_g_per_kg_day\n";
  for (const auto& r : constants.rows())
    out << csv_escape(r.category) << ',' << csv_escape(r.age_group) << ',' << csv_escape(r.gender)
        << ',' << format_double(r.usage_probability) << ','
        << format_double(r.median_amount_g_per_kg_day) << '\n';
}

}  // namespace aggrex
