#pragma once

#include <string>
#include <vector>

#include "aggrex/types.hpp"

namespace aggrex {

// Loaders for the fixed CSV schemas. Columns are matched by name; a missing
// column is a ParseError naming the file and column. When a CategoryMap is
// given, category fields are translated from (scheme, code); otherwise they
// must be tree ids directly. Unknown categories fail at load time.

StratumTable load_stratum_table(const std::string& path);
CategoryTree load_category_tree(const std::string& path);
CategoryMap load_category_map(const std::string& path);

std::vector<SurveyObservation> load_survey(const std::string& path, const CategoryTree& tree,
                                           const CategoryMap* map = nullptr,
                                           const std::string& scheme = "survey");
std::vector<ProductObservation> load_products(const std::string& path, const CategoryTree& tree,
                                              const CategoryMap* map = nullptr,
                                              const std::string& scheme = "products");
std::vector<ConcentrationObservation> load_concentrations(const std::string& path,
                                                          const CategoryTree& tree,
                                                          const CategoryMap* map = nullptr,
                                                          const std::string& scheme = "concentrations");
std::vector<MedicineUseObservation> load_medicines(const std::string& path);
PcpConstants load_pcp_constants(const std::string& path);

// Writers emitting the same schemas (used by the synthetic generator and the
// round-trip tests). Doubles are printed with enough digits to reload
// bit-identically.
void write_stratum_table(const std::string& path, const StratumTable& table);
void write_category_tree(const std::string& path, const CategoryTree& tree);
void write_category_map(const std::string& path,
                        const std::vector<std::array<std::string, 3>>& entries);
void write_survey(const std::string& path, const std::vector<SurveyObservation>& rows);
void write_products(const std::string& path, const std::vector<ProductObservation>& rows);
void write_concentrations(const std::string& path,
                          const std::vector<ConcentrationObservation>& rows);
void write_medicines(const std::string& path, const std::vector<MedicineUseObservation>& rows);
void write_pcp_constants(const std::string& path, const PcpConstants& constants);

// Full-precision double formatting shared by every writer.
std::string format_double(double v);

}  // namespace aggrex
