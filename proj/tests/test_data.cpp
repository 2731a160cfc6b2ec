#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include "aggrex/csv.hpp"
#include "aggrex/datasets.hpp"
#include "aggrex/errors.hpp"
#include "aggrex/types.hpp"
#include "test_support.hpp"

using namespace aggrex;
using aggrex_test::scratch_dir;
using aggrex_test::synth_data;

namespace {
std::string write_file(const std::string& dir, const std::string& name, const std::string& text) {
  const std::string path = dir + "/" + name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path;
}
}  // namespace

TEST_CASE("csv dialect: quoting, CRLF, embedded separators and newlines") {
  const std::string dir = scratch_dir("csv");
  const std::string path = write_file(dir, "t.csv",
                                      "a,b,c\r\n"
                                      "1,\"x,y\",\"he said \"\"hi\"\"\"\r\n"
                                      "2,\"line\nbreak\",plain\n"
                                      "\n"
                                      "3,,4\n");
  CsvTable t = read_csv(path);
  REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[0][2] == "he said \"hi\"");
  CHECK(t.rows[1][1] == "line\nbreak");
  CHECK(t.rows[2][1] == "");
  CHECK(parse_int(t, 2, 0) == 3);
  CHECK(parse_optional_double(t, 2, 1) == std::nullopt);
  CHECK(t.col("missing") == -1);
  CHECK_THROWS_AS(t.require_col("missing"), Error);
}

TEST_CASE("csv errors carry row numbers and reject ragged rows") {
  const std::string dir = scratch_dir("csv_err");
  const std::string ragged = write_file(dir, "r.csv", "a,b\n1\n");
  CHECK_THROWS_WITH_AS(read_csv(ragged), doctest::Contains("row 1"), Error);
  const std::string bad = write_file(dir, "b.csv", "a\nx\n");
  CsvTable t = read_csv(bad);
  CHECK_THROWS_AS(parse_double(t, 0, 0), Error);
  CHECK_THROWS_AS(read_csv(dir + "/absent.csv"), Error);
}

TEST_CASE("csv escape quotes only when needed") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_escape("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("streaming reader matches the whole-file reader") {
  const std::string dir = scratch_dir("csv_stream");
  const std::string path = write_file(dir, "s.csv", "x,y\n1,\"a,b\"\n2,c\n");
  CsvReader reader(path);
  CHECK(reader.require_col("y") == 1);
  std::vector<std::string> fields;
  REQUIRE(reader.next(&fields));
  CHECK(fields == std::vector<std::string>{"1", "a,b"});
  REQUIRE(reader.next(&fields));
  CHECK(fields == std::vector<std::string>{"2", "c"});
  CHECK_FALSE(reader.next(&fields));
  CHECK(reader.rows_read() == 2);

  const std::string ragged = write_file(dir, "rg.csv", "x,y\n1,2,3\n");
  CsvReader bad(ragged);
  CHECK_THROWS_AS(bad.next(&fields), Error);
}

TEST_CASE("category tree invariants are enforced") {
  std::vector<CategoryNode> nodes = {{"food", "", 1, "food"},
                                     {"fruit", "food", 2, "fruit"},
                                     {"apple", "fruit", 3, "apple"},
                                     {"pear", "fruit", 3, "pear"}};
  CategoryTree tree(nodes);
  CHECK(tree.is_under("apple", "food"));
  CHECK(tree.is_under("food", "food"));
  CHECK_FALSE(tree.is_under("food", "fruit"));
  CHECK(tree.leaves_under("food") == std::vector<std::string>{"apple", "pear"});
  CHECK(tree.resolve({"food", "fruit", "apple"}).id == "apple");
  CHECK_THROWS_AS(tree.resolve({"food", "nope"}), Error);
  CHECK_THROWS_AS(tree.node("nope"), Error);

  // Duplicate id and orphan parent are construction-time errors.
  CHECK_THROWS_AS(CategoryTree({{"a", "", 1, "a"}, {"a", "", 1, "a"}}), Error);
  CHECK_THROWS_AS(CategoryTree({{"a", "ghost", 2, "a"}}), Error);
}

TEST_CASE("stratum table lookups and duplicate rejection") {
  StratumTable table({{"0-12", "female", "north", 10}, {"13+", "male", "south", 20}});
  CHECK(table.total_population() == 30);
  CHECK(table.find("13+", "male", "south") == 1);
  CHECK(table.find("13+", "male", "north") == -1);
  CHECK_THROWS_AS(StratumTable({{"a", "b", "c", 1}, {"a", "b", "c", 2}}), Error);
}

TEST_CASE("category map translates and rejects unknown pairs") {
  CategoryMap map(std::vector<std::array<std::string, 3>>{{"survey", "A01", "apple"}});
  CHECK(map.translate("survey", "A01") == "apple");
  CHECK_THROWS_AS(map.translate("survey", "A02"), Error);
}

TEST_CASE("dataset writers round trip through their loaders") {
  const auto& d = synth_data();
  const std::string dir = scratch_dir("roundtrip");

  write_stratum_table(dir + "/strata.csv", d.census);
  StratumTable census2 = load_stratum_table(dir + "/strata.csv");
  CHECK(census2.strata().size() == d.census.strata().size());
  CHECK(census2.total_population() == d.census.total_population());

  write_category_tree(dir + "/tree.csv", d.tree);
  CategoryTree tree2 = load_category_tree(dir + "/tree.csv");
  CHECK(tree2.nodes().size() == d.tree.nodes().size());

  write_survey(dir + "/survey.csv", d.survey);
  auto survey2 = load_survey(dir + "/survey.csv", tree2);
  REQUIRE(survey2.size() == d.survey.size());
  for (std::size_t i = 0; i < survey2.size(); ++i) {
    CHECK(survey2[i].individual_id == d.survey[i].individual_id);
    CHECK(survey2[i].consumed == d.survey[i].consumed);
    CHECK(survey2[i].amount_g == d.survey[i].amount_g);
    CHECK(survey2[i].body_weight_kg == d.survey[i].body_weight_kg);
  }

  write_products(dir + "/products.csv", d.products);
  CHECK(load_products(dir + "/products.csv", tree2).size() == d.products.size());

  write_concentrations(dir + "/conc.csv", d.concentrations);
  auto conc2 = load_concentrations(dir + "/conc.csv", tree2);
  REQUIRE(conc2.size() == d.concentrations.size());
  for (std::size_t i = 0; i < conc2.size(); ++i) {
    CHECK(conc2[i].value_mg_per_kg == d.concentrations[i].value_mg_per_kg);
    CHECK(conc2[i].std_error_mg_per_kg == d.concentrations[i].std_error_mg_per_kg);
  }

  write_medicines(dir + "/med.csv", d.medicines);
  CHECK(load_medicines(dir + "/med.csv").size() == d.medicines.size());

  write_pcp_constants(dir + "/pcp.csv", d.pcp);
  CHECK(load_pcp_constants(dir + "/pcp.csv").rows().size() == d.pcp.rows().size());
}

TEST_CASE("survey loader validates categories against the tree") {
  const std::string dir = scratch_dir("survey_val");
  const std::string tree_path = write_file(dir, "tree.csv",
                                           "id,parent_id,level,label\n"
                                           "food,,1,food\n"
                                           "fruit,food,2,fruit\n");
  CategoryTree tree = load_category_tree(tree_path);
  const std::string bad = write_file(
      dir, "s.csv",
      "individual_id,day,category,consumed,amount_g,body_weight_kg,age_group,gender,region\n"
      "i1,1,rocks,1,2.0,70,13+,male,north\n");
  CHECK_THROWS_AS(load_survey(bad, tree), Error);

  // Amounts on non-consuming rows are rejected.
  const std::string bad2 = write_file(
      dir, "s2.csv",
      "individual_id,day,category,consumed,amount_g,body_weight_kg,age_group,gender,region\n"
      "i1,1,fruit,0,2.0,70,13+,male,north\n");
  CHECK_THROWS_AS(load_survey(bad2, tree), Error);
}

TEST_CASE("category map translation applies at load time") {
  const std::string dir = scratch_dir("map_load");
  const std::string tree_path = write_file(dir, "tree.csv",
                                           "id,parent_id,level,label\n"
                                           "food,,1,food\n"
                                           "fruit,food,2,fruit\n");
  CategoryTree tree = load_category_tree(tree_path);
  CategoryMap map(std::vector<std::array<std::string, 3>>{{"survey", "F1", "fruit"}});
  const std::string path = write_file(
      dir, "s.csv",
      "individual_id,day,category,consumed,amount_g,body_weight_kg,age_group,gender,region\n"
      "i1,1,F1,1,2.0,70,13+,male,north\n");
  auto rows = load_survey(path, tree, &map);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].category == "fruit");
}

TEST_CASE("medicine records reject unit mismatches at load and duplicates at build") {
  const std::string dir = scratch_dir("med_val");
  const std::string bad = write_file(
      dir, "m2.csv",
      "individual_id,regular_user,units_per_day,body_weight_kg,age_group,gender,region\n"
      "i1,0,3,70,13+,male,north\n");
  CHECK_THROWS_AS(load_medicines(bad), Error);

  const std::string dup = write_file(
      dir, "m.csv",
      "individual_id,regular_user,units_per_day,body_weight_kg,age_group,gender,region\n"
      "i1,1,2,70,13+,male,north\n"
      "i1,0,0,70,13+,male,north\n");
  auto rows = load_medicines(dup);
  ModelConfig cfg;
  CovariateSpace cov = CovariateSpace::from_medicines(rows, cfg.predictors);
  CHECK_THROWS_WITH_AS(build_medicines_graph(rows, cfg, cov), doctest::Contains("i1"), Error);
}
