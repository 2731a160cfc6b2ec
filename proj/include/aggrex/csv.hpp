#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace aggrex {

// Minimal strict CSV support: comma separated, optional RFC-4180 double
// quoting, UTF-8 passed through verbatim, "." as the decimal separator.
// An empty field is a missing value.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index or -1.
  int col(const std::string& name) const;
  // Column index or a ParseError naming the file and column.
  int require_col(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// Field helpers; row_number is 1-based over data rows (header excluded) and
// is included in error messages.
double parse_double(const CsvTable& t, size_t row, int col);
long long parse_int(const CsvTable& t, size_t row, int col);
bool parse_bool(const CsvTable& t, size_t row, int col);
std::optional<double> parse_optional_double(const CsvTable& t, size_t row, int col);

// Quote a field only when needed; used by all writers.
std::string csv_escape(const std::string& field);

// Row-at-a-time reader for files too large to load whole. Same dialect as
// read_csv; the header is consumed by the constructor.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path);

  const std::string& path() const { return path_; }
  const std::vector<std::string>& header() const { return header_; }
  int col(const std::string& name) const;
  int require_col(const std::string& name) const;

  // False at end of input. Field counts must match the header.
  bool next(std::vector<std::string>* fields);
  size_t rows_read() const { return rows_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  size_t rows_ = 0;
};

}  // namespace aggrex
