#include "aggrex/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "aggrex/errors.hpp"

namespace aggrex {

namespace {

// Splits one physical record. `line` must already contain balanced quotes;
// read_csv joins physical lines when a quoted field spans a newline.
std::vector<std::string> split_record(const std::string& line, const std::string& path) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      if (!field.empty())
        throw_data("ParseError", path + ": stray quote inside unquoted field");
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw_data("ParseError", path + ": unterminated quoted field");
  out.push_back(field);
  return out;
}

bool has_unbalanced_quote(const std::string& s) {
  bool quoted = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
  }
  return quoted;
}

}  // namespace

int CsvTable::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvTable::require_col(const std::string& name) const {
  int c = col(name);
  if (c < 0) throw_data("ParseError", path + ": missing required column '" + name + "'");
  return c;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("ParseError", path + ": cannot open file");
  CsvTable t;
  t.path = path;
  std::string line, record;
  size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    record = record.empty() ? line : record + "\n" + line;
    if (has_unbalanced_quote(record)) continue;  // quoted field spans newline
    if (!have_header) {
      t.header = split_record(record, path);
      if (t.header.empty() || (t.header.size() == 1 && t.header[0].empty()))
        throw_data("ParseError", path + ": empty header");
      have_header = true;
    } else {
      if (record.empty()) {
        record.clear();
        continue;  // ignore trailing blank lines
      }
      auto fields = split_record(record, path);
      if (fields.size() != t.header.size()) {
        std::ostringstream os;
        os << path << ": row " << t.rows.size() + 1 << " has " << fields.size()
           << " fields, expected " << t.header.size();
        throw_data("ParseError", os.str());
      }
      t.rows.push_back(std::move(fields));
    }
    record.clear();
  }
  if (!have_header) throw_data("ParseError", path + ": empty file");
  return t;
}

namespace {

[[noreturn]] void field_error(const CsvTable& t, size_t row, int col, const char* what) {
  std::ostringstream os;
  os << t.path << ": row " << row + 1 << ", column '" << t.header[col] << "': " << what
     << " (value '" << t.rows[row][col] << "')";
  throw_data("ParseError", os.str());
}

}  // namespace

double parse_double(const CsvTable& t, size_t row, int col) {
  const std::string& s = t.rows[row][col];
  if (s.empty()) field_error(t, row, col, "empty field where a number is required");
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size()) field_error(t, row, col, "not a number");
  return v;
}

long long parse_int(const CsvTable& t, size_t row, int col) {
  const std::string& s = t.rows[row][col];
  if (s.empty()) field_error(t, row, col, "empty field where an integer is required");
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) field_error(t, row, col, "not an integer");
  return v;
}

bool parse_bool(const CsvTable& t, size_t row, int col) {
  const std::string& s = t.rows[row][col];
  if (s == "1" || s == "true" || s == "TRUE" || s == "True") return true;
  if (s == "0" || s == "false" || s == "FALSE" || s == "False") return false;
  field_error(t, row, col, "not a boolean (use 0/1)");
}

std::optional<double> parse_optional_double(const CsvTable& t, size_t row, int col) {
  if (t.rows[row][col].empty()) return std::nullopt;
  return parse_double(t, row, col);
}

std::string csv_escape(const std::string& field) {
  bool need = field.find_first_of(",\"\n") != std::string::npos;
  if (!need) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

CsvReader::CsvReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw_data("ParseError", path + ": cannot open file");
  std::string line, record;
  while (std::getline(in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    record = record.empty() ? line : record + "\n" + line;
    if (has_unbalanced_quote(record)) continue;
    header_ = split_record(record, path_);
    if (header_.empty() || (header_.size() == 1 && header_[0].empty()))
      throw_data("ParseError", path + ": empty header");
    return;
  }
  throw_data("ParseError", path + ": empty file");
}

int CsvReader::col(const std::string& name) const {
  for (size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvReader::require_col(const std::string& name) const {
  int c = col(name);
  if (c < 0) throw_data("ParseError", path_ + ": missing required column '" + name + "'");
  return c;
}

bool CsvReader::next(std::vector<std::string>* fields) {
  std::string line, record;
  while (std::getline(in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    record = record.empty() ? line : record + "\n" + line;
    if (has_unbalanced_quote(record)) continue;
    if (record.empty()) {
      record.clear();
      continue;
    }
    *fields = split_record(record, path_);
    ++rows_;
    if (fields->size() != header_.size()) {
      std::ostringstream os;
      os << path_ << ": row " << rows_ << " has " << fields->size() << " fields, expected "
         << header_.size();
      throw_data("ParseError", os.str());
    }
    return true;
  }
  return false;
}

}  // namespace aggrex
