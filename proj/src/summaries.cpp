#include "aggrex/summaries.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <utility>

#include "aggrex/csv.hpp"
#include "aggrex/errors.hpp"

namespace aggrex {
namespace {

constexpr int kSources = 4;
const char* kSourceNames[kSources + 1] = {"food", "supplements", "medicines", "pcp", "aggregated"};

struct SampleRow {
  long long iteration = 0;
  std::string age_group, gender;
  double source[kSources + 1] = {0, 0, 0, 0, 0};  // last entry is the aggregate
};

double field_double(const std::string& s, const std::string& path, size_t row) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || errno != 0 || end != s.c_str() + s.size())
    throw_data("ParseError", path + ": row " + std::to_string(row) + ": '" + s + "' is not a number");
  return v;
}

long long field_int(const std::string& s, const std::string& path, size_t row) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || errno != 0 || end != s.c_str() + s.size())
    throw_data("ParseError",
               path + ": row " + std::to_string(row) + ": '" + s + "' is not an integer");
  return v;
}

class SampleStream {
 public:
  explicit SampleStream(const std::string& path) : reader_(path) {
    c_iter_ = reader_.require_col("iteration");
    c_age_ = reader_.require_col("stratum_age");
    c_gender_ = reader_.require_col("stratum_gender");
    for (int s = 0; s < kSources + 1; ++s) c_src_[s] = reader_.require_col(kSourceNames[s]);
  }

  bool next(SampleRow* row) {
    if (!reader_.next(&fields_)) return false;
    row->iteration = field_int(fields_[static_cast<size_t>(c_iter_)], reader_.path(),
                               reader_.rows_read());
    row->age_group = fields_[static_cast<size_t>(c_age_)];
    row->gender = fields_[static_cast<size_t>(c_gender_)];
    for (int s = 0; s < kSources + 1; ++s)
      row->source[s] =
          field_double(fields_[static_cast<size_t>(c_src_[s])], reader_.path(), reader_.rows_read());
    return true;
  }

 private:
  CsvReader reader_;
  std::vector<std::string> fields_;
  int c_iter_ = -1, c_age_ = -1, c_gender_ = -1;
  int c_src_[kSources + 1] = {-1, -1, -1, -1, -1};
};

// Calls on_iteration after the rows of each iteration index have been handed
// to on_row. Iterations must arrive in non-decreasing order.
void for_each_iteration(const std::string& path, const std::function<void(const SampleRow&)>& on_row,
                        const std::function<void(long long)>& on_iteration) {
  SampleStream stream(path);
  SampleRow row;
  long long current = -1;
  while (stream.next(&row)) {
    if (row.iteration != current) {
      if (current >= 0 && row.iteration < current)
        throw_data("UnsortedIterations",
                   path + ": iteration " + std::to_string(row.iteration) + " follows " +
                       std::to_string(current) + "; rows must be grouped by iteration");
      if (current >= 0) on_iteration(current);
      current = row.iteration;
    }
    on_row(row);
  }
  if (current >= 0) on_iteration(current);
}

struct Interval {
  double estimate, lo, hi;
};

Interval across_iterations(std::vector<double> values, double ci) {
  std::sort(values.begin(), values.end());
  const double tail = (1.0 - ci) / 2.0;
  return {quantile_type7(values, 0.5), quantile_type7(values, tail),
          quantile_type7(values, 1.0 - tail)};
}

struct GroupKey {
  std::string age_group, gender;
  bool operator<(const GroupKey& o) const {
    return age_group != o.age_group ? age_group < o.age_group : gender < o.gender;
  }
};

void write_file(const std::string& path, const std::string& header,
                const std::function<void(std::ofstream&)>& body) {
  std::ofstream out(path);
  if (!out) throw_data("FileError", "cannot open '" + path + "' for writing");
  out << header << "\n";
  body(out);
  out.flush();
  if (!out.good()) throw_data("FileError", "failed writing '" + path + "'");
}

std::string num6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double quantile_type7(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw_data("EmptyPool", "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - std::floor(h)) * (sorted[lo + 1] - sorted[lo]);
}

void SummaryOptions::validate() const {
  if (probes.empty()) throw_config("BadProbes", "at least one quantile probe is required");
  for (double p : probes)
    if (!(p > 0.0 && p < 1.0))
      throw_config("BadProbes", "probe " + std::to_string(p) + " is outside (0, 1)");
  if (!(ci > 0.0 && ci < 1.0))
    throw_config("BadInterval", "interval width " + std::to_string(ci) + " is outside (0, 1)");
  for (const std::string& key : group_by)
    if (key != "age_group" && key != "gender")
      throw_config("UnknownGroupKey", "cannot group by '" + key + "' (use age_group, gender)");
  if (ecdf_points < 2) throw_config("BadInterval", "the distribution band needs at least 2 points");
}

SummaryResult summarize_exposure(const std::string& samples_path, const SummaryOptions& options) {
  options.validate();
  const bool by_age = std::count(options.group_by.begin(), options.group_by.end(), "age_group") > 0;
  const bool by_gender = std::count(options.group_by.begin(), options.group_by.end(), "gender") > 0;

  SummaryResult res;

  // Pass 1: per-iteration quantiles, group means, and contribution shares.
  std::vector<std::vector<double>> probe_values(options.probes.size());
  struct GroupAcc {
    double sum[kSources + 1] = {0, 0, 0, 0, 0};
    long long n = 0;
  };
  std::map<GroupKey, std::vector<std::vector<double>>> group_means;  // [key][source][iter]
  std::map<GroupKey, GroupAcc> group_acc;
  double total[kSources + 1] = {0, 0, 0, 0, 0};
  std::vector<std::vector<double>> shares(kSources);
  std::vector<double> agg;
  double global_min = std::numeric_limits<double>::infinity();
  double global_max = -std::numeric_limits<double>::infinity();
  long long iterations = 0;
  long long first_iter_rows = -1;

  for_each_iteration(
      samples_path,
      [&](const SampleRow& row) {
        agg.push_back(row.source[kSources]);
        GroupKey key{by_age ? row.age_group : "all", by_gender ? row.gender : "all"};
        GroupAcc& acc = group_acc[key];
        for (int s = 0; s < kSources + 1; ++s) acc.sum[s] += row.source[s];
        acc.n += 1;
        for (int s = 0; s < kSources + 1; ++s) total[s] += row.source[s];
        global_min = std::min(global_min, row.source[kSources]);
        global_max = std::max(global_max, row.source[kSources]);
      },
      [&](long long) {
        std::sort(agg.begin(), agg.end());
        for (std::size_t p = 0; p < options.probes.size(); ++p)
          probe_values[p].push_back(quantile_type7(agg, options.probes[p]));
        if (first_iter_rows < 0) first_iter_rows = static_cast<long long>(agg.size());
        for (auto& kv : group_acc) {
          auto& per_source = group_means[kv.first];
          per_source.resize(kSources + 1);
          for (int s = 0; s < kSources + 1; ++s)
            per_source[static_cast<std::size_t>(s)].push_back(kv.second.sum[s] /
                                                              static_cast<double>(kv.second.n));
        }
        if (total[kSources] <= 0.0)
          throw_data("ZeroAggregate",
                     "iteration with zero total intake; source shares are undefined");
        for (int s = 0; s < kSources; ++s)
          shares[static_cast<std::size_t>(s)].push_back(total[s] / total[kSources]);
        agg.clear();
        group_acc.clear();
        std::fill(total, total + kSources + 1, 0.0);
        ++iterations;
      });

  if (iterations < 2)
    throw_data("TooFewIterations", samples_path + ": " + std::to_string(iterations) +
                                       " iteration(s); uncertainty needs at least 2");
  res.iterations = iterations;
  res.individuals = first_iter_rows;

  for (std::size_t p = 0; p < options.probes.size(); ++p) {
    const Interval iv = across_iterations(std::move(probe_values[p]), options.ci);
    res.quantiles.push_back({options.probes[p], iv.estimate, iv.lo, iv.hi});
  }

  for (auto& kv : group_means) {
    for (int s = 0; s < kSources + 1; ++s) {
      auto& series = kv.second[static_cast<std::size_t>(s)];
      if (static_cast<long long>(series.size()) != iterations)
        throw_data("MissingGroup", "group " + kv.first.age_group + "/" + kv.first.gender +
                                       " is absent from some iterations");
      const Interval iv = across_iterations(std::move(series), options.ci);
      res.strata.push_back(
          {kv.first.age_group, kv.first.gender, kSourceNames[s], iv.estimate, iv.lo, iv.hi});
    }
  }

  for (int s = 0; s < kSources; ++s) {
    const Interval iv = across_iterations(std::move(shares[static_cast<std::size_t>(s)]), options.ci);
    res.contributions.push_back({kSourceNames[s], iv.estimate, iv.lo, iv.hi});
  }

  // Pass 2: empirical distribution band on a fixed grid.
  std::vector<double> grid(static_cast<std::size_t>(options.ecdf_points));
  if (!(global_max > global_min)) global_max = global_min + 1.0;  // degenerate spread
  for (int i = 0; i < options.ecdf_points; ++i)
    grid[static_cast<std::size_t>(i)] =
        global_min + (global_max - global_min) * static_cast<double>(i) /
                         static_cast<double>(options.ecdf_points - 1);
  std::vector<std::vector<double>> cdf(grid.size());
  for (auto& v : cdf) v.reserve(static_cast<std::size_t>(iterations));
  for_each_iteration(
      samples_path, [&](const SampleRow& row) { agg.push_back(row.source[kSources]); },
      [&](long long) {
        std::sort(agg.begin(), agg.end());
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const auto up = std::upper_bound(agg.begin(), agg.end(), grid[i]);
          cdf[i].push_back(static_cast<double>(up - agg.begin()) /
                           static_cast<double>(agg.size()));
        }
        agg.clear();
      });
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Interval iv = across_iterations(std::move(cdf[i]), options.ci);
    res.ecdf.push_back({grid[i], iv.estimate, iv.lo, iv.hi});
  }
  return res;
}

void write_summary_files(const std::string& out_dir, const SummaryResult& result) {
  write_file(out_dir + "/population_quantiles.csv", "probe,estimate,ci_low,ci_high",
             [&](std::ofstream& out) {
               for (const auto& r : result.quantiles)
                 out << num6(r.probe) << ',' << num6(r.estimate) << ',' << num6(r.ci_low) << ','
                     << num6(r.ci_high) << "\n";
             });
  write_file(out_dir + "/stratum_summary.csv", "age_group,gender,source,estimate,ci_low,ci_high",
             [&](std::ofstream& out) {
               for (const auto& r : result.strata)
                 out << csv_escape(r.age_group) << ',' << csv_escape(r.gender) << ',' << r.source
                     << ',' << num6(r.estimate) << ',' << num6(r.ci_low) << ',' << num6(r.ci_high)
                     << "\n";
             });
  write_file(out_dir + "/source_contributions.csv", "source,share,ci_low,ci_high",
             [&](std::ofstream& out) {
               for (const auto& r : result.contributions)
                 out << r.source << ',' << num6(r.share) << ',' << num6(r.ci_low) << ','
                     << num6(r.ci_high) << "\n";
             });
  write_file(out_dir + "/ecdf_band.csv", "value,cdf,ci_low,ci_high", [&](std::ofstream& out) {
    for (const auto& r : result.ecdf)
      out << num6(r.value) << ',' << num6(r.cdf) << ',' << num6(r.ci_low) << ',' << num6(r.ci_high)
          << "\n";
  });
}

}  // namespace aggrex
