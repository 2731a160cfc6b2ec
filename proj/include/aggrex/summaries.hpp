#pragma once

#include <string>
#include <vector>

namespace aggrex {

// Interpolated sample quantile (the continuous scheme most statistics
// packages default to). `sorted` must be ascending and non-empty.
double quantile_type7(const std::vector<double>& sorted, double p);

struct SummaryOptions {
  std::vector<double> probes{0.05, 0.5, 0.95};
  double ci = 0.95;
  std::vector<std::string> group_by;  // subset of {age_group, gender}
  int ecdf_points = 200;

  void validate() const;
};

struct QuantileSummaryRow {
  double probe = 0.0;
  double estimate = 0.0, ci_low = 0.0, ci_high = 0.0;
};

struct StratumSummaryRow {
  std::string age_group, gender;  // "all" when not grouped
  std::string source;             // food/supplements/medicines/pcp/aggregated
  double estimate = 0.0, ci_low = 0.0, ci_high = 0.0;
};

struct ContributionRow {
  std::string source;
  double share = 0.0, ci_low = 0.0, ci_high = 0.0;
};

struct EcdfRow {
  double value = 0.0;
  double cdf = 0.0, ci_low = 0.0, ci_high = 0.0;
};

struct SummaryResult {
  long long iterations = 0;
  long long individuals = 0;  // rows per iteration
  std::vector<QuantileSummaryRow> quantiles;
  std::vector<StratumSummaryRow> strata;    // per-person mean intake by group
  std::vector<ContributionRow> contributions;
  std::vector<EcdfRow> ecdf;
};

// Streams the per-individual samples file twice (statistics, then the
// distribution band) so memory stays bounded by one iteration, not the file.
// Point estimates are across-iteration medians; intervals are central
// (1 - ci)/2 quantiles of the per-iteration statistics.
SummaryResult summarize_exposure(const std::string& samples_path, const SummaryOptions& options);

// population_quantiles.csv, stratum_summary.csv, source_contributions.csv,
// ecdf_band.csv under out_dir.
void write_summary_files(const std::string& out_dir, const SummaryResult& result);

}  // namespace aggrex
