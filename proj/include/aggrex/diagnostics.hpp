#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "aggrex/sampler.hpp"

namespace aggrex {

struct ColumnDiagnostics {
  std::string name;
  double rhat = 0.0;      // NaN when the quantity is constant across draws
  double ess_bulk = 0.0;  // NaN when constant
  bool constant = false;
};

struct DiagnosticsReport {
  std::vector<ColumnDiagnostics> columns;
  int chains = 0;
  double rhat_limit = 1.01;
  double min_ess_per_chain = 100.0;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  int constant_columns = 0;
  int total_divergences = 0;

  bool pass() const;
};

// Split potential scale reduction over one quantity. `x` holds one column per
// chain and one retained draw per row; each chain is split in half internally.
// Writes true through `constant` when every split sequence has zero variance
// (the statistic is undefined there and comes back NaN).
double split_rhat(const Eigen::Ref<const Eigen::MatrixXd>& x, bool* constant = nullptr);

// Bulk effective sample size: draws are rank-normalized across all chains,
// chains split in half, and the autocorrelation series truncated by the
// initial-monotone-positive-pair rule. NaN for constant quantities.
double ess_bulk(const Eigen::Ref<const Eigen::MatrixXd>& x);

// Per-column diagnostics over every reported quantity. Requires >= 2 chains
// and >= 4 draws per chain (TooFewDraws otherwise).
DiagnosticsReport diagnose(const DrawSet& draws, double rhat_limit = 1.01,
                           double min_ess_per_chain = 100.0);

// Human-readable block for diagnostics files and logs.
std::string format_report(const DiagnosticsReport& report);

}  // namespace aggrex
