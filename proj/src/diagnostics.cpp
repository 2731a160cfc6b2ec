#include "aggrex/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "aggrex/errors.hpp"
#include "aggrex/special_functions.hpp"

namespace aggrex {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Each chain contributes its first and last floor(n/2) draws as separate
// sequences, so within-chain drift shows up as between-sequence variance.
Eigen::MatrixXd split_chains(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const Eigen::Index n = x.rows(), m = x.cols();
  const Eigen::Index half = n / 2;
  Eigen::MatrixXd s(half, 2 * m);
  for (Eigen::Index c = 0; c < m; ++c) {
    s.col(2 * c) = x.col(c).head(half);
    s.col(2 * c + 1) = x.col(c).tail(half);
  }
  return s;
}

struct Moments {
  Eigen::VectorXd mean, var;  // per sequence, var unbiased
  double w = 0.0;             // mean within-sequence variance
  double var_plus = 0.0;
  bool constant = false;
};

Moments moments(const Eigen::MatrixXd& s) {
  const Eigen::Index n = s.rows(), m = s.cols();
  Moments mo;
  mo.mean = s.colwise().mean();
  mo.var.resize(m);
  for (Eigen::Index j = 0; j < m; ++j)
    mo.var[j] = (s.col(j).array() - mo.mean[j]).square().sum() / static_cast<double>(n - 1);
  mo.w = mo.var.mean();
  const double grand = mo.mean.mean();
  const double var_means =
      m > 1 ? (mo.mean.array() - grand).square().sum() / static_cast<double>(m - 1) : 0.0;
  mo.var_plus = mo.w * static_cast<double>(n - 1) / static_cast<double>(n) + var_means;
  mo.constant = mo.var_plus <= 0.0;
  return mo;
}

// Mean over sequences of the biased (1/n) lag-t autocovariance.
double mean_autocov(const Eigen::MatrixXd& s, const Eigen::VectorXd& mean, Eigen::Index t) {
  const Eigen::Index n = s.rows(), m = s.cols();
  double total = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    double acc = 0.0;
    const double mu = mean[j];
    for (Eigen::Index i = 0; i + t < n; ++i) acc += (s(i, j) - mu) * (s(i + t, j) - mu);
    total += acc / static_cast<double>(n);
  }
  return total / static_cast<double>(m);
}

Eigen::MatrixXd rank_normalize(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const Eigen::Index n = x.rows(), m = x.cols();
  const Eigen::Index total = n * m;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double* flat = x.data();  // column-major over (draw, chain)
  std::sort(order.begin(), order.end(),
            [flat](Eigen::Index a, Eigen::Index b) { return flat[a] < flat[b]; });

  Eigen::MatrixXd z(n, m);
  double* zflat = z.data();
  const double denom = static_cast<double>(total) + 0.25;
  for (Eigen::Index i = 0; i < total;) {
    Eigen::Index j = i;
    while (j + 1 < total && flat[order[static_cast<std::size_t>(j + 1)]] ==
                                flat[order[static_cast<std::size_t>(i)]])
      ++j;
    // Ties share their average rank (1-based).
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double zval = inv_normal_cdf((rank - 0.375) / denom);
    for (Eigen::Index k = i; k <= j; ++k) zflat[order[static_cast<std::size_t>(k)]] = zval;
    i = j + 1;
  }
  return z;
}

}  // namespace

double split_rhat(const Eigen::Ref<const Eigen::MatrixXd>& x, bool* constant) {
  if (constant) *constant = false;
  const Eigen::MatrixXd s = split_chains(x);
  const Moments mo = moments(s);
  if (mo.w <= 0.0) {
    if (constant) *constant = true;
    return kNaN;
  }
  return std::sqrt(mo.var_plus / mo.w);
}

double ess_bulk(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const Eigen::MatrixXd s = split_chains(rank_normalize(x));
  const Eigen::Index n = s.rows(), m = s.cols();
  const Moments mo = moments(s);
  if (mo.constant) return kNaN;

  // Initial positive pair sequence of autocorrelations, then enforced
  // monotone non-increasing before summing.
  std::vector<double> rho;
  rho.push_back(1.0);
  rho.push_back(1.0 - (mo.w - mean_autocov(s, mo.mean, 1)) / mo.var_plus);
  double even = 1.0, odd = rho[1];
  Eigen::Index t = 1;
  while (t < n - 4 && even + odd > 0.0) {
    even = 1.0 - (mo.w - mean_autocov(s, mo.mean, t + 1)) / mo.var_plus;
    odd = 1.0 - (mo.w - mean_autocov(s, mo.mean, t + 2)) / mo.var_plus;
    if (even + odd >= 0.0) {
      rho.push_back(even);
      rho.push_back(odd);
    }
    t += 2;
  }
  const std::size_t max_t = rho.size() - 1;
  if (max_t >= 3) {
    for (std::size_t k = 1; k + 2 <= max_t; k += 2) {
      if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
        rho[k + 1] = 0.5 * (rho[k - 1] + rho[k]);
        rho[k + 2] = rho[k + 1];
      }
    }
  }
  double tau = -1.0;
  for (double r : rho) tau += 2.0 * r;
  if (even > 0.0) tau += even;  // partial final pair
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n * m) + 10.0));
  return static_cast<double>(n * m) / tau;
}

bool DiagnosticsReport::pass() const {
  if (constant_columns > 0) return false;
  return max_rhat < rhat_limit && min_ess > min_ess_per_chain * chains;
}

DiagnosticsReport diagnose(const DrawSet& draws, double rhat_limit, double min_ess_per_chain) {
  if (draws.chains < 2 || draws.samples_per_chain < 4)
    throw_diagnostics("TooFewDraws", "convergence checks need >= 2 chains and >= 4 draws each");

  DiagnosticsReport rep;
  rep.chains = draws.chains;
  rep.rhat_limit = rhat_limit;
  rep.min_ess_per_chain = min_ess_per_chain;
  rep.min_ess = std::numeric_limits<double>::infinity();
  rep.total_divergences = draws.total_divergences();

  const int n = draws.samples_per_chain;
  Eigen::MatrixXd x(n, draws.chains);
  for (std::size_t j = 0; j < draws.names.size(); ++j) {
    for (int c = 0; c < draws.chains; ++c)
      x.col(c) = draws.draws.col(static_cast<Eigen::Index>(j))
                     .segment(static_cast<Eigen::Index>(c) * n, n);
    ColumnDiagnostics cd;
    cd.name = draws.names[j];
    cd.rhat = split_rhat(x, &cd.constant);
    cd.ess_bulk = cd.constant ? kNaN : ess_bulk(x);
    if (cd.constant) {
      ++rep.constant_columns;
    } else {
      rep.max_rhat = std::max(rep.max_rhat, cd.rhat);
      rep.min_ess = std::min(rep.min_ess, cd.ess_bulk);
    }
    rep.columns.push_back(std::move(cd));
  }
  if (!std::isfinite(rep.min_ess)) rep.min_ess = 0.0;  // every column constant
  return rep;
}

std::string format_report(const DiagnosticsReport& report) {
  std::ostringstream os;
  os << "chains: " << report.chains << "\n";
  os << "divergences: " << report.total_divergences << "\n";
  os << "max_rhat: " << report.max_rhat << "\n";
  os << "min_ess_bulk: " << report.min_ess << "\n";
  os << "constant_columns: " << report.constant_columns << "\n";
  os << "status: " << (report.pass() ? "pass" : "fail") << "\n";
  os << "column,rhat,ess_bulk\n";
  for (const auto& c : report.columns) {
    os << c.name << ",";
    if (c.constant)
      os << "NaN,NaN (constant)\n";
    else
      os << c.rhat << "," << c.ess_bulk << "\n";
  }
  return os.str();
}

}  // namespace aggrex
