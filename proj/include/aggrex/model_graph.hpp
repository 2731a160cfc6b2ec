#pragma once

#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aggrex/parameter_block.hpp"

namespace aggrex {

// Sparse rows of (buffer index, weight) terms. A row's value is the weighted
// sum of buffer entries; weights default to 1.
struct LinearTerms {
  std::vector<int> offsets{0};
  std::vector<int> idx;
  std::vector<double> weights;  // empty -> every weight is 1

  void push_row(std::initializer_list<int> indices);
  void push_row(const std::vector<int>& indices);
  void push_row(const std::vector<int>& indices, const std::vector<double>& w);

  int rows() const { return static_cast<int>(offsets.size()) - 1; }
  double value(const Eigen::VectorXd& buf, int row) const;
  void accumulate(Eigen::VectorXd& grad, int row, double g) const;
};

// Deterministic quantities computed from constrained parameters. They live
// behind the constrained values in one flat evaluation buffer so factors can
// reference parameters and derived values uniformly. Components run in
// registration order forward and in reverse for the gradient.
class DerivedComponent {
 public:
  virtual ~DerivedComponent() = default;
  virtual void forward(Eigen::VectorXd& buf) const = 0;
  virtual void backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const = 0;
};

// out = loc + scale * raw, with loc optional per entry (-1). Non-centered
// hierarchical effects are reported and consumed through these entries.
class ScaledOffset : public DerivedComponent {
 public:
  std::vector<int> out, raw, scale, loc;
  void forward(Eigen::VectorXd& buf) const override;
  void backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const override;
};

// out[0] = buf[first], out[k] = out[k-1] + buf[incr[k-1]]; increments are
// positive parameters, so the outputs are strictly increasing.
class OrderedCumsum : public DerivedComponent {
 public:
  int out0 = 0;
  int first = 0;
  std::vector<int> incr;
  void forward(Eigen::VectorXd& buf) const override;
  void backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const override;
};

// Per-subject bivariate effects from standard normal coordinates:
//   u = s0 z0,  v = s1 (r z0 + sqrt(1-r^2) z1).
class PairEffects : public DerivedComponent {
 public:
  struct Entry {
    int out_u, out_v, z0, z1, s0, s1, r;
  };
  std::vector<Entry> entries;
  void forward(Eigen::VectorXd& buf) const override;
  void backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const override;
};

// out[i] = unit-weight sum of input terms (row i).
class SumEntries : public DerivedComponent {
 public:
  std::vector<int> out;
  LinearTerms inputs;
  void forward(Eigen::VectorXd& buf) const override;
  void backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const override;
};

// out[i] = exp(buf[in[i]]).
class ExpEntries : public DerivedComponent {
 public:
  std::vector<int> out, in;
  void forward(Eigen::VectorXd& buf) const override;
  void backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const override;
};

// out[i] = logistic(buf[in[i]]).
class LogisticEntries : public DerivedComponent {
 public:
  std::vector<int> out, in;
  void forward(Eigen::VectorXd& buf) const override;
  void backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const override;
};

// --- factor blocks -----------------------------------------------------------
// Each block holds many rows of one likelihood/prior form and accumulates the
// log density and its gradient with respect to the evaluation buffer.

struct BernoulliLogitFactors {
  LinearTerms lp;
  std::vector<std::uint8_t> y;
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

// Constant response v ~ Normal(mean, sd); c0 carries per-row constants such
// as data-side Jacobians of fixed transforms.
struct GaussianFactors {
  LinearTerms mean;
  std::vector<double> v, c0;
  std::vector<int> sd_idx;
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

// Latent positive target: log(buf[target]) ~ Normal(mean, sd), density taken
// over the target itself.
struct LogNormalLatentFactors {
  LinearTerms mean;
  std::vector<int> target, sd_idx;
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

// Power-transformed consumption amounts: t_lambda(a / w) ~ Normal(mean, sd)
// with the transform's data Jacobian included because lambda (and possibly w)
// are estimated. `w_idx` of -1 selects the constant weight.
struct BoxCoxObsFactors {
  int lambda_idx = -1;
  int sd_idx = -1;
  LinearTerms mean;
  std::vector<double> amount;
  std::vector<double> w_const;
  std::vector<int> w_idx;
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

// Same transform over a weighted sum of latent unit masses (no observed
// amount, hence no data Jacobian).
struct BoxCoxLatentSumFactors {
  int lambda_idx = -1;
  int sd_idx = -1;
  LinearTerms mean;
  LinearTerms amount;
  std::vector<double> w_const;
  std::vector<int> w_idx;
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

// K-component normal mixture on v = v_const - log w (w optional), components
// marginalized in closed form. Component means are comp_mean_idx[z] plus the
// row's shared terms.
struct MixtureGaussianFactors {
  int K = 0;
  std::vector<int> comp_mean_idx, comp_sd_idx;
  int theta_idx = -1;  // first of K consecutive simplex entries
  LinearTerms shared_mean;
  std::vector<double> v_const, c0;
  std::vector<int> w_idx;  // -1 -> w folded into v_const
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

// y ~ Gamma(shape, rate) parameterized by the log median: rate is the
// shape-dependent unit-rate median divided by exp(log_median). The shared
// shape is exp(buf[log_shape_idx]). y may be a constant or a latent entry.
struct GammaMedianFactors {
  int log_shape_idx = -1;
  LinearTerms log_median;
  std::vector<double> y_const;
  std::vector<int> y_idx;
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

// Observed value around a latent truth with a known standard error.
struct MeasurementFactors {
  std::vector<double> y, se;
  std::vector<int> latent_idx;
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

// x ~ Normal(mean, sd) with mean and sd each constant or a buffer entry.
struct NormalPriorFactors {
  std::vector<int> x_idx;
  std::vector<double> mean_const;
  std::vector<int> mean_idx;
  std::vector<double> sd_const;
  std::vector<int> sd_idx;
  void add(int x, double mc, int mi, double sc, int si);
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

struct HalfNormalPriorFactors {
  std::vector<int> x_idx;
  std::vector<double> scale;
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

// log(x) ~ Normal(mu, s) stated over x itself (the log-scale prior form used
// for mixture component scales).
struct LogScaleNormalPriorFactors {
  std::vector<int> x_idx;
  std::vector<double> mu, s;
  void eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad, double& out) const;
};

// One published column of the draw matrix.
struct ReportColumn {
  std::string name;
  int buf_index = 0;
};

struct ModelGraph {
  std::string name;
  BlockLayout layout;
  int derived_dim = 0;
  std::vector<std::unique_ptr<DerivedComponent>> derived;

  BernoulliLogitFactors bernoulli;
  GaussianFactors gaussian;
  LogNormalLatentFactors lognormal_latent;
  BoxCoxObsFactors boxcox_obs;
  BoxCoxLatentSumFactors boxcox_latent;
  MixtureGaussianFactors mixture;
  GammaMedianFactors gamma_median;
  MeasurementFactors measurement;
  NormalPriorFactors normal_prior;
  HalfNormalPriorFactors halfnormal_prior;
  LogScaleNormalPriorFactors log_scale_prior;
  double lp_constant = 0.0;

  std::vector<ReportColumn> report;

  struct Workspace {
    Eigen::VectorXd buf, gbuf;
  };

  int dim() const { return layout.u_dim(); }
  int buffer_dim() const { return layout.c_dim() + derived_dim; }

  // Log posterior density (likelihoods + priors + transform Jacobians) and,
  // when grad_u is non-null, its exact gradient.
  double log_posterior(const Eigen::Ref<const Eigen::VectorXd>& u, Eigen::VectorXd* grad_u,
                       Workspace& ws) const;
  double log_posterior(const Eigen::Ref<const Eigen::VectorXd>& u,
                       Eigen::VectorXd* grad_u = nullptr) const;

  // Constrained values plus derived quantities for one parameter vector.
  void fill_buffer(const Eigen::Ref<const Eigen::VectorXd>& u, Eigen::VectorXd& buf) const;

  // Published row (report columns) from a filled buffer.
  void report_row(const Eigen::VectorXd& buf, Eigen::Ref<Eigen::RowVectorXd> out) const;
};

}  // namespace aggrex
