#include "aggrex/model_graph.hpp"

#include <cmath>
#include <limits>

#include "aggrex/special_functions.hpp"

namespace aggrex {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLambdaZero = 1e-8;

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Value and lambda-derivative of t_lambda applied to exp(L), plus
// rl = exp(lambda * L) = (transformed ratio)^lambda, which the ratio and
// amount derivatives reuse: d t / d r = rl / r.
struct BoxCoxEval {
  double v, dv_dlambda, rl;
};

BoxCoxEval boxcox_eval(double lambda, double L) {
  BoxCoxEval e{};
  e.rl = std::exp(lambda * L);
  if (std::abs(lambda) <= kLambdaZero) {
    e.v = L;
    e.dv_dlambda = 0.5 * L * L;
    return e;
  }
  const double x = lambda * L;
  e.v = std::expm1(x) / lambda;
  if (std::abs(x) < 1e-3) {
    // (exp(x)(x-1)+1)/lambda^2 loses precision near 0; expand in lambda.
    const double L2 = L * L;
    e.dv_dlambda = L2 / 2.0 + lambda * L2 * L / 3.0 + lambda * lambda * L2 * L2 / 8.0 +
                   lambda * lambda * lambda * L2 * L2 * L / 30.0;
  } else {
    e.dv_dlambda = (e.rl * (x - 1.0) + 1.0) / (lambda * lambda);
  }
  return e;
}

}  // namespace

void LinearTerms::push_row(std::initializer_list<int> indices) {
  idx.insert(idx.end(), indices.begin(), indices.end());
  offsets.push_back(static_cast<int>(idx.size()));
  if (!weights.empty()) weights.resize(idx.size(), 1.0);
}

void LinearTerms::push_row(const std::vector<int>& indices) {
  idx.insert(idx.end(), indices.begin(), indices.end());
  offsets.push_back(static_cast<int>(idx.size()));
  if (!weights.empty()) weights.resize(idx.size(), 1.0);
}

void LinearTerms::push_row(const std::vector<int>& indices, const std::vector<double>& w) {
  if (weights.empty()) weights.resize(idx.size(), 1.0);
  idx.insert(idx.end(), indices.begin(), indices.end());
  weights.insert(weights.end(), w.begin(), w.end());
  offsets.push_back(static_cast<int>(idx.size()));
}

double LinearTerms::value(const Eigen::VectorXd& buf, int row) const {
  double s = 0.0;
  if (weights.empty()) {
    for (int k = offsets[row]; k < offsets[row + 1]; ++k) s += buf[idx[k]];
  } else {
    for (int k = offsets[row]; k < offsets[row + 1]; ++k) s += weights[k] * buf[idx[k]];
  }
  return s;
}

void LinearTerms::accumulate(Eigen::VectorXd& grad, int row, double g) const {
  if (weights.empty()) {
    for (int k = offsets[row]; k < offsets[row + 1]; ++k) grad[idx[k]] += g;
  } else {
    for (int k = offsets[row]; k < offsets[row + 1]; ++k) grad[idx[k]] += g * weights[k];
  }
}

void ScaledOffset::forward(Eigen::VectorXd& buf) const {
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = buf[scale[i]] * buf[raw[i]];
    if (loc[i] >= 0) v += buf[loc[i]];
    buf[out[i]] = v;
  }
}

void ScaledOffset::backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = grad[out[i]];
    if (g == 0.0) continue;
    grad[raw[i]] += g * buf[scale[i]];
    grad[scale[i]] += g * buf[raw[i]];
    if (loc[i] >= 0) grad[loc[i]] += g;
  }
}

void OrderedCumsum::forward(Eigen::VectorXd& buf) const {
  buf[out0] = buf[first];
  for (std::size_t k = 0; k < incr.size(); ++k)
    buf[out0 + static_cast<int>(k) + 1] = buf[out0 + static_cast<int>(k)] + buf[incr[k]];
}

void OrderedCumsum::backward(const Eigen::VectorXd&, Eigen::VectorXd& grad) const {
  // Each output feeds the next, so sweep the chain from the top.
  double carry = 0.0;
  for (int k = static_cast<int>(incr.size()); k >= 1; --k) {
    carry += grad[out0 + k];
    grad[incr[static_cast<std::size_t>(k - 1)]] += carry;
  }
  grad[first] += carry + grad[out0];
}

void PairEffects::forward(Eigen::VectorXd& buf) const {
  for (const Entry& e : entries) {
    const double r = buf[e.r];
    const double q = std::sqrt(1.0 - r * r);
    buf[e.out_u] = buf[e.s0] * buf[e.z0];
    buf[e.out_v] = buf[e.s1] * (r * buf[e.z0] + q * buf[e.z1]);
  }
}

void PairEffects::backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const {
  for (const Entry& e : entries) {
    const double gu = grad[e.out_u];
    const double gv = grad[e.out_v];
    const double r = buf[e.r];
    const double q = std::sqrt(1.0 - r * r);
    const double s0 = buf[e.s0], s1 = buf[e.s1];
    const double z0 = buf[e.z0], z1 = buf[e.z1];
    if (gu != 0.0) {
      grad[e.s0] += gu * z0;
      grad[e.z0] += gu * s0;
    }
    if (gv != 0.0) {
      grad[e.s1] += gv * (r * z0 + q * z1);
      grad[e.z0] += gv * s1 * r;
      grad[e.z1] += gv * s1 * q;
      grad[e.r] += gv * s1 * (z0 - z1 * r / q);
    }
  }
}

void SumEntries::forward(Eigen::VectorXd& buf) const {
  for (std::size_t i = 0; i < out.size(); ++i)
    buf[out[i]] = inputs.value(buf, static_cast<int>(i));
}

void SumEntries::backward(const Eigen::VectorXd&, Eigen::VectorXd& grad) const {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = grad[out[i]];
    if (g != 0.0) inputs.accumulate(grad, static_cast<int>(i), g);
  }
}

void ExpEntries::forward(Eigen::VectorXd& buf) const {
  for (std::size_t i = 0; i < out.size(); ++i) buf[out[i]] = std::exp(buf[in[i]]);
}

void ExpEntries::backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const {
  for (std::size_t i = 0; i < out.size(); ++i) grad[in[i]] += grad[out[i]] * buf[out[i]];
}

void LogisticEntries::forward(Eigen::VectorXd& buf) const {
  for (std::size_t i = 0; i < out.size(); ++i) buf[out[i]] = logistic(buf[in[i]]);
}

void LogisticEntries::backward(const Eigen::VectorXd& buf, Eigen::VectorXd& grad) const {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double p = buf[out[i]];
    grad[in[i]] += grad[out[i]] * p * (1.0 - p);
  }
}

void BernoulliLogitFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                                 double& out) const {
  for (int r = 0; r < lp.rows(); ++r) {
    const double x = lp.value(buf, r);
    out -= y[static_cast<std::size_t>(r)] ? log1p_exp(-x) : log1p_exp(x);
    lp.accumulate(grad, r, static_cast<double>(y[static_cast<std::size_t>(r)]) - logistic(x));
  }
}

void GaussianFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                           double& out) const {
  for (int r = 0; r < mean.rows(); ++r) {
    const std::size_t i = static_cast<std::size_t>(r);
    const double sd = buf[sd_idx[i]];
    const double z = (v[i] - mean.value(buf, r)) / sd;
    out += -std::log(sd) - 0.5 * kLog2Pi - 0.5 * z * z + c0[i];
    mean.accumulate(grad, r, z / sd);
    grad[sd_idx[i]] += (z * z - 1.0) / sd;
  }
}

void LogNormalLatentFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                                  double& out) const {
  for (int r = 0; r < mean.rows(); ++r) {
    const std::size_t i = static_cast<std::size_t>(r);
    const double w = buf[target[i]];
    const double sd = buf[sd_idx[i]];
    const double lw = std::log(w);
    const double z = (lw - mean.value(buf, r)) / sd;
    out += -std::log(sd) - 0.5 * kLog2Pi - 0.5 * z * z - lw;
    mean.accumulate(grad, r, z / sd);
    grad[sd_idx[i]] += (z * z - 1.0) / sd;
    grad[target[i]] += (-z / sd - 1.0) / w;
  }
}

void BoxCoxObsFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                            double& out) const {
  if (mean.rows() == 0) return;
  const double lambda = buf[lambda_idx];
  for (int r = 0; r < mean.rows(); ++r) {
    const std::size_t i = static_cast<std::size_t>(r);
    const double w = w_idx[i] >= 0 ? buf[w_idx[i]] : w_const[i];
    const double L = std::log(amount[i] / w);
    const BoxCoxEval bc = boxcox_eval(lambda, L);
    const double sd = buf[sd_idx];
    const double z = (bc.v - mean.value(buf, r)) / sd;
    out += -std::log(sd) - 0.5 * kLog2Pi - 0.5 * z * z + (lambda - 1.0) * L - std::log(w);
    const double gv = -z / sd;  // d lp / d transformed value
    mean.accumulate(grad, r, z / sd);
    grad[sd_idx] += (z * z - 1.0) / sd;
    grad[lambda_idx] += gv * bc.dv_dlambda + L;
    if (w_idx[i] >= 0) grad[w_idx[i]] += (z / sd) * bc.rl / w - lambda / w;
  }
}

void BoxCoxLatentSumFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                                  double& out) const {
  if (mean.rows() == 0) return;
  const double lambda = buf[lambda_idx];
  for (int r = 0; r < mean.rows(); ++r) {
    const std::size_t i = static_cast<std::size_t>(r);
    const double w = w_idx[i] >= 0 ? buf[w_idx[i]] : w_const[i];
    const double a = amount.value(buf, r);
    const double L = std::log(a / w);
    const BoxCoxEval bc = boxcox_eval(lambda, L);
    const double sd = buf[sd_idx];
    const double z = (bc.v - mean.value(buf, r)) / sd;
    out += -std::log(sd) - 0.5 * kLog2Pi - 0.5 * z * z;
    const double gv = -z / sd;
    mean.accumulate(grad, r, z / sd);
    grad[sd_idx] += (z * z - 1.0) / sd;
    grad[lambda_idx] += gv * bc.dv_dlambda;
    amount.accumulate(grad, r, gv * bc.rl / a);
    if (w_idx[i] >= 0) grad[w_idx[i]] += (z / sd) * bc.rl / w;
  }
}

void MixtureGaussianFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                                  double& out) const {
  if (shared_mean.rows() == 0) return;
  double s[8], rz[8];  // K is small (3 in practice)
  for (int r = 0; r < shared_mean.rows(); ++r) {
    const std::size_t i = static_cast<std::size_t>(r);
    const double shared = shared_mean.value(buf, r);
    double v = v_const[i];
    if (w_idx[i] >= 0) v -= std::log(buf[w_idx[i]]);
    double smax = -std::numeric_limits<double>::infinity();
    for (int z = 0; z < K; ++z) {
      const double mu = buf[comp_mean_idx[static_cast<std::size_t>(z)]] + shared;
      const double sd = buf[comp_sd_idx[static_cast<std::size_t>(z)]];
      const double t = (v - mu) / sd;
      s[z] = std::log(buf[theta_idx + z]) - std::log(sd) - 0.5 * kLog2Pi - 0.5 * t * t;
      if (s[z] > smax) smax = s[z];
    }
    double acc = 0.0;
    for (int z = 0; z < K; ++z) acc += std::exp(s[z] - smax);
    const double lse = smax + std::log(acc);
    out += lse + c0[i];
    double gshared = 0.0;
    for (int z = 0; z < K; ++z) {
      rz[z] = std::exp(s[z] - lse);
      const double mu = buf[comp_mean_idx[static_cast<std::size_t>(z)]] + shared;
      const double sd = buf[comp_sd_idx[static_cast<std::size_t>(z)]];
      const double t = (v - mu) / sd;
      const double gmu = rz[z] * t / sd;
      grad[comp_mean_idx[static_cast<std::size_t>(z)]] += gmu;
      grad[comp_sd_idx[static_cast<std::size_t>(z)]] += rz[z] * (t * t - 1.0) / sd;
      grad[theta_idx + z] += rz[z] / buf[theta_idx + z];
      gshared += gmu;
    }
    shared_mean.accumulate(grad, r, gshared);
    if (w_idx[i] >= 0) grad[w_idx[i]] += gshared / buf[w_idx[i]];
  }
}

void GammaMedianFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                              double& out) const {
  if (log_median.rows() == 0) return;
  const double ls = buf[log_shape_idx];
  if (!(ls < 40.0)) {
    // exp(ls) would overflow the incomplete-gamma routines; reject the point.
    out = -std::numeric_limits<double>::infinity();
    return;
  }
  const double shape = std::exp(ls);
  const double q = gamma_median(shape);           // unit-rate median
  const double dq = gamma_median_dshape(shape);
  const double psi = digamma(shape);
  const double lgam = std::lgamma(shape);
  const double lq = std::log(q);
  double dshape_total = 0.0;
  for (int r = 0; r < log_median.rows(); ++r) {
    const std::size_t i = static_cast<std::size_t>(r);
    const double lm = log_median.value(buf, r);
    const double med = std::exp(lm);
    const double rate = q / med;
    const double y = y_idx[i] >= 0 ? buf[y_idx[i]] : y_const[i];
    const double ly = std::log(y);
    out += shape * (lq - lm) - lgam + (shape - 1.0) * ly - rate * y;
    log_median.accumulate(grad, r, -shape + y * rate);
    dshape_total += lq - lm - psi + ly + (shape / q - y / med) * dq;
    if (y_idx[i] >= 0) grad[y_idx[i]] += (shape - 1.0) / y - rate;
  }
  grad[log_shape_idx] += dshape_total * shape;
}

void MeasurementFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                              double& out) const {
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double z = (y[i] - buf[latent_idx[i]]) / se[i];
    out += -std::log(se[i]) - 0.5 * kLog2Pi - 0.5 * z * z;
    grad[latent_idx[i]] += z / se[i];
  }
}

void NormalPriorFactors::add(int x, double mc, int mi, double sc, int si) {
  x_idx.push_back(x);
  mean_const.push_back(mc);
  mean_idx.push_back(mi);
  sd_const.push_back(sc);
  sd_idx.push_back(si);
}

void NormalPriorFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                              double& out) const {
  for (std::size_t i = 0; i < x_idx.size(); ++i) {
    const double mu = mean_idx[i] >= 0 ? buf[mean_idx[i]] : mean_const[i];
    const double sd = sd_idx[i] >= 0 ? buf[sd_idx[i]] : sd_const[i];
    const double z = (buf[x_idx[i]] - mu) / sd;
    out += -std::log(sd) - 0.5 * kLog2Pi - 0.5 * z * z;
    grad[x_idx[i]] -= z / sd;
    if (mean_idx[i] >= 0) grad[mean_idx[i]] += z / sd;
    if (sd_idx[i] >= 0) grad[sd_idx[i]] += (z * z - 1.0) / sd;
  }
}

void HalfNormalPriorFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                                  double& out) const {
  constexpr double kLog2 = 0.6931471805599453094;
  for (std::size_t i = 0; i < x_idx.size(); ++i) {
    const double x = buf[x_idx[i]];
    const double s2 = scale[i] * scale[i];
    out += kLog2 - std::log(scale[i]) - 0.5 * kLog2Pi - 0.5 * x * x / s2;
    grad[x_idx[i]] -= x / s2;
  }
}

void LogScaleNormalPriorFactors::eval(const Eigen::VectorXd& buf, Eigen::VectorXd& grad,
                                      double& out) const {
  for (std::size_t i = 0; i < x_idx.size(); ++i) {
    const double x = buf[x_idx[i]];
    const double lx = std::log(x);
    const double z = (lx - mu[i]) / s[i];
    out += -std::log(s[i]) - 0.5 * kLog2Pi - 0.5 * z * z - lx;
    grad[x_idx[i]] += (-z / s[i] - 1.0) / x;
  }
}

double ModelGraph::log_posterior(const Eigen::Ref<const Eigen::VectorXd>& u,
                                 Eigen::VectorXd* grad_u, Workspace& ws) const {
  const int cd = layout.c_dim();
  const int bd = buffer_dim();
  ws.buf.resize(bd);
  ws.gbuf.resize(bd);
  ws.gbuf.setZero();

  double lp = lp_constant + layout.constrain(u, ws.buf.head(cd));
  for (const auto& d : derived) d->forward(ws.buf);

  bernoulli.eval(ws.buf, ws.gbuf, lp);
  gaussian.eval(ws.buf, ws.gbuf, lp);
  lognormal_latent.eval(ws.buf, ws.gbuf, lp);
  boxcox_obs.eval(ws.buf, ws.gbuf, lp);
  boxcox_latent.eval(ws.buf, ws.gbuf, lp);
  mixture.eval(ws.buf, ws.gbuf, lp);
  gamma_median.eval(ws.buf, ws.gbuf, lp);
  measurement.eval(ws.buf, ws.gbuf, lp);
  normal_prior.eval(ws.buf, ws.gbuf, lp);
  halfnormal_prior.eval(ws.buf, ws.gbuf, lp);
  log_scale_prior.eval(ws.buf, ws.gbuf, lp);

  if (grad_u) {
    for (auto it = derived.rbegin(); it != derived.rend(); ++it)
      (*it)->backward(ws.buf, ws.gbuf);
    grad_u->resize(layout.u_dim());
    layout.chain_grad(u, ws.buf.head(cd), ws.gbuf.head(cd), *grad_u);
  }
  return lp;
}

double ModelGraph::log_posterior(const Eigen::Ref<const Eigen::VectorXd>& u,
                                 Eigen::VectorXd* grad_u) const {
  Workspace ws;
  return log_posterior(u, grad_u, ws);
}

void ModelGraph::fill_buffer(const Eigen::Ref<const Eigen::VectorXd>& u,
                             Eigen::VectorXd& buf) const {
  buf.resize(buffer_dim());
  layout.constrain(u, buf.head(layout.c_dim()));
  for (const auto& d : derived) d->forward(buf);
}

void ModelGraph::report_row(const Eigen::VectorXd& buf, Eigen::Ref<Eigen::RowVectorXd> out) const {
  for (std::size_t k = 0; k < report.size(); ++k)
    out[static_cast<int>(k)] = buf[report[k].buf_index];
}

}  // namespace aggrex
