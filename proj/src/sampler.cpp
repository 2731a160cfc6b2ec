#include "aggrex/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

#include "aggrex/errors.hpp"
#include "aggrex/rng.hpp"
#include "aggrex/special_functions.hpp"

namespace aggrex {
namespace {

constexpr double kDivergenceGap = 1000.0;

double logsumexp2(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

// Running mean/variance of unconstrained draws inside one metric window.
struct Welford {
  Eigen::VectorXd mean, m2;
  long long n = 0;

  void reset(int dim) {
    mean = Eigen::VectorXd::Zero(dim);
    m2 = Eigen::VectorXd::Zero(dim);
    n = 0;
  }
  void add(const Eigen::VectorXd& x) {
    ++n;
    Eigen::VectorXd d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d.cwiseProduct(x - mean);
  }
  // Shrunk toward unit scale the way adaptive HMC implementations regularize
  // small-sample variance estimates.
  Eigen::VectorXd regularized_variance() const {
    const double nn = static_cast<double>(n);
    Eigen::VectorXd var = m2 / std::max(1.0, nn - 1.0);
    return (nn / (nn + 5.0)) * var.array() + 1e-3 * (5.0 / (nn + 5.0));
  }
};

struct DualAveraging {
  double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  double mu = 0.0, log_eps = 0.0, log_eps_bar = 0.0, h_bar = 0.0;
  long long t = 0;

  void init(double eps0) {
    mu = std::log(10.0 * eps0);
    log_eps = std::log(eps0);
    log_eps_bar = log_eps;
    h_bar = 0.0;
    t = 0;
  }
  void update(double accept, double target) {
    ++t;
    const double tt = static_cast<double>(t);
    h_bar += (target - accept - h_bar) / (tt + t0);
    log_eps = mu - std::sqrt(tt) / gamma * h_bar;
    const double eta = std::pow(tt, -kappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
  }
  double eps() const { return std::exp(log_eps); }
  double eps_final() const { return std::exp(log_eps_bar); }
};

// Step-size adaptation phases: metric re-estimation runs only in doubling
// windows between a settle-in buffer and a terminal buffer.
struct WarmupSchedule {
  int init_buffer = 0, term_buffer = 0, base_window = 0, warmup = 0;

  explicit WarmupSchedule(int warmup_iters) : warmup(warmup_iters) {
    init_buffer = static_cast<int>(0.15 * warmup);
    term_buffer = static_cast<int>(0.10 * warmup);
    const int middle = warmup - init_buffer - term_buffer;
    base_window = std::min(middle, 25);
  }
  bool in_metric_phase(int it) const {
    return base_window > 0 && it >= init_buffer && it < warmup - term_buffer;
  }
  // End (exclusive) of the metric window starting at `start`.
  int window_end(int start, int size) const {
    const int hard_end = warmup - term_buffer;
    int end = std::min(start + size, hard_end);
    if (end + 2 * size > hard_end) end = hard_end;  // absorb the tail
    return end;
  }
};

struct Point {
  Eigen::VectorXd theta, p, grad;
};

struct Tree {
  Point minus, plus;        // backward / forward trajectory ends
  Eigen::VectorXd theta_prop, grad_prop;
  double lp_prop = 0.0;
  double log_w = -std::numeric_limits<double>::infinity();
  double sum_metro = 0.0;
  long long n_states = 0;
  bool stop = false;
  bool diverged = false;
};

class ChainRunner {
 public:
  ChainRunner(const ModelGraph& graph, const SamplerConfig& cfg, int chain)
      : graph_(graph),
        cfg_(cfg),
        rng_(RngStream(cfg.seed).derive(fnv1a(graph.name)).derive(static_cast<std::uint64_t>(chain))),
        dim_(graph.dim()),
        inv_metric_(Eigen::VectorXd::Ones(graph.dim())) {}

  // Draws report-column rows into `out` (samples x columns) and fills stats.
  void run(Eigen::Ref<Eigen::MatrixXd> out, ChainStats& stats) {
    initialize();
    double eps = find_initial_step();
    DualAveraging da;
    da.init(eps);

    const WarmupSchedule sched(cfg_.warmup);
    Welford wf;
    wf.reset(dim_);
    int window_start = sched.init_buffer;
    int window_size = sched.base_window;
    int window_end = sched.base_window > 0 ? sched.window_end(window_start, window_size) : -1;

    for (int it = 0; it < cfg_.warmup; ++it) {
      const auto res = transition(da.eps());
      da.update(res.accept, cfg_.target_accept);
      if (sched.in_metric_phase(it)) {
        wf.add(theta_);
        if (it + 1 == window_end) {
          inv_metric_ = wf.regularized_variance();
          wf.reset(dim_);
          const double fresh = find_initial_step();
          da.init(fresh);
          window_start = window_end;
          window_size *= 2;
          window_end = sched.window_end(window_start, window_size);
        }
      }
    }
    eps = cfg_.warmup > 0 ? da.eps_final() : eps;
    if (!std::isfinite(eps) || eps <= 0.0)
      throw_sampler("StepSizeFailed", graph_.name + ": step-size adaptation collapsed");
    stats.step_size = eps;

    Eigen::VectorXd buf(graph_.buffer_dim());
    Eigen::RowVectorXd row(static_cast<int>(graph_.report.size()));
    double accept_total = 0.0;
    for (int s = 0; s < cfg_.samples; ++s) {
      const auto res = transition(eps);
      accept_total += res.accept;
      if (res.diverged) ++stats.divergences;
      if (res.max_depth) ++stats.max_depth_hits;
      graph_.fill_buffer(theta_, buf);
      graph_.report_row(buf, row);
      out.row(s) = row;
    }
    stats.mean_accept = cfg_.samples > 0 ? accept_total / cfg_.samples : 0.0;
  }

 private:
  struct TransitionResult {
    double accept = 0.0;
    bool diverged = false;
    bool max_depth = false;
  };

  void initialize() {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Eigen::VectorXd u(dim_);
      for (int i = 0; i < dim_; ++i)
        u[i] = cfg_.init_radius * (2.0 * rng_.next_u01() - 1.0);
      Eigen::VectorXd grad(dim_);
      const double lp = graph_.log_posterior(u, &grad, ws_);
      if (std::isfinite(lp) && grad.allFinite()) {
        theta_ = std::move(u);
        lp_ = lp;
        grad_ = std::move(grad);
        return;
      }
    }
    throw_sampler("InitializationFailed",
                  graph_.name + ": no finite starting point in 100 attempts");
  }

  double normal_draw() { return inv_normal_cdf(rng_.next_u01()); }

  Eigen::VectorXd sample_momentum() {
    Eigen::VectorXd p(dim_);
    for (int i = 0; i < dim_; ++i) p[i] = normal_draw() / std::sqrt(inv_metric_[i]);
    return p;
  }

  double kinetic(const Eigen::VectorXd& p) const {
    return 0.5 * inv_metric_.dot(p.cwiseAbs2());
  }

  // One leapfrog step; returns the Hamiltonian (+inf on numerical failure).
  double leapfrog(Point& z, double& lp, double dir_eps) {
    z.p += 0.5 * dir_eps * z.grad;
    z.theta += dir_eps * inv_metric_.cwiseProduct(z.p);
    lp = graph_.log_posterior(z.theta, &z.grad, ws_);
    if (!std::isfinite(lp) || !z.grad.allFinite()) return std::numeric_limits<double>::infinity();
    z.p += 0.5 * dir_eps * z.grad;
    return -lp + kinetic(z.p);
  }

  bool turned(const Point& minus, const Point& plus) const {
    const Eigen::VectorXd dtheta = plus.theta - minus.theta;
    return dtheta.dot(inv_metric_.cwiseProduct(minus.p)) < 0.0 ||
           dtheta.dot(inv_metric_.cwiseProduct(plus.p)) < 0.0;
  }

  Tree build_tree(int depth, const Point& from, double h0, double dir_eps, int dir) {
    if (depth == 0) {
      Tree t;
      Point z = from;
      double lp = 0.0;
      const double h = leapfrog(z, lp, dir_eps);
      const double dh = h0 - h;  // log multinomial weight
      t.n_states = 1;
      t.sum_metro = dh > 0.0 ? 1.0 : std::exp(dh);
      if (!std::isfinite(h) || h - h0 > kDivergenceGap) {
        t.stop = true;
        t.diverged = true;
        t.sum_metro = std::isfinite(dh) ? t.sum_metro : 0.0;
        return t;
      }
      t.minus = z;
      t.plus = z;
      t.theta_prop = z.theta;
      t.grad_prop = z.grad;
      t.lp_prop = lp;
      t.log_w = dh;
      return t;
    }

    Tree first = build_tree(depth - 1, from, h0, dir_eps, dir);
    if (first.stop) return first;
    const Point& edge = dir > 0 ? first.plus : first.minus;
    Tree second = build_tree(depth - 1, edge, h0, dir_eps, dir);

    Tree t;
    t.n_states = first.n_states + second.n_states;
    t.sum_metro = first.sum_metro + second.sum_metro;
    t.diverged = first.diverged || second.diverged;
    if (second.stop) {
      t.stop = true;
      return t;
    }
    t.log_w = logsumexp2(first.log_w, second.log_w);
    // Uniform multinomial choice between the halves.
    const bool take_second = std::log(rng_.next_u01()) < second.log_w - t.log_w;
    const Tree& pick = take_second ? second : first;
    t.theta_prop = pick.theta_prop;
    t.grad_prop = pick.grad_prop;
    t.lp_prop = pick.lp_prop;
    t.minus = dir > 0 ? first.minus : second.minus;
    t.plus = dir > 0 ? second.plus : first.plus;
    t.stop = turned(t.minus, t.plus);
    return t;
  }

  TransitionResult transition(double eps) {
    TransitionResult res;
    Point init{theta_, sample_momentum(), grad_};
    const double h0 = -lp_ + kinetic(init.p);

    Point minus = init, plus = init;
    Eigen::VectorXd theta_cur = theta_, grad_cur = grad_;
    double lp_cur = lp_;
    double log_w_total = 0.0;  // initial state carries weight 1
    double sum_metro = 0.0;
    long long n_states = 0;

    int depth = 0;
    for (; depth < cfg_.max_tree_depth; ++depth) {
      const int dir = rng_.next_u01() < 0.5 ? -1 : 1;
      const Point& edge = dir > 0 ? plus : minus;
      Tree sub = build_tree(depth, edge, h0, dir * eps, dir);
      sum_metro += sub.sum_metro;
      n_states += sub.n_states;
      if (sub.stop) {
        res.diverged = sub.diverged;
        break;
      }
      // Biased progressive selection favors the fresh subtree.
      if (std::log(rng_.next_u01()) < sub.log_w - log_w_total) {
        theta_cur = sub.theta_prop;
        grad_cur = sub.grad_prop;
        lp_cur = sub.lp_prop;
      }
      log_w_total = logsumexp2(log_w_total, sub.log_w);
      if (dir > 0)
        plus = sub.plus;
      else
        minus = sub.minus;
      if (turned(minus, plus)) {
        ++depth;
        break;
      }
    }
    res.max_depth = depth >= cfg_.max_tree_depth;
    res.accept = n_states > 0 ? sum_metro / static_cast<double>(n_states) : 0.0;

    theta_ = std::move(theta_cur);
    grad_ = std::move(grad_cur);
    lp_ = lp_cur;
    return res;
  }

  // Double/halve until one leapfrog step crosses 50% acceptance.
  double find_initial_step() {
    double eps = 1.0;
    Point z{theta_, sample_momentum(), grad_};
    const double h0 = -lp_ + kinetic(z.p);
    auto probe = [&](double e) {
      Point trial = z;
      double lp = 0.0;
      const double h = leapfrog(trial, lp, e);
      return std::isfinite(h) ? h0 - h : -std::numeric_limits<double>::infinity();
    };
    double dh = probe(eps);
    const int dir = dh > std::log(0.5) ? 1 : -1;
    for (int i = 0; i < 100; ++i) {
      if (dir > 0 && dh <= std::log(0.5)) break;
      if (dir < 0 && dh >= std::log(0.5)) break;
      eps = dir > 0 ? eps * 2.0 : eps * 0.5;
      if (eps > 1e7 || eps < 1e-10) break;
      dh = probe(eps);
    }
    return std::clamp(eps, 1e-10, 1e7);
  }

  const ModelGraph& graph_;
  const SamplerConfig& cfg_;
  RngStream rng_;
  int dim_;
  Eigen::VectorXd inv_metric_;
  Eigen::VectorXd theta_, grad_;
  double lp_ = 0.0;
  ModelGraph::Workspace ws_;
};

}  // namespace

int DrawSet::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return static_cast<int>(j);
  return -1;
}

DrawSet run_nuts(const ModelGraph& graph, const SamplerConfig& cfg) {
  if (cfg.chains < 1 || cfg.samples < 1 || cfg.warmup < 0)
    throw_config("InvalidConfig", "sampler needs chains >= 1, samples >= 1, warmup >= 0");
  if (graph.dim() < 1) throw_config("InvalidConfig", graph.name + ": model has no parameters");

  DrawSet out;
  out.graph_name = graph.name;
  for (const auto& col : graph.report) out.names.push_back(col.name);
  out.chains = cfg.chains;
  out.samples_per_chain = cfg.samples;
  out.draws.resize(static_cast<Eigen::Index>(cfg.chains) * cfg.samples,
                   static_cast<Eigen::Index>(graph.report.size()));
  out.chain_stats.assign(static_cast<std::size_t>(cfg.chains), ChainStats{});

  int threads = cfg.threads > 0 ? cfg.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, cfg.chains));

  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.chains));
  auto worker = [&]() {
    for (;;) {
      const int c = next.fetch_add(1);
      if (c >= cfg.chains) return;
      try {
        ChainRunner runner(graph, cfg, c);
        runner.run(out.draws.middleRows(static_cast<Eigen::Index>(c) * cfg.samples, cfg.samples),
                   out.chain_stats[static_cast<std::size_t>(c)]);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace aggrex
