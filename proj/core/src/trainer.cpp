#include "nssm_unc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <random>
#include <stdexcept>

namespace nssm {

void TrainConfig::validate() const {
  if (!(subseq_len > washout && washout >= 0))
    throw std::invalid_argument("TrainConfig: need subseq_len > washout >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (tau < 0.0) throw std::invalid_argument("TrainConfig: tau must be >= 0");
  if (beta <= 0.0) throw std::invalid_argument("TrainConfig: beta must be > 0");
  if (epochs_adam < 0 || epochs_refine < 0)
    throw std::invalid_argument("TrainConfig: epoch counts must be >= 0");
  if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be > 0");
}

NllResult nll(const NeuralSSModel& model, const Eigen::MatrixXd& u,
              const Eigen::VectorXd& y, double tau, double beta, int washout) {
  if (u.rows() != y.size())
    throw std::invalid_argument("nll: input/output length mismatch");
  if (u.rows() <= washout)
    throw std::invalid_argument("nll: sequence not longer than washout");

  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.n_x);
  const SimOutput sim = simulate_with_sensitivities(model, u, x0);
  const Eigen::MatrixXd& grads = *sim.y_grads;

  NllResult res;
  res.grad = Eigen::VectorXd::Zero(model.param_count());
  double e_lik = 0.0;
  for (Eigen::Index k = washout; k < u.rows(); ++k) {
    const double r = sim.y_mean(k) - y(k);
    e_lik += r * r;
    res.grad.noalias() += (beta * r) * grads.row(k).transpose();
  }
  res.value = 0.5 * beta * e_lik + 0.5 * tau * model.theta.squaredNorm();
  res.grad.noalias() += tau * model.theta;
  return res;
}

NllResult nll_subsequences(const NeuralSSModel& model, const Eigen::MatrixXd& u,
                           const Eigen::VectorXd& y,
                           const std::vector<Eigen::Index>& starts, int subseq_len,
                           double tau, double beta, int washout) {
  NllResult res;
  res.value = 0.0;
  res.grad = Eigen::VectorXd::Zero(model.param_count());
  for (const Eigen::Index s : starts) {
    if (s < 0 || s + subseq_len > u.rows())
      throw std::invalid_argument("nll_subsequences: start index out of range");
    try {
      const NllResult part = nll(model, u.middleRows(s, subseq_len),
                                 y.segment(s, subseq_len), 0.0, beta, washout);
      res.value += part.value;
      res.grad += part.grad;
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.step(), std::string(e.what()) +
                                          " (sub-sequence starting at sample " +
                                          std::to_string(s) + ")");
    }
  }
  res.value += 0.5 * tau * model.theta.squaredNorm();
  res.grad.noalias() += tau * model.theta;
  return res;
}

double nll_value(const NeuralSSModel& model, const Eigen::MatrixXd& u,
                 const Eigen::VectorXd& y, double tau, double beta, int washout) {
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.n_x);
  const SimOutput sim = simulate(model, u, x0);
  double e_lik = 0.0;
  for (Eigen::Index k = washout; k < u.rows(); ++k) {
    const double r = sim.y_mean(k) - y(k);
    e_lik += r * r;
  }
  return 0.5 * beta * e_lik + 0.5 * tau * model.theta.squaredNorm();
}

namespace {

void init_mlp_block(Eigen::VectorXd& theta, const ParamSlice& slice,
                    std::mt19937_64& rng) {
  const MlpSpec& s = slice.spec;
  const double lim1 = std::sqrt(6.0 / (s.n_in + s.n_hidden));
  const double lim2 = std::sqrt(6.0 / (s.n_hidden + s.n_out));
  const double lim_a = std::sqrt(6.0 / (s.n_in + s.n_out));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  double* p = theta.data() + slice.offset;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s.n_hidden) * s.n_in; ++i)
    p[s.w1_offset() + i] = lim1 * unit(rng);
  for (int i = 0; i < s.n_hidden; ++i) p[s.b1_offset() + i] = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s.n_out) * s.n_hidden; ++i)
    p[s.w2_offset() + i] = lim2 * unit(rng);
  for (int i = 0; i < s.n_out; ++i) p[s.b2_offset() + i] = 0.0;
  if (s.has_linear_bypass)
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s.n_out) * s.n_in; ++i)
      p[s.bypass_offset() + i] = 0.1 * lim_a * unit(rng);
}

}  // namespace

ParamVector init_params(const NeuralSSModel& model, std::uint64_t seed) {
  ParamVector theta = ParamVector::Zero(model.param_count());
  std::mt19937_64 rng(seed);
  init_mlp_block(theta, model.f_slice(), rng);
  init_mlp_block(theta, model.g_slice(), rng);
  return theta;
}

AdamOptimizer::AdamOptimizer(Eigen::Index n, double lr, double beta1, double beta2,
                             double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void AdamOptimizer::step(Eigen::VectorXd& x, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_.array() + (1.0 - beta2_) * grad.array().square();
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  x.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

double lbfgs_minimize(const Objective& f, Eigen::VectorXd& x, const LbfgsOptions& opts) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd grad(n), grad_new(n), x_new(n), dir(n);
  double fx = f(x, grad);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (grad.norm() <= opts.grad_tol) break;

    // Two-loop recursion.
    dir = -grad;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      dir *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += (alpha[i] - beta) * s_hist[i];
    }

    double slope = grad.dot(dir);
    if (slope >= 0.0) {  // not a descent direction; fall back to steepest descent
      dir = -grad;
      slope = -grad.squaredNorm();
    }
    // Without curvature history the raw gradient can be a wildly out-of-scale
    // step; cap the trial displacement so backtracking starts in range.
    if (s_hist.empty() && dir.norm() > 1.0) {
      const double scale = 1.0 / dir.norm();
      dir *= scale;
      slope *= scale;
    }

    // Backtracking line search, sufficient decrease.
    double step = 1.0;
    double fx_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      x_new = x + step * dir;
      try {
        fx_new = f(x_new, grad_new);
      } catch (const DivergenceError&) {
        step *= 0.5;
        continue;
      }
      if (std::isfinite(fx_new) && fx_new <= fx + opts.c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s_vec = x_new - x;
    const Eigen::VectorXd y_vec = grad_new - grad;
    const double sy = s_vec.dot(y_vec);
    if (sy > 1e-12 * s_vec.norm() * y_vec.norm()) {
      s_hist.push_back(s_vec);
      y_hist.push_back(y_vec);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    fx = fx_new;
    grad = grad_new;
  }
  return fx;
}

TrainReport train_map(const Dataset& ds, const NeuralSSModel& model_init,
                      const TrainConfig& cfg) {
  cfg.validate();
  model_init.validate();
  if (model_init.n_u != 1)
    throw std::invalid_argument("train_map: dataset provides a single input channel");
  const Eigen::Index n = ds.u.size();
  if (n < cfg.subseq_len)
    throw std::invalid_argument("train_map: dataset shorter than subseq_len");

  const auto t_start = std::chrono::steady_clock::now();
  const Eigen::MatrixXd u = ds.u;
  const Eigen::VectorXd& y = ds.y;

  NeuralSSModel model = model_init;
  double beta = cfg.beta;

  // Selection/refinement objective: the NLL over a disjoint tiling of the
  // dataset into subseq_len windows (zero init + washout, like the minibatch
  // loss). A single contiguous rollout would score a different quantity than
  // the one being optimized and can discard genuinely better iterates.
  std::vector<Eigen::Index> tiled;
  for (Eigen::Index s2 = 0; s2 + cfg.subseq_len <= n; s2 += cfg.subseq_len)
    tiled.push_back(s2);

  auto full_nll = [&](const ParamVector& theta) {
    NeuralSSModel m = model;
    m.theta = theta;
    return nll_subsequences(m, u, y, tiled, cfg.subseq_len, cfg.tau, beta, cfg.washout)
        .value;
  };

  TrainReport report;
  report.config = cfg;
  ParamVector best_theta = model.theta;
  double best_nll = full_nll(best_theta);
  if (!std::isfinite(best_nll))
    throw std::runtime_error("train_map: non-finite NLL at initialization");

  // Epoch definition: all contiguous sub-sequences of length subseq_len,
  // visited in seeded-random order, grouped into batches.
  std::vector<Eigen::Index> starts(n - cfg.subseq_len + 1);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(starts.size()); ++i)
    starts[i] = i;
  std::mt19937_64 rng(cfg.seed);

  AdamOptimizer adam(model.param_count(), cfg.lr);
  const double n_starts = static_cast<double>(starts.size());

  for (int epoch = 0; epoch < cfg.epochs_adam; ++epoch) {
    std::shuffle(starts.begin(), starts.end(), rng);
    for (std::size_t pos = 0; pos < starts.size(); pos += cfg.batch_size) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, starts.size() - pos);
      const std::vector<Eigen::Index> batch(starts.begin() + pos,
                                            starts.begin() + pos + len);
      // Prior enters once per epoch in expectation: weight by batch fraction.
      const double tau_batch = cfg.tau * static_cast<double>(len) / n_starts;
      NllResult res;
      try {
        res = nll_subsequences(model, u, y, batch, cfg.subseq_len, tau_batch, beta,
                               cfg.washout);
      } catch (const DivergenceError& e) {
        throw std::runtime_error("train_map: divergence in epoch " +
                                 std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(res.value))
        throw std::runtime_error("train_map: non-finite loss in epoch " +
                                 std::to_string(epoch) + " at batch offset " +
                                 std::to_string(pos));
      adam.step(model.theta, res.grad);
    }
    const double tr = full_nll(model.theta);
    report.nll_trace.push_back(tr);
    if (std::isfinite(tr) && tr < best_nll) {
      best_nll = tr;
      best_theta = model.theta;
    }
  }

  if (cfg.estimate_beta && cfg.epochs_adam > 0) {
    NeuralSSModel m = model;
    m.theta = best_theta;
    const SimOutput sim = simulate(m, u, Eigen::VectorXd::Zero(m.n_x));
    double ss = 0.0;
    for (Eigen::Index k = cfg.washout; k < n; ++k) {
      const double r = sim.y_mean(k) - y(k);
      ss += r * r;
    }
    const double var = ss / static_cast<double>(n - cfg.washout);
    if (var > 0.0) beta = 1.0 / var;
    best_nll = full_nll(best_theta);
  }

  // Full-batch refinement from the best iterate seen so far.
  model.theta = best_theta;
  Objective objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    NeuralSSModel m = model;
    m.theta = theta;
    const NllResult res =
        nll_subsequences(m, u, y, tiled, cfg.subseq_len, cfg.tau, beta, cfg.washout);
    grad = res.grad;
    return res.value;
  };

  for (int epoch = 0; epoch < cfg.epochs_refine; ++epoch) {
    if (cfg.refine_plain_gd) {
      Eigen::VectorXd grad(model.param_count());
      double fx = objective(model.theta, grad);
      for (int it = 0; it < cfg.lbfgs_iters_per_epoch; ++it) {
        double step = 1.0 / std::max(1.0, grad.norm());
        bool moved = false;
        for (int ls = 0; ls < 30; ++ls) {
          Eigen::VectorXd cand = model.theta - step * grad;
          Eigen::VectorXd grad_new(model.param_count());
          double fc;
          try {
            fc = objective(cand, grad_new);
          } catch (const DivergenceError&) {
            step *= 0.5;
            continue;
          }
          if (std::isfinite(fc) && fc < fx) {
            model.theta = cand;
            grad = grad_new;
            fx = fc;
            moved = true;
            break;
          }
          step *= 0.5;
        }
        if (!moved) break;
      }
    } else {
      LbfgsOptions opts;
      opts.memory = cfg.lbfgs_memory;
      opts.max_iters = cfg.lbfgs_iters_per_epoch;
      lbfgs_minimize(objective, model.theta, opts);
    }
    const double tr = full_nll(model.theta);
    report.nll_trace.push_back(tr);
    if (std::isfinite(tr) && tr < best_nll) {
      best_nll = tr;
      best_theta = model.theta;
    }
  }

  report.theta_map = best_theta;
  report.beta_used = beta;
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace nssm
