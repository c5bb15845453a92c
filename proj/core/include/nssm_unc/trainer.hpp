#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nssm_unc/nssm.hpp"
#include "nssm_unc/wh.hpp"

namespace nssm {

struct TrainConfig {
  int batch_size = 256;
  int subseq_len = 256;
  int epochs_adam = 120;
  int epochs_refine = 4;
  double lr = 1e-3;
  int washout = 64;
  double tau = 1e-2;   // prior precision
  double beta = 4e4;   // noise precision, 1/sigma_e^2
  std::uint64_t seed = 0;
  bool estimate_beta = false;     // re-estimate beta from residuals after Adam
  bool refine_plain_gd = false;   // substitute plain gradient descent for L-BFGS
  int lbfgs_memory = 20;
  int lbfgs_iters_per_epoch = 150;

  void validate() const;
};

struct TrainReport {
  std::vector<double> nll_trace;  // full-dataset NLL after each epoch
  ParamVector theta_map;
  double wall_time_s = 0.0;
  double beta_used = 0.0;
  TrainConfig config;
};

struct NllResult {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// Regularized simulation-error NLL over one contiguous sequence, simulated
/// from zero initial state; the first `washout` residuals are excluded.
///   value = (beta/2) sum_k (y_k - ybar_k)^2 + (tau/2) |theta|^2
///   grad  = beta sum_k (ybar_k - y_k) dybar_k/dtheta + tau theta
NllResult nll(const NeuralSSModel& model, const Eigen::MatrixXd& u,
              const Eigen::VectorXd& y, double tau, double beta, int washout);

/// Same NLL accumulated over a set of sub-sequences given by start indices;
/// the prior term enters once. Divergence errors carry the sub-sequence start.
NllResult nll_subsequences(const NeuralSSModel& model, const Eigen::MatrixXd& u,
                           const Eigen::VectorXd& y,
                           const std::vector<Eigen::Index>& starts, int subseq_len,
                           double tau, double beta, int washout);

/// NLL value only (no sensitivity propagation), full sequence.
double nll_value(const NeuralSSModel& model, const Eigen::MatrixXd& u,
                 const Eigen::VectorXd& y, double tau, double beta, int washout);

/// Zero biases, uniform +-sqrt(6/(fan_in+fan_out)) weights, bypass scaled by 0.1.
ParamVector init_params(const NeuralSSModel& model, std::uint64_t seed);

/// MAP estimation: seeded-random epochs over all contiguous sub-sequences
/// (Adam), then full-batch quasi-Newton refinement; returns the parameter
/// vector with the lowest full-dataset NLL seen.
TrainReport train_map(const Dataset& ds, const NeuralSSModel& model_init,
                      const TrainConfig& cfg);

// --- generic optimizers -----------------------------------------------------

class AdamOptimizer {
 public:
  AdamOptimizer(Eigen::Index n, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& x, const Eigen::VectorXd& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
  int memory = 20;
  int max_iters = 100;
  double grad_tol = 1e-10;
  double c1 = 1e-4;  // sufficient-decrease constant
  int max_line_search = 30;
};

/// Limited-memory BFGS (two-loop recursion) with backtracking line search.
/// Returns the final objective value; x is updated in place.
double lbfgs_minimize(const Objective& f, Eigen::VectorXd& x, const LbfgsOptions& opts);

}  // namespace nssm
