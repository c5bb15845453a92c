#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "nssm_unc/mlp.hpp"

namespace nssm {

/// Discrete-time neural state-space model:
///   x_{k+1} = F(x_k, u_k; theta)
///   y_k     = G(x_k; theta)
/// F and G are one-hidden-layer tanh networks with linear bypass; their
/// parameters live back-to-back in one flat vector, F first.
struct NeuralSSModel {
  int n_x = 6;
  int n_u = 1;
  int n_y = 1;
  MlpSpec f_spec;
  MlpSpec g_spec;
  ParamVector theta;

  static NeuralSSModel make(int n_x = 6, int n_u = 1, int n_hidden = 15,
                            bool bypass = true, int n_y = 1);

  ParamSlice f_slice() const { return ParamSlice{0, f_spec}; }
  ParamSlice g_slice() const { return ParamSlice{f_spec.param_count(), g_spec}; }
  Eigen::Index param_count() const { return f_spec.param_count() + g_spec.param_count(); }

  void validate() const;
};

/// State sensitivity ds/dtheta propagated alongside the state.
struct SensitivityState {
  Eigen::MatrixXd s;  // n_x x n_theta, zero at sequence start
};

struct SimOutput {
  Eigen::VectorXd y_mean;                  // noise-free predictions, length N
  std::optional<Eigen::MatrixXd> x_traj;   // N x n_x when requested
  std::optional<Eigen::MatrixXd> y_grads;  // N x n_theta when requested
  Eigen::VectorXd x_final;                 // state after the last step
  std::optional<Eigen::MatrixXd> s_final;  // sensitivity after the last step
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(Eigen::Index step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  Eigen::Index step() const { return step_; }

 private:
  Eigen::Index step_;
};

/// Plain simulation, no gradients. u is N x n_u.
SimOutput simulate(const NeuralSSModel& model, const Eigen::MatrixXd& u,
                   const Eigen::VectorXd& x0, bool keep_states = false);

/// Simulation with forward sensitivity propagation:
///   s_{k+1} = Jfx_k s_k + Jftheta_k,   dy_k/dtheta = Jgx_k s_k + Jgtheta_k.
/// Cost is linear in N. s0 defaults to zero.
SimOutput simulate_with_sensitivities(const NeuralSSModel& model,
                                      const Eigen::MatrixXd& u,
                                      const Eigen::VectorXd& x0,
                                      const SensitivityState* s0 = nullptr,
                                      bool keep_states = false);

/// Oracle/benchmark backend: each dy_k/dtheta is obtained by an independent
/// central finite-difference pass re-simulating steps 0..k, so the total
/// cost grows quadratically in N. Small N only.
Eigen::MatrixXd output_grads_naive(const NeuralSSModel& model,
                                   const Eigen::MatrixXd& u,
                                   const Eigen::VectorXd& x0,
                                   double fd_step = 1e-6);

}  // namespace nssm
