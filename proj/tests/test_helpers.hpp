#pragma once

#include <random>

#include "nssm_unc/nssm.hpp"

namespace nssm::testing {

inline Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng,
                                     double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c,
                                     std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

/// Small random model with parameters scaled down to keep simulations stable.
inline NeuralSSModel random_model(int n_x, int n_u, int n_hidden,
                                  std::mt19937_64& rng, double scale = 0.4) {
  NeuralSSModel m = NeuralSSModel::make(n_x, n_u, n_hidden);
  m.theta = random_vector(m.param_count(), rng, scale);
  return m;
}

/// Central finite differences of the whole output trajectory over theta.
inline Eigen::MatrixXd fd_y_grads(const NeuralSSModel& model, const Eigen::MatrixXd& u,
                                  const Eigen::VectorXd& x0, double h = 1e-6) {
  NeuralSSModel pert = model;
  Eigen::MatrixXd grads(u.rows(), model.param_count());
  for (Eigen::Index i = 0; i < model.param_count(); ++i) {
    const double step = h * std::max(1.0, std::abs(model.theta(i)));
    pert.theta(i) = model.theta(i) + step;
    const Eigen::VectorXd yp = simulate(pert, u, x0).y_mean;
    pert.theta(i) = model.theta(i) - step;
    const Eigen::VectorXd ym = simulate(pert, u, x0).y_mean;
    pert.theta(i) = model.theta(i);
    grads.col(i) = (yp - ym) / (2.0 * step);
  }
  return grads;
}

/// max_ij |a - b| / max(1, |b|), elementwise.
inline double max_rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double err =
          std::abs(a(i, j) - b(i, j)) / std::max(1.0, std::abs(b(i, j)));
      worst = std::max(worst, err);
    }
  return worst;
}

}  // namespace nssm::testing
