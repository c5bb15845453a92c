#pragma once

#include "nssm_unc/nssm.hpp"
#include "nssm_unc/wh.hpp"

namespace nssm {

/// Gaussian approximation of the parameter posterior at theta_MAP with the
/// Gauss-Newton Hessian of the negative log posterior as precision:
///   H = tau I + beta sum_k g_k g_k^T,   g_k = dybar_k/dtheta.
/// The sum is also a finite-sample approximation of the Fisher Information
/// Matrix, so the same object yields frequentist confidence intervals for the
/// maximum-likelihood reading; no separate code path is needed.
///
/// Only the lower-triangular Cholesky factor of H is stored; the posterior
/// covariance H^{-1} is never materialized, every use goes through solves.
struct LaplacePosterior {
  ParamVector theta_map;
  double tau = 0.0;
  double beta = 0.0;
  Eigen::MatrixXd chol_lower;  // L with L L^T = H

  Eigen::Index dim() const { return chol_lower.rows(); }

  /// g^T H^{-1} g, computed as |L^{-1} g|^2. Always >= 0.
  double quadform(const Eigen::VectorXd& g) const;
};

inline double posterior_quadform(const LaplacePosterior& post, const Eigen::VectorXd& g) {
  return post.quadform(g);
}

/// Build the posterior directly from a matrix of per-step output gradients
/// (rows g_k^T). Used both by the model-based accumulation below and by
/// closed-form reference problems.
LaplacePosterior gn_precision_from_grads(const ParamVector& theta_map,
                                         const Eigen::MatrixXd& grads, double tau,
                                         double beta);

/// Accumulate H over the post-washout steps of the training set using the
/// recursive sensitivities, then factorize. On factorization failure adds
/// diagonal jitter 1e-8 * trace(H)/n, escalating x10 up to 3 times.
LaplacePosterior gn_precision(const NeuralSSModel& model, const Dataset& ds, double tau,
                              double beta, int washout);

}  // namespace nssm
