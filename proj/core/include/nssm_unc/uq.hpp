#pragma once

#include <string>

#include "nssm_unc/laplace.hpp"
#include "nssm_unc/nssm.hpp"

namespace nssm {

struct UncertainPrediction {
  Eigen::VectorXd y_mean;         // nominal output at theta_MAP
  Eigen::VectorXd var_epistemic;  // diag(J* P J*^T)
  Eigen::VectorXd var_total;      // var_epistemic + 1/beta
  Eigen::VectorXd lo, hi;         // y_mean -+ multiplier * sqrt(var_total)
  double surprise = 0.0;          // percent
};

/// Linearized posterior predictive for a new input sequence. One sensitivity
/// pass yields the nominal output and per-step gradients g_k; the epistemic
/// variance is the posterior quadratic form of each g_k. Only the diagonal of
/// the ppd covariance is ever formed.
UncertainPrediction predict_with_uncertainty(const NeuralSSModel& model,
                                             const LaplacePosterior& post,
                                             const Eigen::MatrixXd& u_star,
                                             double interval_multiplier = 3.0);

/// Aggregate surprise index (percent):
///   s = 100 * sum_k sqrt(var_epistemic_k) / sum_k |y_mean_k|.
/// Uses the epistemic term only; needs no measured output.
double surprise_index(const Eigen::VectorXd& var_epistemic,
                      const Eigen::VectorXd& y_mean);

/// CSV export `k,u,y_true(optional),y_mean,std_epistemic,std_total,lo,hi`.
void prediction_save_csv(const UncertainPrediction& pred, const Eigen::VectorXd& u,
                         const Eigen::VectorXd* y_true, const std::string& path);

}  // namespace nssm
