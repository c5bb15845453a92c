#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace nssm {

struct EvalReport {
  std::string signal_id;
  double fit = 0.0;       // percent
  double coverage = 0.0;  // percent
  double surprise = 0.0;  // percent
  double rmse = 0.0;      // V
  Eigen::Index n_steps = 0;
};

/// FIT = 100 * (1 - |y_true - y_pred| / |y_true - mean(y_true)|),
/// root-sum-square norms. Errors on constant y_true.
double fit_index(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

/// Percentage of steps with lo <= y_true <= hi; boundary counts as inside.
double coverage(const Eigen::VectorXd& y_true, const Eigen::VectorXd& lo,
                const Eigen::VectorXd& hi);

double rmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

/// CSV rows matching the result-table columns: `signal,fit,coverage,surprise`.
void report_save_csv(const std::vector<EvalReport>& rows, const std::string& path);
std::vector<EvalReport> report_load_csv(const std::string& path);

}  // namespace nssm
