#include "nssm_unc/uq.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace nssm {

UncertainPrediction predict_with_uncertainty(const NeuralSSModel& model,
                                             const LaplacePosterior& post,
                                             const Eigen::MatrixXd& u_star,
                                             double interval_multiplier) {
  model.validate();
  if (post.theta_map.size() != model.param_count() ||
      post.dim() != model.param_count())
    throw std::invalid_argument(
        "predict_with_uncertainty: posterior/model parameter-count mismatch");
  if (!u_star.allFinite())
    throw std::invalid_argument("predict_with_uncertainty: non-finite input");

  const SimOutput sim =
      simulate_with_sensitivities(model, u_star, Eigen::VectorXd::Zero(model.n_x));
  const Eigen::MatrixXd& grads = *sim.y_grads;
  const Eigen::Index n = u_star.rows();

  UncertainPrediction pred;
  pred.y_mean = sim.y_mean;
  pred.var_epistemic.resize(n);
  for (Eigen::Index k = 0; k < n; ++k)
    pred.var_epistemic(k) = post.quadform(grads.row(k).transpose());
  pred.var_total = pred.var_epistemic.array() + 1.0 / post.beta;
  const Eigen::VectorXd half = interval_multiplier * pred.var_total.array().sqrt();
  pred.lo = pred.y_mean - half;
  pred.hi = pred.y_mean + half;
  pred.surprise = surprise_index(pred.var_epistemic, pred.y_mean);
  return pred;
}

double surprise_index(const Eigen::VectorXd& var_epistemic,
                      const Eigen::VectorXd& y_mean) {
  if (var_epistemic.size() != y_mean.size() || y_mean.size() < 1)
    throw std::invalid_argument("surprise_index: length mismatch or empty sequence");
  const double denom = y_mean.array().abs().sum();
  if (denom == 0.0)
    throw std::runtime_error("undefined surprise (zero nominal energy)");
  const double numer = var_epistemic.array().max(0.0).sqrt().sum();
  return 100.0 * numer / denom;
}

void prediction_save_csv(const UncertainPrediction& pred, const Eigen::VectorXd& u,
                         const Eigen::VectorXd* y_true, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "k,u,y_true,y_mean,std_epistemic,std_total,lo,hi\n";
  char buf[256];
  for (Eigen::Index k = 0; k < pred.y_mean.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,", static_cast<long long>(k), u(k));
    out << buf;
    if (y_true) {
      std::snprintf(buf, sizeof(buf), "%.17g", (*y_true)(k));
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g,%.17g,%.17g\n", pred.y_mean(k),
                  std::sqrt(std::max(0.0, pred.var_epistemic(k))),
                  std::sqrt(pred.var_total(k)), pred.lo(k), pred.hi(k));
    out << buf;
  }
}

}  // namespace nssm
