#include "nssm_unc/laplace.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace nssm {

double LaplacePosterior::quadform(const Eigen::VectorXd& g) const {
  if (g.size() != chol_lower.rows())
    throw std::invalid_argument("posterior_quadform: vector length mismatch");
  return chol_lower.triangularView<Eigen::Lower>().solve(g).squaredNorm();
}

namespace {

using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// Chunked Gram accumulation: per-chunk products run in fast double precision,
// the running sum is kept in extended precision.
Eigen::MatrixXd accumulate_h(const Eigen::MatrixXd& grads, double tau, double beta) {
  const Eigen::Index n = grads.cols();
  LongMatrix acc = LongMatrix::Zero(n, n);
  const Eigen::Index chunk = 256;
  for (Eigen::Index r0 = 0; r0 < grads.rows(); r0 += chunk) {
    const Eigen::Index rows = std::min(chunk, grads.rows() - r0);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(
        grads.middleRows(r0, rows).transpose(), beta);
    acc += gram.selfadjointView<Eigen::Lower>().toDenseMatrix().cast<long double>();
  }
  Eigen::MatrixXd h = acc.cast<double>();
  h.diagonal().array() += tau;
  return h;
}

Eigen::MatrixXd factorize_with_jitter(Eigen::MatrixXd h) {
  const Eigen::Index n = h.rows();
  double jitter = 1e-8 * h.trace() / static_cast<double>(n);
  for (int attempt = 0; attempt <= 3; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    h.diagonal().array() += jitter;
    jitter *= 10.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  throw std::runtime_error(
      "gn_precision: Cholesky factorization failed after jitter; smallest eigenvalue "
      "estimate " +
      std::to_string(es.eigenvalues().minCoeff()));
}

}  // namespace

LaplacePosterior gn_precision_from_grads(const ParamVector& theta_map,
                                         const Eigen::MatrixXd& grads, double tau,
                                         double beta) {
  if (grads.rows() > 0 && grads.cols() != theta_map.size())
    throw std::invalid_argument("gn_precision_from_grads: gradient width mismatch");
  if (tau < 0.0 || beta <= 0.0)
    throw std::invalid_argument("gn_precision_from_grads: need tau >= 0, beta > 0");

  LaplacePosterior post;
  post.theta_map = theta_map;
  post.tau = tau;
  post.beta = beta;
  Eigen::MatrixXd h;
  if (grads.rows() == 0) {
    h = tau * Eigen::MatrixXd::Identity(theta_map.size(), theta_map.size());
  } else {
    h = accumulate_h(grads, tau, beta);
  }
  post.chol_lower = factorize_with_jitter(std::move(h));
  return post;
}

LaplacePosterior gn_precision(const NeuralSSModel& model, const Dataset& ds, double tau,
                              double beta, int washout) {
  model.validate();
  if (ds.u.size() != ds.y.size())
    throw std::invalid_argument("gn_precision: dataset u/y length mismatch");
  if (ds.u.size() <= washout)
    throw std::invalid_argument("gn_precision: dataset not longer than washout");

  const Eigen::MatrixXd u = ds.u;
  const SimOutput sim =
      simulate_with_sensitivities(model, u, Eigen::VectorXd::Zero(model.n_x));
  const Eigen::Index n_used = ds.u.size() - washout;
  return gn_precision_from_grads(model.theta, sim.y_grads->bottomRows(n_used), tau,
                                 beta);
}

}  // namespace nssm
