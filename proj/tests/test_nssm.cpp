#include <doctest.h>

#include "nssm_unc/mlp.hpp"
#include "test_helpers.hpp"

using namespace nssm;
using namespace nssm::testing;

namespace {

/// theta for the scalar linear system x_{k+1} = a x + b u, y = c x
/// (all network weights zero, dynamics carried by the bypass terms).
NeuralSSModel linear_model(double a, double b, double c, int n_hidden = 2) {
  NeuralSSModel m = NeuralSSModel::make(1, 1, n_hidden);
  Eigen::MatrixXd a_f(1, 2);
  a_f << a, b;
  const Eigen::VectorXd f_params =
      mlp_pack(m.f_spec, Eigen::MatrixXd::Zero(n_hidden, 2),
               Eigen::VectorXd::Zero(n_hidden), Eigen::MatrixXd::Zero(1, n_hidden),
               Eigen::VectorXd::Zero(1), a_f);
  const Eigen::VectorXd g_params =
      mlp_pack(m.g_spec, Eigen::MatrixXd::Zero(n_hidden, 1),
               Eigen::VectorXd::Zero(n_hidden), Eigen::MatrixXd::Zero(1, n_hidden),
               Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, c));
  m.theta << f_params, g_params;
  return m;
}

}  // namespace

TEST_CASE("default architecture has 385 parameters") {
  const NeuralSSModel m = NeuralSSModel::make();
  CHECK(m.param_count() == 385);
}

TEST_CASE("all-zero theta gives identically zero output") {
  NeuralSSModel m = NeuralSSModel::make(3, 1, 4);
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd u = random_matrix(25, 1, rng);
  const SimOutput out = simulate(m, u, Eigen::VectorXd::Zero(3));
  CHECK(out.y_mean.isZero(0.0));
}

TEST_CASE("linear special case matches the closed-form recursion") {
  const double a = 0.8, b = 0.5, c = -1.2;
  const NeuralSSModel m = linear_model(a, b, c);
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd u = random_matrix(30, 1, rng);
  const SimOutput out = simulate(m, u, Eigen::VectorXd::Zero(1));

  double x = 0.0;
  for (Eigen::Index k = 0; k < u.rows(); ++k) {
    CHECK(out.y_mean(k) == doctest::Approx(c * x).epsilon(1e-12));
    x = a * x + b * u(k, 0);
  }
}

TEST_CASE("simulate matches a separately coded step-by-step loop") {
  std::mt19937_64 rng(3);
  const NeuralSSModel m = random_model(2, 1, 3, rng);
  const Eigen::MatrixXd u = random_matrix(20, 1, rng);
  const Eigen::VectorXd x0 = random_vector(2, rng);
  const SimOutput out = simulate(m, u, x0);

  // Reference loop built on the mlp module only.
  Eigen::VectorXd x = x0;
  for (Eigen::Index k = 0; k < u.rows(); ++k) {
    const Eigen::VectorXd y = mlp_forward(m.g_slice(), m.theta, x);
    CHECK(out.y_mean(k) == y(0));
    Eigen::VectorXd in(3);
    in << x, u.row(k).transpose();
    x = mlp_forward(m.f_slice(), m.theta, in);
  }
}

TEST_CASE("zero initial sensitivity: first y_grads row is Jgtheta only") {
  NeuralSSModel m = NeuralSSModel::make(2, 1, 3);  // theta = 0
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd u = random_matrix(5, 1, rng);
  const SimOutput out = simulate_with_sensitivities(m, u, Eigen::VectorXd::Zero(2));

  const MlpJacobians g_jac =
      mlp_jacobians(m.g_slice(), m.theta, Eigen::VectorXd::Zero(2));
  Eigen::RowVectorXd expected = Eigen::RowVectorXd::Zero(m.param_count());
  expected.segment(m.g_slice().offset, m.g_spec.param_count()) = g_jac.wrt_params;
  CHECK((out.y_grads->row(0) - expected).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("recursive y_grads match central finite differences") {
  std::mt19937_64 rng(5);
  const NeuralSSModel m = random_model(2, 1, 3, rng);
  const Eigen::MatrixXd u = random_matrix(20, 1, rng);
  const SimOutput out = simulate_with_sensitivities(m, u, Eigen::VectorXd::Zero(2));
  const Eigen::MatrixXd fd = fd_y_grads(m, u, Eigen::VectorXd::Zero(2));
  CHECK(max_rel_error(*out.y_grads, fd) <= 1e-5);
}

TEST_CASE("linear special case: y_grads match the differentiated recursion") {
  const double a = 0.7, b = -0.4, c = 1.5;
  const NeuralSSModel m = linear_model(a, b, c);
  std::mt19937_64 rng(6);
  const Eigen::Index n = 25;
  const Eigen::MatrixXd u = random_matrix(n, 1, rng);
  const SimOutput out = simulate_with_sensitivities(m, u, Eigen::VectorXd::Zero(1));

  const Eigen::Index col_a = m.f_slice().offset + m.f_spec.bypass_offset();
  const Eigen::Index col_b = col_a + 1;
  const Eigen::Index col_c = m.g_slice().offset + m.g_spec.bypass_offset();
  const Eigen::Index col_b2f = m.f_slice().offset + m.f_spec.b2_offset();
  const Eigen::Index col_b2g = m.g_slice().offset + m.g_spec.b2_offset();

  // dx/da, dx/db, dx/db2_f propagated by hand; y = c x.
  double x = 0.0, pa = 0.0, pb = 0.0, pf = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    CHECK((*out.y_grads)(k, col_a) == doctest::Approx(c * pa).epsilon(1e-10));
    CHECK((*out.y_grads)(k, col_b) == doctest::Approx(c * pb).epsilon(1e-10));
    CHECK((*out.y_grads)(k, col_c) == doctest::Approx(x).epsilon(1e-10));
    CHECK((*out.y_grads)(k, col_b2f) ==
          doctest::Approx(c * pf).epsilon(1e-10));
    CHECK((*out.y_grads)(k, col_b2g) == 1.0);
    pa = x + a * pa;
    pb = u(k, 0) + a * pb;
    pf = 1.0 + a * pf;
    x = a * x + b * u(k, 0);
  }

  // W1/W2/b1 columns are exactly zero here (all hidden weights vanish).
  for (Eigen::Index k = 0; k < n; ++k) {
    CHECK((*out.y_grads)(k, m.f_spec.w1_offset()) == 0.0);
    CHECK((*out.y_grads)(k, m.f_spec.w2_offset()) == 0.0);
    CHECK((*out.y_grads)(k, m.f_spec.b1_offset()) == 0.0);
  }
}

TEST_CASE("naive backend agrees with the recursive one") {
  std::mt19937_64 rng(7);
  const NeuralSSModel m = random_model(2, 1, 3, rng);
  const Eigen::MatrixXd u = random_matrix(15, 1, rng);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  const SimOutput rec = simulate_with_sensitivities(m, u, x0);
  const Eigen::MatrixXd naive = output_grads_naive(m, u, x0);
  CHECK(max_rel_error(*rec.y_grads, naive) <= 1e-5);
}

TEST_CASE("N=1: both backends return the identical single-row result") {
  std::mt19937_64 rng(8);
  const NeuralSSModel m = random_model(2, 1, 3, rng);
  const Eigen::MatrixXd u = random_matrix(1, 1, rng);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  const SimOutput rec = simulate_with_sensitivities(m, u, x0);
  const Eigen::MatrixXd naive = output_grads_naive(m, u, x0);
  CHECK(rec.y_grads->rows() == 1);
  CHECK(naive.rows() == 1);
  CHECK(max_rel_error(*rec.y_grads, naive) <= 1e-6);
}

TEST_CASE("sensitivity correctness over 20 random small models") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> nx(1, 3), nh(1, 4), len(5, 30);
  for (int trial = 0; trial < 20; ++trial) {
    const NeuralSSModel m = random_model(nx(rng), 1, nh(rng), rng);
    const Eigen::MatrixXd u = random_matrix(len(rng), 1, rng);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(m.n_x);
    const SimOutput out = simulate_with_sensitivities(m, u, x0);
    CHECK(max_rel_error(*out.y_grads, fd_y_grads(m, u, x0)) <= 1e-4);
  }
}

TEST_CASE("zero-input fixed point keeps state and sensitivities finite") {
  // theta = 0 makes F(0,0)=0; the zero state is invariant.
  NeuralSSModel m = NeuralSSModel::make(3, 1, 4);
  const Eigen::MatrixXd u = Eigen::MatrixXd::Zero(50, 1);
  const SimOutput out =
      simulate_with_sensitivities(m, u, Eigen::VectorXd::Zero(3), nullptr, true);
  CHECK(out.x_traj->isZero(0.0));
  CHECK(out.y_grads->allFinite());
}

TEST_CASE("determinism: identical inputs give bitwise-identical SimOutput") {
  std::mt19937_64 rng(10);
  const NeuralSSModel m = random_model(3, 1, 4, rng);
  const Eigen::MatrixXd u = random_matrix(40, 1, rng);
  const Eigen::VectorXd x0 = random_vector(3, rng);
  const SimOutput a = simulate_with_sensitivities(m, u, x0);
  const SimOutput b = simulate_with_sensitivities(m, u, x0);
  CHECK(a.y_mean == b.y_mean);
  CHECK(*a.y_grads == *b.y_grads);
}

TEST_CASE("divergence raises an error carrying the first bad step") {
  // Strong positive feedback through the bypass blows the state up.
  NeuralSSModel m = linear_model(3.0, 1.0, 1.0);
  Eigen::MatrixXd u = Eigen::MatrixXd::Constant(2000, 1, 1e100);
  bool threw = false;
  try {
    simulate(m, u, Eigen::VectorXd::Zero(1));
  } catch (const DivergenceError& e) {
    threw = true;
    CHECK(e.step() >= 0);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("sub-sequence hand-off: chained runs reproduce the full run") {
  std::mt19937_64 rng(11);
  const NeuralSSModel m = random_model(2, 1, 3, rng);
  const Eigen::MatrixXd u = random_matrix(24, 1, rng);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);

  const SimOutput full = simulate_with_sensitivities(m, u, x0);
  const SimOutput first = simulate_with_sensitivities(m, u.topRows(12), x0);
  SensitivityState mid{*first.s_final};
  const SimOutput second =
      simulate_with_sensitivities(m, u.bottomRows(12), first.x_final, &mid);

  CHECK((full.y_mean.head(12) - first.y_mean).lpNorm<Eigen::Infinity>() <= 1e-14);
  CHECK((full.y_mean.tail(12) - second.y_mean).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK((full.y_grads->bottomRows(12) - *second.y_grads).lpNorm<Eigen::Infinity>() <=
        1e-10);
}
