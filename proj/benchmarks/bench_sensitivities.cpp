// Timing of the two gradient backends and of the Gauss-Newton precision
// accumulation. The recursive backend should scale linearly in the sequence
// length, the naive re-simulation backend quadratically.

#include <benchmark/benchmark.h>

#include <random>

#include "nssm_unc/laplace.hpp"
#include "nssm_unc/trainer.hpp"

using namespace nssm;

namespace {

Eigen::MatrixXd random_input(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  Eigen::MatrixXd m(n, 1);
  for (Eigen::Index k = 0; k < n; ++k) m(k, 0) = u(rng);
  return m;
}

NeuralSSModel full_model() {
  NeuralSSModel m = NeuralSSModel::make(6, 1, 15);
  m.theta = init_params(m, 1);
  return m;
}

NeuralSSModel tiny_model() {
  NeuralSSModel m = NeuralSSModel::make(1, 1, 2);
  m.theta = init_params(m, 2);
  return m;
}

}  // namespace

static void BM_SimulateOnly(benchmark::State& state) {
  const NeuralSSModel m = full_model();
  const Eigen::MatrixXd u = random_input(state.range(0), 3);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(m.n_x);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(m, u, x0).y_mean.sum());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateOnly)->Arg(1000)->Arg(4000);

static void BM_RecursiveSensitivities(benchmark::State& state) {
  const NeuralSSModel m = full_model();
  const Eigen::MatrixXd u = random_input(state.range(0), 4);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(m.n_x);
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate_with_sensitivities(m, u, x0).y_grads->sum());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RecursiveSensitivities)->Arg(1000)->Arg(2000)->Arg(4000)->Arg(8000);

static void BM_NaiveSensitivities(benchmark::State& state) {
  const NeuralSSModel m = tiny_model();
  const Eigen::MatrixXd u = random_input(state.range(0), 5);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(m.n_x);
  for (auto _ : state)
    benchmark::DoNotOptimize(output_grads_naive(m, u, x0).sum());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NaiveSensitivities)->Arg(250)->Arg(500)->Arg(1000);

static void BM_GnPrecision(benchmark::State& state) {
  const NeuralSSModel m = full_model();
  Dataset ds;
  ds.u = random_input(state.range(0), 6);
  ds.y = simulate(m, Eigen::MatrixXd(ds.u), Eigen::VectorXd::Zero(m.n_x)).y_mean;
  for (auto _ : state)
    benchmark::DoNotOptimize(gn_precision(m, ds, 1e-2, 4e4, 64).chol_lower(0, 0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GnPrecision)->Arg(1000)->Arg(4000);

static void BM_NllGradient(benchmark::State& state) {
  const NeuralSSModel m = full_model();
  const Eigen::MatrixXd u = random_input(state.range(0), 7);
  const Eigen::VectorXd y =
      simulate(m, u, Eigen::VectorXd::Zero(m.n_x)).y_mean;
  for (auto _ : state)
    benchmark::DoNotOptimize(nll(m, u, y, 1e-2, 4e4, 64).grad.sum());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NllGradient)->Arg(1000)->Arg(4000);

BENCHMARK_MAIN();
