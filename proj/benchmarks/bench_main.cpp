#include <benchmark/benchmark.h>

#include <vector>

#include "sscp/conformal.hpp"
#include "sscp/forest.hpp"
#include "sscp/nn/loss.hpp"
#include "sscp/nn/mlp.hpp"
#include "sscp/nn/train.hpp"
#include "sscp/pretext.hpp"
#include "sscp/random.hpp"

namespace {

using namespace sscp;

RealMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  RealMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

void BM_MlpPredict(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto model = nn::Mlp::init(nn::MlpConfig::regressor(20), 1);
  const auto x = random_matrix(rows, 20, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpPredict)->Arg(128)->Arg(1024);

// Forward plus backward over one batch, the bulk of a training step.
void BM_MlpGradient(benchmark::State& state) {
  const auto model = nn::Mlp::init(nn::MlpConfig::regressor(20), 1);
  const auto x = random_matrix(128, 20, 3);
  const auto y = random_matrix(128, 1, 4);
  const auto objective = nn::Objective::uniform(nn::LossKind::mse());
  for (auto _ : state) benchmark::DoNotOptimize(nn::parameter_gradient(model, x, y, objective));
}
BENCHMARK(BM_MlpGradient);

void BM_ForestFit(benchmark::State& state) {
  const auto x = random_matrix(600, 20, 5);
  std::vector<double> y(x.rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(i, 0) * x(i, 1) + 0.1 * x(i, 2);
  forest::ForestConfig config;
  config.n_trees = static_cast<std::size_t>(state.range(0));
  config.n_threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(forest::Forest::fit(x, y, config));
}
BENCHMARK(BM_ForestFit)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_IcpCalibrate(benchmark::State& state) {
  Rng rng(6);
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  for (double& s : scores) s = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(conformal::icp_calibrate(scores, 0.1));
}
BENCHMARK(BM_IcpCalibrate)->Arg(1000)->Arg(100000);

void BM_VimeCorrupt(benchmark::State& state) {
  const auto reps = random_matrix(1024, 64, 7);
  Rng rng(8);
  for (auto _ : state) benchmark::DoNotOptimize(pretext::vime_corrupt(reps, 0.3, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(reps.size()));
}
BENCHMARK(BM_VimeCorrupt);

}  // namespace
BENCHMARK_MAIN();
