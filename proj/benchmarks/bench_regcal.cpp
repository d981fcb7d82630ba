// Copyright 2026 The regcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "regcal/data.hpp"
#include "regcal/empirical_calibration.hpp"
#include "regcal/gpc_calibration.hpp"
#include "regcal/harness.hpp"
#include "regcal/numerics.hpp"
#include "regcal/rng.hpp"

using namespace regcal;

namespace {

SymmetricMatrix random_spd(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix a(n, n);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  Matrix m = a * a.transpose() / static_cast<double>(n);
  m.diagonal().array() += 1.0;
  return SymmetricMatrix::symmetrized(m);
}

struct Calibration {
  GridPtr grid;
  std::vector<CdfGrid> cdfs;
  std::vector<double> targets;
};

Calibration calibration_set(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  Calibration c;
  c.grid = std::make_shared<const ThresholdGrid>(build_threshold_grid(-2, 2, k));
  for (std::size_t i = 0; i < n; ++i) {
    const GaussianPredictive g(rng.uniform(-1.5, 1.5), rng.uniform(0.2, 0.8));
    c.cdfs.push_back(CdfGrid::from_gaussian(c.grid, g));
    c.targets.push_back(rng.normal(g.mean + 0.3 * g.stddev, 1.2 * g.stddev));
  }
  return c;
}

GpcTrainingSet gpc_set(std::size_t n) {
  const auto c = calibration_set(n, 16, 3);
  return build_gpc_training(c.cdfs, c.targets, *c.grid, n, 1);
}

}  // namespace

static void BM_Cholesky(benchmark::State& state) {
  const auto m = random_spd(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(cholesky(m));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Cholesky)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oNCubed);

static void BM_FitEmpirical(benchmark::State& state) {
  const auto kind = state.range(2) == 0 ? EmpiricalKind::Logistic : EmpiricalKind::Beta;
  const auto c = calibration_set(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(fit_empirical(kind, c.grid, c.cdfs, c.targets));
  state.SetItemsProcessed(state.iterations() * state.range(0) * (state.range(1) + 1));
}
BENCHMARK(BM_FitEmpirical)
    ->ArgNames({"N", "K", "beta"})
    ->ArgsProduct({{1000, 2000, 4000}, {16, 32, 64}, {0, 1}})
    ->Unit(benchmark::kMillisecond);

static void BM_CalibrateMasses(benchmark::State& state) {
  const auto c = calibration_set(2000, static_cast<std::size_t>(state.range(0)), 4);
  const auto cal = fit_empirical(EmpiricalKind::Beta, c.grid, c.cdfs, c.targets);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_masses(cal, c.cdfs[i++ % c.cdfs.size()]));
}
BENCHMARK(BM_CalibrateMasses)->Arg(16)->Arg(64);

static void BM_LaplaceMode(benchmark::State& state) {
  const auto s = gpc_set(static_cast<std::size_t>(state.range(0)));
  const Matrix k = GpcKernel{}(s.features, s.features);
  for (auto _ : state) benchmark::DoNotOptimize(laplace_mode(k, s.labels));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LaplaceMode)->RangeMultiplier(2)->Range(128, 1024)->Complexity()->Unit(benchmark::kMillisecond);

static void BM_FitGpc(benchmark::State& state) {
  const auto s = gpc_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_gpc(s));
}
BENCHMARK(BM_FitGpc)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond)->Iterations(1);

static void BM_ToyFold(benchmark::State& state) {
  const Dataset data = generate_toy({});
  ExperimentConfig c;
  c.method = static_cast<Method>(state.range(0));
  c.repeats = 1;
  const auto plan = split_cv(data.size(), c.folds, 1, c.seed);
  const auto train = plan.train_indices(0, 0);
  for (auto _ : state) benchmark::DoNotOptimize(run_fold(c, data, train, plan.test[0][0], 0, 0));
  state.SetLabel(std::string(to_string(c.method)));
}
BENCHMARK(BM_ToyFold)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
