// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "atlas/diagnostics.hpp"
#include "atlas/harness.hpp"
#include "atlas/labels.hpp"
#include "atlas/model.hpp"
#include "atlas/trainer.hpp"

namespace {

using namespace atlas;

Task bench_task(std::size_t base_classes) {
  SyntheticTaskConfig tc;
  tc.base_classes = base_classes;
  tc.seed = 1;
  return generate_task(tc);
}

void BM_GradPrompt(benchmark::State& state) {
  const Task task = bench_task(static_cast<std::size_t>(state.range(0)));
  const auto parts = task.base_parts(ModelConfig{});
  const auto& x = task.train.front();
  const auto target = x.label.distribution();
  for (auto _ : state) {
    benchmark::DoNotOptimize(grad_prompt(task.init_prompt, x, target, parts));
  }
}
BENCHMARK(BM_GradPrompt)->Arg(4)->Arg(16)->Arg(64);

void BM_BuildCsl(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<Vector> emb(c, Vector(32));
  for (auto& e : emb) {
    for (double& v : e) v = normal(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(build_csl(emb, 0.05));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildCsl)->RangeMultiplier(4)->Range(4, 256)->Complexity(benchmark::oNSquared);

void BM_TrainingEpoch(benchmark::State& state) {
  const Task task = bench_task(static_cast<std::size_t>(state.range(0)));
  const auto parts = task.base_parts(ModelConfig{});
  TrainConfig cfg;
  cfg.mode = TrainMode::parse("atlas");
  cfg.epochs = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_training(task.train, parts, task.init_prompt, LabelTables{}, cfg));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(task.train.size()));
}
BENCHMARK(BM_TrainingEpoch)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_EstimateVariances(benchmark::State& state) {
  const Task task = bench_task(4);
  const auto parts = task.base_parts(ModelConfig{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_variances(task.init_prompt, task.train, parts));
  }
}
BENCHMARK(BM_EstimateVariances)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
