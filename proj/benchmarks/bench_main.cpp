#include <benchmark/benchmark.h>

#include <random>

#include "coherency/clustering.hpp"
#include "coherency/engine.hpp"
#include "coherency/signal_gen.hpp"
#include "coherency/tda.hpp"

using namespace coherency;

namespace {

Trajectories random_points(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Trajectories x(n, std::vector<double>(k));
  for (auto& b : x) {
    for (auto& v : b) v = g(rng);
  }
  return x;
}

void BM_PresetRun(benchmark::State& state) {
  const auto sc = generate(kundur_preset(1));
  for (auto _ : state) benchmark::DoNotOptimize(run(sc.frames, EngineConfig{}));
}
BENCHMARK(BM_PresetRun)->Unit(benchmark::kMillisecond);

void BM_EngineStep(benchmark::State& state) {
  ScenarioConfig cfg = kundur_preset(2);
  cfg.duration_s = 30.0;
  const auto sc = generate(cfg);
  EngineConfig ec;
  ec.convergence.var_rel_tol = 1e-300;
  ec.convergence.max_window_s = 1e9;
  for (auto _ : state) {
    CoherencyEngine eng(11, ec);
    for (const auto& f : sc.frames) benchmark::DoNotOptimize(eng.step(f));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sc.frames.size()));
}
BENCHMARK(BM_EngineStep)->Unit(benchmark::kMillisecond);

void BM_ProximityBatch(benchmark::State& state) {
  const auto x = random_points(static_cast<std::size_t>(state.range(0)),
                               static_cast<std::size_t>(state.range(1)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(cumulative_proximity_batch(batch_distance_state(x)));
}
BENCHMARK(BM_ProximityBatch)->Args({11, 120})->Args({11, 1200})->Args({64, 1200});

void BM_ProximityRecursive(benchmark::State& state) {
  const auto x = random_points(static_cast<std::size_t>(state.range(0)),
                               static_cast<std::size_t>(state.range(1)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(batch_running_moments(x).proximities());
}
BENCHMARK(BM_ProximityRecursive)->Args({11, 120})->Args({11, 1200})->Args({64, 1200});

void BM_AddSample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_points(1, n, 4).front();
  DistanceState d(n);
  RunningMoments m(n);
  for (auto _ : state) {
    d.add_sample(x);
    m.add_sample(x);
  }
}
BENCHMARK(BM_AddSample)->Arg(11)->Arg(64);

void BM_ClusterBuses(benchmark::State& state) {
  const auto x = random_points(static_cast<std::size_t>(state.range(0)), 60, 5);
  const auto d2 = batch_distance_state(x);
  const auto props = tda_properties(cumulative_proximity_batch(d2));
  for (auto _ : state) benchmark::DoNotOptimize(cluster_buses(props, d2));
}
BENCHMARK(BM_ClusterBuses)->Arg(11)->Arg(32)->Arg(64);

}  // namespace
BENCHMARK_MAIN();
