// Serial references against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "wncs/capacity_idle.hpp"
#include "wncs/capacity_mdp.hpp"
#include "wncs/lp.hpp"
#include "wncs/model.hpp"
#include "wncs/simulator.hpp"

using namespace wncs;

namespace {

struct SweepInstance {
  std::vector<double> targets, channel;
  int h = 10;
};

SweepInstance sweep_instance(int n) {
  std::mt19937_64 rng(static_cast<unsigned>(n));
  std::uniform_real_distribution<double> p(0.5, 1.0), r(0.0, 0.05);
  SweepInstance s;
  for (int i = 0; i < n; ++i) {
    s.channel.push_back(p(rng));
    s.targets.push_back(r(rng));
  }
  return s;
}

void BM_SubsetSweepSerial(benchmark::State& state) {
  const auto s = sweep_instance(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(idle_region_slack_serial(s.targets, s.channel, s.h));
  state.SetComplexityN(state.range(0));
}

void BM_SubsetSweepParallel(benchmark::State& state) {
  const auto s = sweep_instance(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(idle_region_slack(s.targets, s.channel, s.h));
  state.SetComplexityN(state.range(0));
}

CapacityLp capacity_instance(int n, int h) {
  SystemConfig c;
  for (int i = 0; i < n; ++i) {
    c.plants.push_back({1.0, 1.0});
    c.channel.push_back(0.6 + 0.05 * i);
  }
  c.sampling_periods.assign(n, h);
  c.slot_length = 0.01;
  const std::vector<double> targets(n, 0.9 * h / (2.0 * n));
  return build_capacity_lp(build_mdp(c), targets);
}

void run_simplex(benchmark::State& state, bool parallel) {
  const auto lp = capacity_instance(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(lp::solve(lp.problem, {.parallel = parallel}));
  state.counters["vars"] = static_cast<double>(lp.problem.num_vars);
}

void BM_SimplexSerial(benchmark::State& state) { run_simplex(state, false); }
void BM_SimplexParallel(benchmark::State& state) { run_simplex(state, true); }

void run_simulate(benchmark::State& state, bool parallel) {
  const auto cfg = load_config(WNCS_FIXTURE_DIR "/general.json");
  const auto design = *synthesize(cfg).design;
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate(cfg, design, 200, static_cast<int>(state.range(0)), 1, {.parallel = parallel}));
}

void BM_SimulateSerial(benchmark::State& state) { run_simulate(state, false); }
void BM_SimulateParallel(benchmark::State& state) { run_simulate(state, true); }

}  // namespace

BENCHMARK(BM_SubsetSweepSerial)->DenseRange(12, 18, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SubsetSweepParallel)->DenseRange(12, 18, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimplexSerial)->Args({4, 4})->Args({5, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimplexParallel)->Args({4, 4})->Args({5, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateSerial)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateParallel)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
