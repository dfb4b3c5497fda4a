// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "aoirelay/harness.hpp"
#include "aoirelay/neuralnet.hpp"
#include "aoirelay/oracle.hpp"
#include "aoirelay/replay.hpp"

using namespace aoirelay;

namespace {

const QuantizedMdp& mdp_k2() {
  static const QuantizedMdp m = [] {
    SimParams p;
    p.num_relays = 2;
    p.energy_buffer_max = 1;
    p.aoi_max = 8;
    return QuantizedMdp::build(p);
  }();
  return m;
}

void BM_RviSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(relative_value_iteration_serial(mdp_k2()).gain);
  state.counters["states"] = static_cast<double>(mdp_k2().state_count());
}
BENCHMARK(BM_RviSerial)->Unit(benchmark::kMillisecond);

void BM_RviParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(relative_value_iteration(mdp_k2()).gain);
}
BENCHMARK(BM_RviParallel)->Unit(benchmark::kMillisecond);

ExperimentConfig grid() {
  return parse_config(
      "policies = max-link, greedy, dbrs-variant, random\n"
      "seeds = 1-4\neval_slots = 20000\nsweep = relays\nsweep_values = 2, 3, 4, 5\n");
}

void BM_CompareSerial(benchmark::State& state) {
  const auto cfg = grid();
  for (auto _ : state) benchmark::DoNotOptimize(run_compare(cfg, {false}).size());
}
BENCHMARK(BM_CompareSerial)->Unit(benchmark::kMillisecond);

void BM_CompareParallel(benchmark::State& state) {
  const auto cfg = grid();
  for (auto _ : state) benchmark::DoNotOptimize(run_compare(cfg, {true}).size());
}
BENCHMARK(BM_CompareParallel)->Unit(benchmark::kMillisecond);

void BM_ReplaySample(benchmark::State& state) {
  const auto cap = static_cast<std::size_t>(state.range(0));
  PrioritizedReplay mem(cap, 0.6);
  Rng rng(1);
  for (std::size_t i = 0; i < cap; ++i) {
    mem.push(Transition{});
    mem.update_priority(i, rng.uniform(), 1e-4);
  }
  for (auto _ : state) benchmark::DoNotOptimize(mem.sample(32, 0.4, rng).indices.data());
}
BENCHMARK(BM_ReplaySample)->RangeMultiplier(8)->Range(1 << 7, 1 << 16);

void BM_Forward(benchmark::State& state) {
  Architecture a;
  a.input_dim = 5 * static_cast<std::size_t>(state.range(0)) + 1;
  a.hidden_dims = {80};
  a.output_dim = 2 * static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto p = init_network(a, rng);
  Workspace ws(a);
  std::vector<double> x(a.input_dim, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(ws.forward(p, x).data());
}
BENCHMARK(BM_Forward)->DenseRange(2, 5);

}  // namespace

BENCHMARK_MAIN();
