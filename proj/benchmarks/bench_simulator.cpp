#include <benchmark/benchmark.h>

#include "delaymatch/learners.hpp"
#include "delaymatch/simulator.hpp"

namespace {

void bm_pure_episode(benchmark::State& state) {
  delaymatch::EnvironmentConfig env;
  env.passengers.rate_per_interval = static_cast<double>(state.range(0));
  env.drivers.rate_per_interval = static_cast<double>(state.range(0));
  delaymatch::PureOptimizationPolicy policy;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    delaymatch::WorldState world(env, ++seed);
    benchmark::DoNotOptimize(delaymatch::run_episode(world, policy));
  }
}
BENCHMARK(bm_pure_episode)->DenseRange(1, 3);

}  // namespace
