#include <benchmark/benchmark.h>

#include <random>

#include "delaymatch/matcher.hpp"

namespace {

delaymatch::CostMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cost(0.0, 1000.0);
  delaymatch::CostMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = cost(rng);
  return m;
}

void bm_solve_square(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = random_matrix(n, n, 42);
  for (auto _ : state) benchmark::DoNotOptimize(delaymatch::solve_assignment(m));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(bm_solve_square)->RangeMultiplier(2)->Range(4, 256)->Complexity();

void bm_solve_rectangular(benchmark::State& state) {
  const auto m = random_matrix(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(delaymatch::solve_assignment(m));
}
BENCHMARK(bm_solve_rectangular)->Args({10, 60})->Args({60, 10})->Args({30, 90});

void bm_brute_force(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = random_matrix(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(delaymatch::brute_force_assignment(m));
}
BENCHMARK(bm_brute_force)->DenseRange(3, 7);

}  // namespace
