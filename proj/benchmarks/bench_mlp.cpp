#include <benchmark/benchmark.h>

#include "delaymatch/featurizer.hpp"
#include "delaymatch/mlp.hpp"

namespace {

using delaymatch::MatrixX;

delaymatch::MlpSpec default_spec() {
  delaymatch::MlpSpec spec;
  spec.input_dim = delaymatch::AgentStateVector::dimension(100);
  spec.output_dim = 2;
  return spec;
}

template <typename T>
void bm_forward(benchmark::State& state) {
  const auto spec = default_spec();
  delaymatch::Rng rng(1);
  const auto params = delaymatch::init_params(spec, rng).cast<T>();
  const MatrixX<T> x = MatrixX<T>::Random(state.range(0), spec.input_dim);
  for (auto _ : state) benchmark::DoNotOptimize(delaymatch::predict<T>(params, spec, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_forward<double>)->Arg(1)->Arg(32)->Arg(256);
BENCHMARK(bm_forward<float>)->Arg(1)->Arg(32)->Arg(256);

template <typename T>
void bm_forward_backward(benchmark::State& state) {
  const auto spec = default_spec();
  delaymatch::Rng rng(1);
  const auto params = delaymatch::init_params(spec, rng).cast<T>();
  const MatrixX<T> x = MatrixX<T>::Random(state.range(0), spec.input_dim);
  const MatrixX<T> g = MatrixX<T>::Random(state.range(0), spec.output_dim);
  for (auto _ : state) {
    const auto cache = delaymatch::forward<T>(params, spec, x);
    benchmark::DoNotOptimize(delaymatch::backward<T>(params, spec, cache, g));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_forward_backward<double>)->Arg(32)->Arg(256);
BENCHMARK(bm_forward_backward<float>)->Arg(32)->Arg(256);

template <typename T>
void bm_adam_step(benchmark::State& state) {
  const auto spec = default_spec();
  delaymatch::Rng rng(1);
  auto params = delaymatch::init_params(spec, rng).cast<T>();
  const auto grads = delaymatch::init_params(spec, rng, 1e-3).cast<T>();
  delaymatch::BasicAdamOptimizer<T> opt(spec, 1e-4);
  for (auto _ : state) benchmark::DoNotOptimize(delaymatch::apply_update<T>(params, grads, opt));
}
BENCHMARK(bm_adam_step<double>);
BENCHMARK(bm_adam_step<float>);

}  // namespace
