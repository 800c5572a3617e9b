// OpenMP kernels against the serial paths and the explicit-matrix reference.
// Args: {M, d}.
#include <benchmark/benchmark.h>

#include "mamlode/datagen.hpp"
#include "mamlode/meta_grad.hpp"

using namespace mamlode;

namespace {

TaskPool make_pool(const benchmark::State& state) {
  RegressionSuiteSpec spec;
  spec.M = static_cast<std::size_t>(state.range(0));
  spec.d = static_cast<std::size_t>(state.range(1));
  spec.n = 2 * spec.d;
  return gen_regression_suite(spec);
}

Vector probe(std::size_t d) { return Vector::Constant(static_cast<Eigen::Index>(d), 0.3); }

template <Exec E>
void BM_maml_grad(benchmark::State& state) {
  const TaskPool pool = make_pool(state);
  const Vector w = probe(pool.dim());
  for (auto _ : state) benchmark::DoNotOptimize(maml_grad(pool, 0.01, w, E));
}

void BM_maml_grad_reference(benchmark::State& state) {
  const TaskPool pool = make_pool(state);
  const Vector w = probe(pool.dim());
  for (auto _ : state) benchmark::DoNotOptimize(reference::maml_grad(pool, 0.01, w));
}

template <Exec E>
void BM_maml_loss(benchmark::State& state) {
  const TaskPool pool = make_pool(state);
  const Vector w = probe(pool.dim());
  for (auto _ : state) benchmark::DoNotOptimize(maml_loss(pool, 0.01, w, E));
}

void BM_maml_loss_reference(benchmark::State& state) {
  const TaskPool pool = make_pool(state);
  const Vector w = probe(pool.dim());
  for (auto _ : state) benchmark::DoNotOptimize(reference::maml_loss(pool, 0.01, w));
}

template <Exec E>
void BM_expected_grad(benchmark::State& state) {
  const TaskPool pool = make_pool(state);
  const Vector w = probe(pool.dim());
  for (auto _ : state) benchmark::DoNotOptimize(expected_grad(pool, w, E));
}

void BM_expected_grad_reference(benchmark::State& state) {
  const TaskPool pool = make_pool(state);
  const Vector w = probe(pool.dim());
  for (auto _ : state) benchmark::DoNotOptimize(reference::expected_grad(pool, w));
}

void sizes(benchmark::internal::Benchmark* b) {
  b->Args({10, 20})->Args({50, 20})->Args({50, 100})->Args({200, 50});
}

}  // namespace

BENCHMARK(BM_maml_grad<Exec::parallel>)->Apply(sizes);
BENCHMARK(BM_maml_grad<Exec::serial>)->Apply(sizes);
BENCHMARK(BM_maml_grad_reference)->Apply(sizes);
BENCHMARK(BM_maml_loss<Exec::parallel>)->Apply(sizes);
BENCHMARK(BM_maml_loss<Exec::serial>)->Apply(sizes);
BENCHMARK(BM_maml_loss_reference)->Apply(sizes);
BENCHMARK(BM_expected_grad<Exec::parallel>)->Apply(sizes);
BENCHMARK(BM_expected_grad<Exec::serial>)->Apply(sizes);
BENCHMARK(BM_expected_grad_reference)->Apply(sizes);

BENCHMARK_MAIN();
