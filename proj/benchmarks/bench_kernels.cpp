#include <benchmark/benchmark.h>

#include "deconvo/kernels.hpp"
#include "deconvo/model.hpp"
#include "deconvo/rng.hpp"
#include "deconvo/solver.hpp"

using namespace deconvo;

namespace {

struct Fixture {
  SubspaceModel model;
  Matrix X;
  Vector z;
};

Fixture fixture(Eigen::Index L, Eigen::Index K) {
  Rng rng(5);
  SubspaceModel model = build_model(L, K, K, BType::IdentityColumns, 4);
  Matrix X = rng.complex_gaussian_matrix(K, K);
  Vector z = rng.complex_gaussian(L);
  return {std::move(model), std::move(X), std::move(z)};
}

void args(benchmark::internal::Benchmark* b) {
  b->Args({512, 16})->Args({2048, 16})->Args({4096, 32});
}

void BM_ForwardSerial(benchmark::State& state) {
  const Fixture f = fixture(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::forward_serial(f.model.b_rows(), f.model.c_rows(), f.X));
}

void BM_ForwardParallel(benchmark::State& state) {
  const Fixture f = fixture(state.range(0), state.range(1));
  for (auto _ : state)
    benchmark::DoNotOptimize(kernels::forward_parallel(f.model.b_rows(), f.model.c_rows(), f.X));
}

void BM_AdjointSerial(benchmark::State& state) {
  const Fixture f = fixture(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::adjoint_serial(f.model.b_rows(), f.model.c_rows(), f.z));
}

void BM_AdjointParallel(benchmark::State& state) {
  const Fixture f = fixture(state.range(0), state.range(1));
  for (auto _ : state)
    benchmark::DoNotOptimize(kernels::adjoint_parallel(f.model.b_rows(), f.model.c_rows(), f.z));
}

void BM_NoiselessSolve(benchmark::State& state) {
  const Fixture f = fixture(512, 16);
  Rng rng(6);
  const GroundTruth truth = GroundTruth::random(16, 16, 1.0, rng);
  const Vector y = apply_A(f.model, truth.X0());
  const SolveOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(solve_noiseless(f.model, y, opts).iterations);
}

}  // namespace

BENCHMARK(BM_ForwardSerial)->Apply(args);
BENCHMARK(BM_ForwardParallel)->Apply(args);
BENCHMARK(BM_AdjointSerial)->Apply(args);
BENCHMARK(BM_AdjointParallel)->Apply(args);
BENCHMARK(BM_NoiselessSolve)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
