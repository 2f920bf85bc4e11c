// Parallel kernels against the serial reference on training-sized batches.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "frtrain/kernels.hpp"

namespace {

using frtrain::kernels::AffineShape;

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

struct Fixture {
  AffineShape shape;
  std::vector<double> in, weight, bias, out, grad_out, grad_w, grad_b, grad_in;

  Fixture(std::size_t rows, std::size_t in_dim, std::size_t out_dim)
      : shape{rows, in_dim, out_dim},
        in(noise(rows * in_dim, 1)),
        weight(noise(in_dim * out_dim, 2)),
        bias(noise(out_dim, 3)),
        out(rows * out_dim),
        grad_out(noise(rows * out_dim, 4)),
        grad_w(in_dim * out_dim),
        grad_b(out_dim),
        grad_in(rows * in_dim) {}
};

template <bool Parallel>
void BM_AffineForward(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), 5, 16);
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Parallel)
      frtrain::kernels::affine_forward(f.shape, f.in, f.weight, f.bias, f.out);
    else
      frtrain::kernels::serial::affine_forward(f.shape, f.in, f.weight, f.bias, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_AffineBackward(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), 5, 16);
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Parallel)
      frtrain::kernels::affine_backward(f.shape, f.in, f.grad_out, f.weight, f.grad_w, f.grad_b, f.grad_in);
    else
      frtrain::kernels::serial::affine_backward(f.shape, f.in, f.grad_out, f.weight, f.grad_w, f.grad_b, f.grad_in);
    benchmark::DoNotOptimize(f.grad_w.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Sum(benchmark::State& state) {
  const auto v = noise(static_cast<std::size_t>(state.range(0)), 5);
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    double s = Parallel ? frtrain::kernels::sum(v) : frtrain::kernels::serial::sum(v);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void sizes(benchmark::internal::Benchmark* b) {
  const int max_threads = omp_get_num_procs();
  for (int rows : {2000, 36000})
    for (int t = 1; t <= max_threads; t *= 2) b->Args({rows, t});
}

BENCHMARK(BM_AffineForward<false>)->Apply(sizes)->Name("affine_forward/serial");
BENCHMARK(BM_AffineForward<true>)->Apply(sizes)->Name("affine_forward/parallel");
BENCHMARK(BM_AffineBackward<false>)->Apply(sizes)->Name("affine_backward/serial");
BENCHMARK(BM_AffineBackward<true>)->Apply(sizes)->Name("affine_backward/parallel");
BENCHMARK(BM_Sum<false>)->Apply(sizes)->Name("sum/serial");
BENCHMARK(BM_Sum<true>)->Apply(sizes)->Name("sum/parallel");

}  // namespace

BENCHMARK_MAIN();
