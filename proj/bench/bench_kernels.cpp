// Parallel kernels against the serial reference, on the shapes the MNIST
// model actually runs (batch 100, 784 -> 200 -> 50 -> 200 -> 200 -> 784).
#include <benchmark/benchmark.h>

#include "dvae/kernels.hpp"
#include "dvae/rng.hpp"

namespace {

dvae::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  dvae::Rng rng(seed);
  dvae::Matrix m(r, c);
  rng.fill_normal(m.flat());
  return m;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto m = static_cast<std::size_t>(state.range(2));
  auto a = random_matrix(n, k, 1);
  auto b = random_matrix(k, m, 2);
  dvae::Matrix c;
  for (auto _ : state) {
    if constexpr (Parallel)
      dvae::kernels::matmul(a, b, c);
    else
      dvae::kernels::reference::matmul(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * n * k * m, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

template <bool Parallel>
void BM_MatmulTN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto m = static_cast<std::size_t>(state.range(2));
  auto a = random_matrix(n, k, 3);
  auto b = random_matrix(n, m, 4);
  dvae::Matrix c;
  for (auto _ : state) {
    if constexpr (Parallel)
      dvae::kernels::matmul_tn(a, b, c);
    else
      dvae::kernels::reference::matmul_tn(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * n * k * m, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

void model_shapes(benchmark::internal::Benchmark* b) {
  b->Args({100, 784, 200})->Args({100, 200, 200})->Args({100, 200, 784})->Args({500, 784, 200});
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Apply(model_shapes);
BENCHMARK(BM_Matmul<true>)->Apply(model_shapes);
BENCHMARK(BM_MatmulTN<false>)->Apply(model_shapes);
BENCHMARK(BM_MatmulTN<true>)->Apply(model_shapes);

BENCHMARK_MAIN();
