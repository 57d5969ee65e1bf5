// Serial reference vs OpenMP kernels. Range arguments: problem size, threads.
#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "mcae/kernels.hpp"

using namespace mcae::kernels;

namespace {

std::vector<std::uint8_t> labels(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> out(n);
  for (auto& v : out) v = static_cast<std::uint8_t>(rng() % 8);
  return out;
}

std::vector<float> unit_rows(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  std::vector<float> out(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0;
    for (std::size_t k = 0; k < dim; ++k) norm += std::pow(out[i * dim + k] = g(rng), 2);
    for (std::size_t k = 0; k < dim; ++k) out[i * dim + k] = static_cast<float>(out[i * dim + k] / std::sqrt(norm));
  }
  return out;
}

template <bool Omp>
void BM_ConfusionTally(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  set_thread_count(static_cast<int>(state.range(1)));
  const auto t = labels(n, 1), p = labels(n, 2);
  for (auto _ : state) {
    auto cm = Omp ? omp::confusion_tally(t, p, 8) : serial::confusion_tally(t, p, 8);
    benchmark::DoNotOptimize(cm.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

template <bool Omp>
void BM_EpsNeighbors(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  set_thread_count(static_cast<int>(state.range(1)));
  const auto data = unit_rows(n, 16, 3);
  const MatrixView m{data.data(), n, 16};
  for (auto _ : state) {
    auto nb = Omp ? omp::eps_neighbors(m, 0.15) : serial::eps_neighbors(m, 0.15);
    benchmark::DoNotOptimize(nb.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n));
}

template <bool Omp>
void BM_GroupSums(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  set_thread_count(static_cast<int>(state.range(1)));
  const auto data = unit_rows(n, 64, 4);
  std::vector<std::uint32_t> group(n);
  for (std::size_t i = 0; i < n; ++i) group[i] = static_cast<std::uint32_t>(i % 100);
  const MatrixView m{data.data(), n, 64};
  std::vector<double> sums;
  std::vector<std::uint64_t> counts;
  for (auto _ : state) {
    if (Omp)
      omp::group_sums(m, group, 100, sums, counts);
    else
      serial::group_sums(m, group, 100, sums, counts);
    benchmark::DoNotOptimize(sums.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void sizes(benchmark::internal::Benchmark* b, std::int64_t lo, std::int64_t hi) {
  for (auto n = lo; n <= hi; n *= 4)
    for (std::int64_t t : {1, 2, 4}) b->Args({n, t});
}

}  // namespace

BENCHMARK(BM_ConfusionTally<false>)->Apply([](auto* b) { sizes(b, 1 << 16, 1 << 22); });
BENCHMARK(BM_ConfusionTally<true>)->Apply([](auto* b) { sizes(b, 1 << 16, 1 << 22); });
BENCHMARK(BM_EpsNeighbors<false>)->Apply([](auto* b) { sizes(b, 256, 4096); });
BENCHMARK(BM_EpsNeighbors<true>)->Apply([](auto* b) { sizes(b, 256, 4096); });
BENCHMARK(BM_GroupSums<false>)->Apply([](auto* b) { sizes(b, 1 << 12, 1 << 18); });
BENCHMARK(BM_GroupSums<true>)->Apply([](auto* b) { sizes(b, 1 << 12, 1 << 18); });

BENCHMARK_MAIN();
