// Copyright 2026 The FeedSign Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// OpenMP kernels against their serial references.
//   feedsign_bench --benchmark_filter=Dot

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "feedsign/kernels.h"
#include "feedsign/prng.h"

namespace feedsign {
namespace {

std::vector<double> Filled(std::size_t n, std::uint64_t seed) {
  DirectionStream s(Seed{seed}, StreamDomain::kAnalysis);
  return GaussianDirection(s, n);
}

// range(0): vector length, range(1): OpenMP threads (ignored by reference).
void SetThreads(const benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(1)));
}

template <void (*Fn)(std::span<double>, Seed, double)>
void BM_AddScaledGaussian(benchmark::State& state) {
  SetThreads(state);
  std::vector<double> x = Filled(state.range(0), 1);
  for (auto _ : state) {
    Fn(x, Seed{7}, 1e-3);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <double (*Fn)(std::span<const double>, Seed)>
void BM_GaussianDot(benchmark::State& state) {
  SetThreads(state);
  const std::vector<double> g = Filled(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(g, Seed{7}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <double (*Fn)(std::span<const double>, std::span<const double>)>
void BM_Dot(benchmark::State& state) {
  SetThreads(state);
  const std::vector<double> a = Filled(state.range(0), 3), b = Filled(state.range(0), 4);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <double (*Fn)(std::span<const double>, std::span<const double>,
                       std::span<const double>)>
void BM_WeightedSquaredDistance(benchmark::State& state) {
  SetThreads(state);
  const std::vector<double> w = Filled(state.range(0), 5), x = Filled(state.range(0), 6),
                            c = Filled(state.range(0), 7);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(w, x, c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void Sizes(benchmark::internal::Benchmark* b) {
  const int max_threads = omp_get_num_procs();
  for (long n : {1L << 10, 1L << 16, 1L << 20}) {
    for (int t = 1; t <= max_threads; t *= 2) b->Args({n, t});
  }
}

void SerialSizes(benchmark::internal::Benchmark* b) {
  for (long n : {1L << 10, 1L << 16, 1L << 20}) b->Args({n, 1});
}

BENCHMARK(BM_AddScaledGaussian<kernels::AddScaledGaussian>)->Apply(Sizes);
BENCHMARK(BM_AddScaledGaussian<kernels::reference::AddScaledGaussian>)->Apply(SerialSizes);
BENCHMARK(BM_GaussianDot<kernels::GaussianDot>)->Apply(Sizes);
BENCHMARK(BM_GaussianDot<kernels::reference::GaussianDot>)->Apply(SerialSizes);
BENCHMARK(BM_Dot<kernels::Dot>)->Apply(Sizes);
BENCHMARK(BM_Dot<kernels::reference::Dot>)->Apply(SerialSizes);
BENCHMARK(BM_WeightedSquaredDistance<kernels::WeightedSquaredDistance>)->Apply(Sizes);
BENCHMARK(BM_WeightedSquaredDistance<kernels::reference::WeightedSquaredDistance>)
    ->Apply(SerialSizes);

}  // namespace
}  // namespace feedsign

BENCHMARK_MAIN();
