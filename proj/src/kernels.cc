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

#include "feedsign/kernels.h"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace feedsign::kernels {
namespace {

// Below this many chunks the fork/join costs more than it saves.
constexpr std::size_t kMinParallelChunks = 2;

inline std::size_t ChunkCount(std::size_t n) {
  return (n + kChunk - 1) / kChunk;
}

// Applies `chunk_sum(begin, end)` to every chunk and adds the partials in
// chunk order.
template <typename ChunkFn>
double ChunkedReduce(std::size_t n, ChunkFn chunk_sum) {
  const std::size_t chunks = ChunkCount(n);
  if (chunks == 0) return 0.0;
  if (chunks == 1) return chunk_sum(0, n);
  std::vector<double> partial(chunks);
  const auto count = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static) if (chunks >= kMinParallelChunks)
  for (std::ptrdiff_t c = 0; c < count; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    partial[c] = chunk_sum(begin, std::min(n, begin + kChunk));
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

// Error-free transforms in plain double arithmetic (no fma, so results do
// not depend on the target's FMA support).
struct Pair {
  double hi = 0.0;
  double lo = 0.0;
};

inline Pair TwoSum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

// Veltkamp split for Dekker's product.
inline Pair Split(double a) {
  const double t = 134217729.0 * a;  // 2^27 + 1
  const double hi = t - (t - a);
  return {hi, a - hi};
}

inline Pair TwoProduct(double a, double b) {
  const double p = a * b;
  const Pair x = Split(a), y = Split(b);
  return {p, ((x.hi * y.hi - p) + x.hi * y.lo + x.lo * y.hi) + x.lo * y.lo};
}

// Adds w (x - c)^2 to the compensated accumulator.
inline void AccumulateWeightedSquare(Pair& acc, double w, double x, double c) {
  const Pair e = TwoSum(x, -c);
  const Pair sq = TwoProduct(e.hi, e.hi);
  const double sq_lo = sq.lo + 2.0 * e.hi * e.lo;
  const Pair term = TwoProduct(w, sq.hi);
  const Pair s = TwoSum(acc.hi, term.hi);
  acc.hi = s.hi;
  acc.lo += s.lo + term.lo + w * sq_lo;
}

inline void AddPair(Pair& acc, Pair v) {
  const Pair s = TwoSum(acc.hi, v.hi);
  acc.hi = s.hi;
  acc.lo += s.lo + v.lo;
}

}  // namespace

void AddScaledGaussian(std::span<double> x, Seed seed, double scale) {
  if (scale == 0.0) return;
  const std::size_t n = x.size();
  const std::size_t chunks = ChunkCount(n);
  const auto count = static_cast<std::ptrdiff_t>(chunks);
  // kChunk is a multiple of 4, so every chunk starts on a block boundary.
#pragma omp parallel for schedule(static) if (chunks >= kMinParallelChunks)
  for (std::ptrdiff_t c = 0; c < count; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(n, begin + kChunk);
    for (std::size_t i = begin; i < end; i += 4) {
      const auto z = GaussianBlock(seed, StreamDomain::kDirection, i / 4);
      const std::size_t lanes = std::min<std::size_t>(4, end - i);
      for (std::size_t j = 0; j < lanes; ++j) x[i + j] += scale * z[j];
    }
  }
}

double GaussianDot(std::span<const double> g, Seed seed) {
  return ChunkedReduce(g.size(), [&](std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; i += 4) {
      const auto z = GaussianBlock(seed, StreamDomain::kDirection, i / 4);
      const std::size_t lanes = std::min<std::size_t>(4, end - i);
      for (std::size_t j = 0; j < lanes; ++j) s += z[j] * g[i + j];
    }
    return s;
  });
}

double Dot(std::span<const double> a, std::span<const double> b) {
  return ChunkedReduce(a.size(), [&](std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += a[i] * b[i];
    return s;
  });
}

double WeightedSquaredDistance(std::span<const double> weights,
                               std::span<const double> x,
                               std::span<const double> center) {
  const std::size_t n = x.size();
  const std::size_t chunks = ChunkCount(n);
  std::vector<Pair> partial(chunks);
  const auto count = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static) if (chunks >= kMinParallelChunks)
  for (std::ptrdiff_t c = 0; c < count; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(n, begin + kChunk);
    Pair acc;
    for (std::size_t i = begin; i < end; ++i) {
      AccumulateWeightedSquare(acc, weights[i], x[i], center[i]);
    }
    partial[c] = acc;
  }
  Pair total;
  for (const Pair& p : partial) AddPair(total, p);
  return total.hi + total.lo;
}

double Sum(std::span<const double> terms) {
  return ChunkedReduce(terms.size(), [&](std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += terms[i];
    return s;
  });
}

int MaxThreads() { return omp_get_max_threads(); }

namespace reference {

void AddScaledGaussian(std::span<double> x, Seed seed, double scale) {
  if (scale == 0.0) return;
  DirectionStream stream(seed);
  for (double& v : x) v += scale * stream.NextGaussian();
}

double GaussianDot(std::span<const double> g, Seed seed) {
  DirectionStream stream(seed);
  double s = 0.0;
  for (double v : g) s += stream.NextGaussian() * v;
  return s;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double WeightedSquaredDistance(std::span<const double> weights,
                               std::span<const double> x,
                               std::span<const double> center) {
  Pair acc;
  for (std::size_t i = 0; i < x.size(); ++i) {
    AccumulateWeightedSquare(acc, weights[i], x[i], center[i]);
  }
  return acc.hi + acc.lo;
}

double Sum(std::span<const double> terms) {
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

}  // namespace reference
}  // namespace feedsign::kernels
