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

#ifndef FEEDSIGN_KERNELS_H_
#define FEEDSIGN_KERNELS_H_

// Data-parallel inner loops over parameter vectors.
//
// The OpenMP kernels in `feedsign::kernels` are what the simulator runs.
// Reductions are split into fixed chunks of kChunk entries; each chunk is
// summed left to right and the chunk partials are then summed in chunk
// order. The result is therefore bit-identical for any thread count.
//
// `feedsign::kernels::reference` holds plain serial loops kept for tests
// and the benchmark. Elementwise kernels match the parallel ones bit for
// bit; reductions agree up to summation-order rounding.

#include <cstddef>
#include <span>

#include "feedsign/prng.h"

namespace feedsign::kernels {

inline constexpr std::size_t kChunk = 2048;

// x[i] += scale * z[i], z the direction stream of `seed`.
void AddScaledGaussian(std::span<double> x, Seed seed, double scale);

// sum_i z[i] * g[i] for the direction stream of `seed`.
double GaussianDot(std::span<const double> g, Seed seed);

double Dot(std::span<const double> a, std::span<const double> b);

// sum_i weights[i] * (x[i] - center[i])^2, compensated: each term is formed
// with error-free transforms and accumulated as a double-double, so SPSA
// differences of quadratic losses are not swamped by summation rounding.
double WeightedSquaredDistance(std::span<const double> weights,
                               std::span<const double> x,
                               std::span<const double> center);

// Ordered sum of precomputed terms (chunked as above).
double Sum(std::span<const double> terms);

int MaxThreads();

namespace reference {

void AddScaledGaussian(std::span<double> x, Seed seed, double scale);
double GaussianDot(std::span<const double> g, Seed seed);
double Dot(std::span<const double> a, std::span<const double> b);
double WeightedSquaredDistance(std::span<const double> weights,
                               std::span<const double> x,
                               std::span<const double> center);
double Sum(std::span<const double> terms);

}  // namespace reference
}  // namespace feedsign::kernels

#endif  // FEEDSIGN_KERNELS_H_
