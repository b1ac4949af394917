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

#ifndef FEEDSIGN_ZO_H_
#define FEEDSIGN_ZO_H_

#include <cstddef>
#include <cstdint>
#include <span>

#include "feedsign/models.h"
#include "feedsign/prng.h"

namespace feedsign {

inline constexpr double kDefaultMu = 1e-3;

// A client's scalar gradient projection p ~ z^T grad L for the direction
// generated by `seed`.
class Projection {
 public:
  // Throws EstimationError if `value` is NaN or infinite.
  Projection(double value, Seed seed, std::size_t client);

  double value() const { return value_; }
  Seed seed() const { return seed_; }
  std::size_t client() const { return client_; }

 private:
  double value_;
  Seed seed_;
  std::size_t client_;
};

enum class Sign : std::int8_t { kMinus = -1, kPlus = 1 };

inline int ToInt(Sign s) { return static_cast<int>(s); }

// +1 for x >= 0 (zero maps to +1), -1 otherwise. NaN throws.
Sign SignOf(double x);

// Two-point SPSA estimate [L(w + mu z) - L(w - mu z)] / (2 mu).
//
// Walks params in place: +mu z, evaluate, -2 mu z, evaluate. The final reset
// copies back a snapshot taken on entry, since x + a - 2a + a is not always
// x in floating point; params are bit-identical to their entry state on
// return, including when an exception is thrown.
Projection SpsaProjection(const ModelSpec& spec, std::span<double> params,
                          const Dataset& data, Batch batch, Seed seed,
                          double mu, std::size_t client = 0);

// p * z with z regenerated from p.seed().
ParamVector ZoGradientEstimate(const Projection& p, std::size_t dim);

}  // namespace feedsign

#endif  // FEEDSIGN_ZO_H_
