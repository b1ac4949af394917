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

#include "feedsign/zo.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "feedsign/errors.h"

namespace feedsign {
namespace {

// Restores the snapshot when it goes out of scope.
class RestoreGuard {
 public:
  explicit RestoreGuard(std::span<double> params)
      : params_(params), snapshot_(params.begin(), params.end()) {}
  ~RestoreGuard() { std::copy(snapshot_.begin(), snapshot_.end(), params_.begin()); }

  RestoreGuard(const RestoreGuard&) = delete;
  RestoreGuard& operator=(const RestoreGuard&) = delete;

 private:
  std::span<double> params_;
  ParamVector snapshot_;
};

double CheckedLoss(const ModelSpec& spec, std::span<const double> params,
                   const Dataset& data, Batch batch, const char* side) {
  const double v = Loss(spec, params, data, batch);
  if (!std::isfinite(v)) {
    throw EstimationError(std::string("non-finite loss at w ") + side +
                              " mu z: " + std::to_string(v),
                          v);
  }
  return v;
}

}  // namespace

Projection::Projection(double value, Seed seed, std::size_t client)
    : value_(value), seed_(seed), client_(client) {
  if (!std::isfinite(value)) {
    throw EstimationError("projection must be finite, got " + std::to_string(value),
                          value);
  }
}

Sign SignOf(double x) {
  if (std::isnan(x)) throw EstimationError("sign of NaN", x);
  return x < 0 ? Sign::kMinus : Sign::kPlus;
}

Projection SpsaProjection(const ModelSpec& spec, std::span<double> params,
                          const Dataset& data, Batch batch, Seed seed,
                          double mu, std::size_t client) {
  if (!(mu > 0)) throw EstimationError("mu must be positive", mu);
  double plus = 0.0, minus = 0.0;
  {
    RestoreGuard guard(params);
    PerturbInPlace(params, seed, mu);
    plus = CheckedLoss(spec, params, data, batch, "+");
    PerturbInPlace(params, seed, -2.0 * mu);
    minus = CheckedLoss(spec, params, data, batch, "-");
  }
  return Projection((plus - minus) / (2.0 * mu), seed, client);
}

ParamVector ZoGradientEstimate(const Projection& p, std::size_t dim) {
  DirectionStream stream = MakeStream(p.seed());
  ParamVector g = GaussianDirection(stream, dim);
  for (double& v : g) v *= p.value();
  return g;
}

}  // namespace feedsign
