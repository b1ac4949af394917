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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "feedsign/errors.h"
#include "feedsign/kernels.h"

namespace feedsign {
namespace {

ParamVector Random(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  DirectionStream s(Seed{seed}, StreamDomain::kAnalysis);
  ParamVector v = GaussianDirection(s, n);
  for (double& x : v) x *= scale;
  return v;
}

Dataset Featureless() {
  Dataset d;
  d.rows = 1;
  d.labels = {0};
  return d;
}

TEST(SpsaTest, ExactOnQuadratics) {
  const std::size_t d = 64;
  const Quadratic q{SpikedSpectrum(d, 4, 10.0, 1.0), Random(d, 1), false};
  const Dataset data = Featureless();
  const auto rows = AllRows(data);
  for (std::uint64_t s = 0; s < 50; ++s) {
    ParamVector w = Random(d, 1000 + s);
    const ParamVector before = w;
    const Projection p = SpsaProjection(q, w, data, rows, Seed{s}, 1e-3);
    const double exact = kernels::GaussianDot(Grad(q, w, data, rows), Seed{s});
    EXPECT_LT(std::abs(p.value() - exact), 1e-10 * std::abs(exact)) << "seed " << s;
    EXPECT_EQ(w, before);
  }
}

TEST(SpsaTest, RichardsonOnLogistic) {
  const Dataset data = MakeGaussianBlobs(200, 6, 2, 2.0, Seed{3});
  const Logistic l{6};
  const auto rows = AllRows(data);
  ParamVector w = Random(7, 4, 0.8);
  const double exact = kernels::GaussianDot(Grad(l, w, data, rows), Seed{11});
  const double e1 = std::abs(SpsaProjection(l, w, data, rows, Seed{11}, 1e-1).value() - exact);
  const double e2 = std::abs(SpsaProjection(l, w, data, rows, Seed{11}, 1e-2).value() - exact);
  EXPECT_GT(e1 / e2, 50.0) << e1 << " " << e2;
}

TEST(SpsaTest, RestoresParamsWhenLossIsNotFinite) {
  // Logistic loss overflows to inf with enormous weights only through the
  // bias path; use a quadratic with an infinite eigenvalue instead.
  const Quadratic q{{std::numeric_limits<double>::infinity(), 1.0}, {0.0, 0.0}, false};
  const Dataset data = Featureless();
  ParamVector w = {0.5, 0.5};
  const ParamVector before = w;
  try {
    SpsaProjection(q, w, data, AllRows(data), Seed{1}, 1e-3);
    FAIL() << "expected EstimationError";
  } catch (const EstimationError& e) {
    EXPECT_FALSE(std::isfinite(e.value()));
  }
  EXPECT_EQ(w, before);
}

TEST(SpsaTest, RejectsNonPositiveMu) {
  const Quadratic q{{1.0}, {0.0}, false};
  const Dataset data = Featureless();
  ParamVector w = {1.0};
  EXPECT_THROW(SpsaProjection(q, w, data, AllRows(data), Seed{1}, 0.0), EstimationError);
  EXPECT_THROW(SpsaProjection(q, w, data, AllRows(data), Seed{1}, -1.0), EstimationError);
}

TEST(ProjectionTest, RejectsNonFiniteValues) {
  EXPECT_THROW(Projection(std::nan(""), Seed{1}, 0), EstimationError);
  EXPECT_THROW(Projection(std::numeric_limits<double>::infinity(), Seed{1}, 0), EstimationError);
  EXPECT_NO_THROW(Projection(1.0, Seed{1}, 0));
}

TEST(SignTest, Values) {
  EXPECT_EQ(SignOf(0.5), Sign::kPlus);
  EXPECT_EQ(SignOf(-3.2), Sign::kMinus);
  EXPECT_EQ(SignOf(0.0), Sign::kPlus);
  EXPECT_EQ(SignOf(-0.0), Sign::kPlus);
  EXPECT_THROW(SignOf(std::nan("")), EstimationError);
}

TEST(ZoGradientEstimateTest, ScalingIdentities) {
  const ParamVector zero = ZoGradientEstimate(Projection(0.0, Seed{3}, 0), 9);
  for (double v : zero) EXPECT_EQ(v, 0.0);

  DirectionStream s = MakeStream(Seed{3});
  const ParamVector z = GaussianDirection(s, 9);
  EXPECT_EQ(ZoGradientEstimate(Projection(1.0, Seed{3}, 0), 9), z);

  const ParamVector g = ZoGradientEstimate(Projection(-2.5, Seed{3}, 0), 9);
  double ng = 0.0, nz = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    ng += g[i] * g[i];
    nz += z[i] * z[i];
  }
  EXPECT_NEAR(std::sqrt(ng), 2.5 * std::sqrt(nz), 1e-12);
}

TEST(ZoGradientEstimateTest, UnbiasedOverDirections) {
  const std::size_t d = 5, n = 100000;
  const Quadratic q{{1.0, 2.0, 3.0, 0.5, 1.5}, {0.1, -0.2, 0.3, 0.0, 1.0}, false};
  const Dataset data = Featureless();
  const ParamVector w = {1.0, 0.5, -0.5, 2.0, 0.0};
  const ParamVector g = Grad(q, w, data, AllRows(data));
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  for (std::uint64_t s = 0; s < n; ++s) {
    const double p = kernels::GaussianDot(g, Seed{s});
    const ParamVector est = ZoGradientEstimate(Projection(p, Seed{s}, 0), d);
    for (std::size_t i = 0; i < d; ++i) {
      sum[i] += est[i];
      sq[i] += est[i] * est[i];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double mean = sum[i] / n;
    const double se = std::sqrt((sq[i] / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean - g[i]), 3.0 * se) << "coordinate " << i;
  }
}

}  // namespace
}  // namespace feedsign
