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

#include "feedsign/models.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "feedsign/errors.h"

namespace feedsign {
namespace {

ParamVector Random(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  DirectionStream s(Seed{seed}, StreamDomain::kAnalysis);
  ParamVector v = GaussianDirection(s, n);
  for (double& x : v) x *= scale;
  return v;
}

Dataset OneRow(std::vector<double> x, int label, int classes) {
  Dataset d;
  d.rows = 1;
  d.cols = x.size();
  d.classes = classes;
  d.features = std::move(x);
  d.labels = {label};
  return d;
}

// Central differences on `coords` coordinates, relative error per coordinate.
void ExpectGradMatchesFiniteDifferences(const ModelSpec& spec, const ParamVector& w,
                                        const Dataset& data, std::size_t coords) {
  const auto rows = AllRows(data);
  const ParamVector g = Grad(spec, w, data, rows);
  ASSERT_EQ(g.size(), w.size());
  DirectionStream pick(Seed{123}, StreamDomain::kAnalysis);
  const double h = 1e-5;
  for (std::size_t n = 0; n < coords; ++n) {
    const std::size_t i = pick.NextIndex(w.size());
    ParamVector p = w, m = w;
    p[i] += h;
    m[i] -= h;
    const double fd = (Loss(spec, p, data, rows) - Loss(spec, m, data, rows)) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-6});
    EXPECT_LT(std::abs(fd - g[i]) / denom, 1e-4) << "coordinate " << i;
  }
}

TEST(QuadraticTest, ZeroAtOptimumAndClosedFormGradient) {
  const Quadratic q{{1.0, 2.0, 0.5}, {0.3, -1.0, 2.0}, false};
  const Dataset empty = OneRow({}, 0, 2);
  const auto rows = AllRows(empty);
  EXPECT_EQ(Loss(q, q.optimum, empty, rows), 0.0);
  const ParamVector g0 = Grad(q, q.optimum, empty, rows);
  for (double v : g0) EXPECT_LT(std::abs(v), 1e-12);

  const ParamVector w = {1.0, 1.0, 1.0};
  const ParamVector g = Grad(q, w, empty, rows);
  EXPECT_DOUBLE_EQ(g[0], 1.0 * 0.7);
  EXPECT_DOUBLE_EQ(g[1], 2.0 * 2.0);
  EXPECT_DOUBLE_EQ(g[2], 0.5 * -1.0);
  EXPECT_DOUBLE_EQ(Loss(q, w, empty, rows), 0.5 * (0.49 + 8.0 + 0.5));
}

TEST(QuadraticTest, BatchNoiseGradient) {
  const std::size_t d = 6;
  const Quadratic q{SpikedSpectrum(d, 2, 5.0, 0.5), Random(d, 1), true};
  const Dataset data = MakeSymmetricNoise(20, d, 0.7, Seed{4});
  ExpectGradMatchesFiniteDifferences(q, Random(d, 2), data, 20);
  // Antithetic rows: the full-data term vanishes.
  const auto rows = AllRows(data);
  const ParamVector w = Random(d, 3);
  const Quadratic plain{q.eigenvalues, q.optimum, false};
  EXPECT_NEAR(Loss(q, w, data, rows), Loss(plain, w, data, rows), 1e-12);
}

TEST(QuadraticTest, PolyakLojasiewiczHolds) {
  const std::size_t d = 10;
  const Quadratic q{SpikedSpectrum(d, 3, 4.0, 0.25), Random(d, 5), false};
  const double delta = PlConstant(q);
  EXPECT_EQ(delta, 0.25);
  const Dataset empty = OneRow({}, 0, 2);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const ParamVector w = Random(d, 100 + s, 3.0);
    const ParamVector g = Grad(q, w, empty, AllRows(empty));
    const double sq = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    EXPECT_GE(0.5 * sq, delta * Loss(q, w, empty, AllRows(empty)) * (1 - 1e-12));
  }
}

TEST(SpectrumTest, SpikedSpectrumAndEffectiveRank) {
  const Quadratic q{SpikedSpectrum(10, 2, 5.0, 1.0), ParamVector(10, 0.0), false};
  EXPECT_EQ(q.eigenvalues[0], 5.0);
  EXPECT_EQ(q.eigenvalues[1], 5.0);
  EXPECT_EQ(q.eigenvalues[2], 1.0);
  EXPECT_DOUBLE_EQ(EffectiveRank(q), 18.0 / 5.0);
  EXPECT_EQ(Smoothness(q), 5.0);
}

TEST(LogisticTest, ZeroWeightsGiveLogTwo) {
  const Dataset data = MakeGaussianBlobs(50, 4, 2, 3.0, Seed{1});
  const Logistic l{4};
  EXPECT_NEAR(Loss(l, ParamVector(5, 0.0), data, AllRows(data)), std::log(2.0), 1e-15);
}

TEST(LogisticTest, GradientMatchesFiniteDifferences) {
  const Dataset data = MakeGaussianBlobs(300, 7, 2, 2.0, Seed{2});
  ExpectGradMatchesFiniteDifferences(Logistic{7}, Random(8, 9, 0.5), data, 8);
}

TEST(LogisticTest, AccuracyOfSeparatedBlobs) {
  const Dataset data = MakeGaussianBlobs(400, 3, 2, 0.0, Seed{3});
  // Bias-only classifier predicting class 1 everywhere gets exactly half.
  const ParamVector w = {0.0, 0.0, 0.0, 1.0};
  EXPECT_DOUBLE_EQ(*Accuracy(Logistic{3}, w, data, AllRows(data)), 0.5);
}

// Independent forward pass for a [2, 3, 2] tanh network.
double HandRolledMlpLoss(const ParamVector& p, const std::vector<double>& x, int y) {
  const double* w1 = p.data();       // 3 x 2
  const double* b1 = p.data() + 6;   // 3
  const double* w2 = p.data() + 9;   // 2 x 3
  const double* b2 = p.data() + 15;  // 2
  double h[3];
  for (int o = 0; o < 3; ++o) h[o] = std::tanh(w1[2 * o] * x[0] + w1[2 * o + 1] * x[1] + b1[o]);
  double z[2];
  for (int o = 0; o < 2; ++o) z[o] = w2[3 * o] * h[0] + w2[3 * o + 1] * h[1] + w2[3 * o + 2] * h[2] + b2[o];
  const double m = std::max(z[0], z[1]);
  const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
  return lse - z[y];
}

TEST(MlpTest, ForwardMatchesHandRolledOracle) {
  const Mlp m{{2, 3, 2}};
  ASSERT_EQ(ParamCount(m), 17u);
  ParamVector p(17);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.05 * static_cast<double>(i) - 0.4;
  const Dataset one = OneRow({0.3, -1.2}, 1, 2);
  EXPECT_NEAR(Loss(m, p, one, AllRows(one)), HandRolledMlpLoss(p, {0.3, -1.2}, 1), 1e-14);
}

TEST(MlpTest, GradientMatchesFiniteDifferences) {
  const Mlp m{{5, 6, 4, 3}};
  const Dataset data = MakeGaussianBlobs(90, 5, 3, 2.0, Seed{6});
  ExpectGradMatchesFiniteDifferences(m, Random(ParamCount(m), 10, 0.4), data, 20);
}

TEST(ModelErrorsTest, ShapeMismatchThrows) {
  const Dataset data = MakeGaussianBlobs(10, 3, 2, 1.0, Seed{1});
  EXPECT_THROW(Loss(Logistic{3}, ParamVector(3, 0.0), data, AllRows(data)), ShapeError);
  EXPECT_THROW(Loss(Logistic{4}, ParamVector(5, 0.0), data, AllRows(data)), ShapeError);
  const std::vector<std::size_t> bad = {10};
  EXPECT_THROW(Loss(Logistic{3}, ParamVector(4, 0.0), data, bad), ShapeError);
  EXPECT_THROW(Loss(Logistic{3}, ParamVector(4, 0.0), data, {}), DataError);
}

TEST(SpecDigestTest, DistinguishesSpecs) {
  const ModelSpec a = Quadratic{{1.0, 2.0}, {0.0, 0.0}, false};
  const ModelSpec b = Quadratic{{1.0, 2.0}, {0.0, 0.0}, true};
  const ModelSpec c = Logistic{2};
  const ModelSpec d = Mlp{{2, 2}};
  EXPECT_EQ(SpecDigest(a), SpecDigest(Quadratic{{1.0, 2.0}, {0.0, 0.0}, false}));
  EXPECT_NE(SpecDigest(a), SpecDigest(b));
  EXPECT_NE(SpecDigest(c), SpecDigest(d));
  EXPECT_EQ(KindName(d), "mlp");
}

TEST(CsvTest, ParsesRowsAndSkipsComments) {
  const Dataset d = ParseCsvDataset("# header\n1,0.5,2\n\n0,-1,3.25\n");
  EXPECT_EQ(d.rows, 2u);
  EXPECT_EQ(d.cols, 2u);
  EXPECT_EQ(d.labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(d.features, (std::vector<double>{0.5, 2.0, -1.0, 3.25}));
}

TEST(CsvTest, ReportsLineNumbers) {
  try {
    ParseCsvDataset("1,0.5\n0,abc\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ParseCsvDataset("1,0.5\n0,1,2\n"), DataError);
}

TEST(SyntheticDataTest, SymmetricNoiseIsAntithetic) {
  const Dataset d = MakeSymmetricNoise(6, 3, 2.0, Seed{8});
  for (std::size_t r = 0; r < 6; r += 2) {
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(d.Row(r)[i], -d.Row(r + 1)[i]);
  }
}

TEST(SyntheticDataTest, BlobsAreBalancedAndDeterministic) {
  const Dataset a = MakeGaussianBlobs(99, 4, 3, 2.0, Seed{5});
  const Dataset b = MakeGaussianBlobs(99, 4, 3, 2.0, Seed{5});
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.ClassCounts(), (std::vector<std::size_t>{33, 33, 33}));
}

}  // namespace
}  // namespace feedsign
