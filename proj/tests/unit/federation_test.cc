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

#include "feedsign/federation.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "feedsign/errors.h"
#include "feedsign/kernels.h"

namespace feedsign {
namespace {

std::shared_ptr<const Dataset> Featureless(std::size_t rows) {
  auto d = std::make_shared<Dataset>();
  d->rows = rows;
  d->classes = 1;
  d->labels.assign(rows, 0);
  return d;
}

FederationState QuadraticState(AggregationRule rule, std::size_t clients, std::size_t d,
                               double eta = 1e-2) {
  FederationState s;
  ParamVector optimum(d, 0.0);
  std::vector<double> eig(d);
  for (std::size_t i = 0; i < d; ++i) eig[i] = 0.5 + static_cast<double>(i % 4);
  s.model = Quadratic{eig, optimum, false};
  s.data = Featureless(100);
  s.shards = PartitionIid(*s.data, clients, Seed{1});
  s.params.assign(d, 0.5);
  s.rule = rule;
  s.eta = eta;
  s.run_seed = Seed{77};
  s.dp_seed = Seed{78};
  return s;
}

FederationState LogisticState(AggregationRule rule, std::size_t clients) {
  FederationState s;
  s.model = Logistic{4};
  s.data = std::make_shared<Dataset>(MakeGaussianBlobs(200, 4, 2, 2.0, Seed{5}));
  s.shards = PartitionIid(*s.data, clients, Seed{2});
  s.params.assign(5, 0.1);
  s.rule = rule;
  s.eta = 0.05;
  s.run_seed = Seed{3};
  s.dp_seed = Seed{4};
  return s;
}

TEST(PartitionTest, SingleClientGetsEverything) {
  const Dataset data = MakeGaussianBlobs(57, 2, 3, 1.0, Seed{1});
  for (double beta : {0.1, 1.0, 100.0}) {
    const auto shards = PartitionDirichlet(data, 1, beta, Seed{4});
    ASSERT_EQ(shards.size(), 1u);
    EXPECT_EQ(shards[0].indices, AllRows(data));
  }
}

TEST(PartitionTest, DisjointAndComplete) {
  const Dataset data = MakeGaussianBlobs(503, 2, 4, 1.0, Seed{1});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto shards = PartitionDirichlet(data, 7, 1.0, Seed{seed});
    std::vector<std::size_t> all;
    for (const auto& s : shards) all.insert(all.end(), s.indices.begin(), s.indices.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, AllRows(data));
  }
  const auto iid = PartitionIid(data, 7, Seed{3});
  std::size_t total = 0;
  for (const auto& s : iid) {
    total += s.indices.size();
    EXPECT_TRUE(s.indices.size() == 71 || s.indices.size() == 72);
    EXPECT_TRUE(std::is_sorted(s.indices.begin(), s.indices.end()));
  }
  EXPECT_EQ(total, 503u);
}

TEST(PartitionTest, LargeConcentrationKeepsClassRatios) {
  const Dataset data = MakeGaussianBlobs(1000, 2, 2, 1.0, Seed{1});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto shards = PartitionDirichlet(data, 5, 1e3, Seed{seed});
    for (const auto& s : shards) {
      std::size_t ones = 0;
      for (std::size_t r : s.indices) ones += data.labels[r] == 1;
      const double ratio = static_cast<double>(ones) / static_cast<double>(s.indices.size());
      EXPECT_NEAR(ratio, 0.5, 0.05) << "seed " << seed << " client " << s.client;
    }
  }
}

TEST(PartitionTest, Errors) {
  const Dataset data = MakeGaussianBlobs(4, 2, 2, 1.0, Seed{1});
  EXPECT_THROW(PartitionDirichlet(data, 5, 1.0, Seed{1}), PartitionError);
  EXPECT_THROW(PartitionDirichlet(data, 2, 0.0, Seed{1}), PartitionError);
  EXPECT_THROW(PartitionIid(data, 0, Seed{1}), PartitionError);
}

TEST(GammaTest, MeanMatchesShape) {
  for (double shape : {0.3, 1.0, 4.5}) {
    DirectionStream s(Seed{9}, StreamDomain::kPartition);
    double sum = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) sum += SampleGamma(s, shape);
    EXPECT_NEAR(sum / n, shape, 4 * std::sqrt(shape / n)) << shape;
  }
}

TEST(ClientStepTest, HonestMatchesDirectionalDerivative) {
  FederationState s = QuadraticState(AggregationRule::FeedSign(), 3, 16);
  const Projection p = ClientStep(s.shards[1], s, Seed{5});
  const double exact = kernels::GaussianDot(
      Grad(s.model, s.params, *s.data, s.shards[1].indices), Seed{5});
  EXPECT_NEAR(p.value(), exact, 1e-10 * std::abs(exact));
  EXPECT_EQ(p.client(), 1u);
}

TEST(ClientStepTest, RoleTransforms) {
  FederationState s = LogisticState(AggregationRule::FeedSign(), 4);
  const double honest = ClientStep(s.shards[2], s, Seed{8}).value();
  s.shards[2].role = ClientRole::kByzantineReverse;
  EXPECT_EQ(ClientStep(s.shards[2], s, Seed{8}).value(), -honest);

  s.shards[2].role = ClientRole::kByzantineRandom;
  const double random = ClientStep(s.shards[2], s, Seed{8}).value();
  s.shards[2].batch_size = 3;
  s.params[0] += 1.0;
  EXPECT_EQ(ClientStep(s.shards[2], s, Seed{9}).value(), random);
  s.step = 1;
  EXPECT_NE(ClientStep(s.shards[2], s, Seed{8}).value(), random);
}

TEST(ClientStepTest, HeterogeneityMultiplier) {
  FederationState s = LogisticState(AggregationRule::FeedSign(), 4);
  const double honest = ClientStep(s.shards[0], s, Seed{8}).value();
  s.shards[0].het_noise = true;
  DirectionStream m(Seed{Hash64({s.run_seed.value, 0})}, StreamDomain::kHeterogeneity);
  EXPECT_EQ(ClientStep(s.shards[0], s, Seed{8}).value(), honest * (1.0 + m.NextGaussian()));
}

TEST(RunRoundTest, BitAccounting) {
  for (std::size_t k : {1u, 5u, 25u}) {
    const std::size_t d = 12;
    struct Case {
      AggregationRule rule;
      std::uint64_t up;
      std::uint64_t down;
    };
    for (const Case& c : {Case{AggregationRule::FeedSign(), 1, 1},
                          Case{AggregationRule::DpFeedSign(1.0), 1, 1},
                          Case{AggregationRule::ZoFedSgd(), 64, 64 * k},
                          Case{AggregationRule::FedSgd(), 32 * d, 32 * d}}) {
      FederationState s = QuadraticState(c.rule, k, d);
      const RoundResult r = RunRound(s);
      EXPECT_EQ(r.report.uplink_bits, c.up * k);
      EXPECT_EQ(r.report.downlink_bits, c.down);
    }
  }
}

TEST(RunRoundTest, ZeroProjectionsLeaveParamsUnchanged) {
  FederationState s = QuadraticState(AggregationRule::ZoFedSgd(), 4, 10);
  s.params.assign(10, 0.0);  // the optimum: every projection is exactly 0
  const ParamVector before = s.params;
  const RoundResult r = RunRound(s);
  for (double p : r.report.projections) EXPECT_EQ(p, 0.0);
  EXPECT_EQ(s.params, before);
  EXPECT_EQ(s.step, 1u);
}

TEST(RunRoundTest, StateUnchangedOnError) {
  FederationState s = QuadraticState(AggregationRule::FeedSign(), 2, 4);
  std::get<Quadratic>(s.model).eigenvalues[0] = 1e308;
  s.params[0] = 1e10;
  const ParamVector before = s.params;
  EXPECT_THROW(RunRound(s), EstimationError);
  EXPECT_EQ(s.params, before);
  EXPECT_EQ(s.step, 0u);
}

TEST(RunRoundTest, EntryReplaysRound) {
  std::vector<FederationState> states = {
      QuadraticState(AggregationRule::FeedSign(), 5, 33),
      QuadraticState(AggregationRule::DpFeedSign(0.5), 5, 33),
      QuadraticState(AggregationRule::ZoFedSgd(), 5, 33),
      LogisticState(AggregationRule::ZoFedSgd(), 3),
  };
  states.push_back(QuadraticState(AggregationRule::ZoFedSgd(), 3, 9));
  states.back().shared_direction = true;
  for (FederationState& s : states) {
    const OrbitHeader h = MakeOrbitHeader(s);
    for (int t = 0; t < 5; ++t) {
      ParamVector copy = s.params;
      const RoundResult r = RunRound(s, false);
      ASSERT_TRUE(r.entry.has_value());
      ApplyEntry(copy, h, *r.entry);
      EXPECT_EQ(copy, s.params) << RuleName(s.rule.kind()) << " step " << t;
    }
  }
}

TEST(RunRoundTest, FedSgdMovesAlongMeanGradient) {
  FederationState s = QuadraticState(AggregationRule::FedSgd(), 2, 3, 0.1);
  const ParamVector g = Grad(s.model, s.params, *s.data, AllRows(*s.data));
  ParamVector expected = s.params;
  for (std::size_t i = 0; i < 3; ++i) expected[i] -= 0.1 * ((g[i] + g[i]) * 0.5);
  const RoundResult r = RunRound(s);
  EXPECT_FALSE(r.entry.has_value());
  EXPECT_EQ(s.params, expected);
}

TEST(RunRoundTest, FeedSignSingleClientDescends) {
  FederationState s = QuadraticState(AggregationRule::FeedSign(), 1, 20, 1e-3);
  double before = EvaluateGlobal(s).loss, total = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const RoundResult r = RunRound(s);
    EXPECT_EQ(r.report.aggregate, ToInt(SignOf(r.report.projections[0])));
    total += r.report.global_loss - before;
    before = r.report.global_loss;
  }
  EXPECT_LT(total / 1000, 0.0);
}

TEST(RunTrainingTest, ZeroStepsReturnsInitial) {
  const FederationState s = QuadraticState(AggregationRule::FeedSign(), 3, 5);
  const TrainingResult r = RunTraining(s, 0);
  EXPECT_EQ(r.final_params, s.params);
  EXPECT_EQ(r.orbit.size(), 0u);
  EXPECT_TRUE(r.history.empty());
}

TEST(RunTrainingTest, DeterministicAndReplayable) {
  for (AggregationRule rule : {AggregationRule::FeedSign(), AggregationRule::ZoFedSgd(),
                               AggregationRule::DpFeedSign(2.0)}) {
    const FederationState s = LogisticState(rule, 4);
    const TrainingResult a = RunTraining(s, 40, 7);
    const TrainingResult b = RunTraining(s, 40, 7);
    EXPECT_EQ(a.final_params, b.final_params);
    ASSERT_EQ(a.history.size(), 40u);
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      EXPECT_EQ(std::isnan(a.history[i].global_loss), (i + 1) % 7 != 0 && i != 39);
    }
    EXPECT_EQ(Replay(a.initial, a.orbit, SpecDigest(s.model)), a.final_params);
    EXPECT_FALSE(a.error.has_value());
  }
}

TEST(RunTrainingTest, AbortKeepsPartialHistory) {
  FederationState s = QuadraticState(AggregationRule::ZoFedSgd(), 2, 4, 1e30);
  std::get<Quadratic>(s.model).eigenvalues.assign(4, 1e100);
  const TrainingResult r = RunTraining(s, 50);
  ASSERT_TRUE(r.error.has_value());
  EXPECT_LT(r.history.size(), 50u);
  EXPECT_EQ(r.orbit.size(), r.history.size());
}

TEST(CatchUpTest, JoiningClientReconstructsLiveModel) {
  FederationState s = QuadraticState(AggregationRule::FeedSign(), 3, 20);
  const ParamVector initial = s.params;
  Orbit orbit(MakeOrbitHeader(s));
  for (int t = 0; t < 25; ++t) orbit.Append(*RunRound(s, false).entry);
  EXPECT_EQ(CatchUp(initial, orbit, s), s.params);
  EXPECT_THROW(CatchUp(initial, orbit.Prefix(24), s), ReplayError);
  FederationState other = s;
  other.eta *= 2;
  EXPECT_THROW(CatchUp(initial, orbit, other), ReplayError);
}

TEST(OptimalLossTest, HeterogeneousQuadraticMinimum) {
  FederationState s = QuadraticState(AggregationRule::FeedSign(), 3, 6);
  auto q = std::get<Quadratic>(s.model);
  for (std::size_t k = 0; k < 3; ++k) {
    Quadratic qk = q;
    for (std::size_t i = 0; i < 6; ++i) qk.optimum[i] = 0.3 * static_cast<double>(k) - 0.1 * i;
    s.client_models.push_back(qk);
  }
  const double best = *OptimalLoss(s);
  EXPECT_GT(best, 0.0);
  // Any perturbation of the analytic minimizer is no better.
  FederationState probe = s;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    probe.params.assign(6, 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
      double num = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        num += static_cast<double>(s.shards[k].indices.size()) / 100.0 *
               std::get<Quadratic>(s.client_models[k]).optimum[i];
      }
      probe.params[i] = num;
    }
    PerturbInPlace(probe.params, Seed{seed}, 1e-3);
    EXPECT_GE(EvaluateGlobal(probe).loss, best);
  }
  const FederationState logistic = LogisticState(AggregationRule::FeedSign(), 2);
  EXPECT_FALSE(OptimalLoss(logistic).has_value());
}

}  // namespace
}  // namespace feedsign
