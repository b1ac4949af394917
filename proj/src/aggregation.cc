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

#include "feedsign/aggregation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "feedsign/errors.h"

namespace feedsign {

std::string_view RuleName(RuleKind kind) {
  switch (kind) {
    case RuleKind::kFedSgd:
      return "fedsgd";
    case RuleKind::kZoFedSgd:
      return "zo_fedsgd";
    case RuleKind::kFeedSign:
      return "feedsign";
    case RuleKind::kDpFeedSign:
      return "dp_feedsign";
  }
  return "unknown";
}

RuleKind ParseRuleName(std::string_view name) {
  for (RuleKind k : {RuleKind::kFedSgd, RuleKind::kZoFedSgd, RuleKind::kFeedSign,
                     RuleKind::kDpFeedSign}) {
    if (RuleName(k) == name) return k;
  }
  throw AggregationError("unknown aggregation rule '" + std::string(name) + "'");
}

AggregationRule AggregationRule::DpFeedSign(double epsilon) {
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw AggregationError("DP-FeedSign epsilon must be a positive finite number");
  }
  return AggregationRule(RuleKind::kDpFeedSign, epsilon);
}

VoteTally Tally(std::span<const Sign> votes) {
  VoteTally t;
  for (Sign v : votes) (v == Sign::kPlus ? t.plus : t.minus) += 1;
  return t;
}

double AggregateZoFedSgd(std::span<const Projection> projections) {
  if (projections.empty()) throw AggregationError("no projections to aggregate");
  std::vector<std::size_t> order(projections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return projections[a].client() < projections[b].client();
  });
  double sum = 0.0;
  for (std::size_t i : order) sum += projections[i].value();
  return sum / static_cast<double>(projections.size());
}

Sign AggregateFeedSign(std::span<const Sign> votes) {
  if (votes.empty()) throw AggregationError("no votes to aggregate");
  long long sum = 0;
  for (Sign v : votes) sum += ToInt(v);
  return sum < 0 ? Sign::kMinus : Sign::kPlus;
}

double DpPlusProbability(std::span<const Sign> votes, double epsilon) {
  if (votes.empty()) throw AggregationError("no votes to aggregate");
  if (!(epsilon > 0)) throw AggregationError("epsilon must be positive");
  double q_plus = 0.0, q_minus = 0.0;
  for (Sign v : votes) {
    q_plus += 0.5 + ToInt(v);
    q_minus += 0.5 - ToInt(v);
  }
  const double a = epsilon * q_plus / 4.0;
  const double b = epsilon * q_minus / 4.0;
  const double m = std::max(a, b);
  const double p_plus = std::exp(a - m);
  const double p_minus = std::exp(b - m);
  return p_plus / (p_plus + p_minus);
}

Sign AggregateDpFeedSign(std::span<const Sign> votes, double epsilon,
                         DirectionStream& noise) {
  const double p = DpPlusProbability(votes, epsilon);
  return noise.NextUniform() < p ? Sign::kPlus : Sign::kMinus;
}

CommCost CommCostPerStep(const AggregationRule& rule, std::uint64_t clients,
                         std::uint64_t dim) {
  switch (rule.kind()) {
    case RuleKind::kFedSgd:
      return {32 * dim, 32 * dim};
    case RuleKind::kZoFedSgd:
      return {64, 64 * clients};
    case RuleKind::kFeedSign:
    case RuleKind::kDpFeedSign:
      return {1, 1};
  }
  return {};
}

}  // namespace feedsign
