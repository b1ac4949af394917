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

#ifndef FEEDSIGN_AGGREGATION_H_
#define FEEDSIGN_AGGREGATION_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "feedsign/prng.h"
#include "feedsign/zo.h"

namespace feedsign {

enum class RuleKind : std::uint8_t {
  kFedSgd = 0,
  kZoFedSgd = 1,
  kFeedSign = 2,
  kDpFeedSign = 3,
};

std::string_view RuleName(RuleKind kind);
// Accepts "fedsgd", "zo_fedsgd", "feedsign", "dp_feedsign".
RuleKind ParseRuleName(std::string_view name);

class AggregationRule {
 public:
  static AggregationRule FedSgd() { return AggregationRule(RuleKind::kFedSgd, 0); }
  static AggregationRule ZoFedSgd() { return AggregationRule(RuleKind::kZoFedSgd, 0); }
  static AggregationRule FeedSign() { return AggregationRule(RuleKind::kFeedSign, 0); }
  // Throws AggregationError unless epsilon > 0.
  static AggregationRule DpFeedSign(double epsilon);

  RuleKind kind() const { return kind_; }
  double epsilon() const { return epsilon_; }
  bool IsSignRule() const {
    return kind_ == RuleKind::kFeedSign || kind_ == RuleKind::kDpFeedSign;
  }

 private:
  AggregationRule(RuleKind kind, double epsilon) : kind_(kind), epsilon_(epsilon) {}

  RuleKind kind_;
  double epsilon_;
};

struct VoteTally {
  std::uint64_t plus = 0;
  std::uint64_t minus = 0;

  std::uint64_t total() const { return plus + minus; }
  friend bool operator==(const VoteTally&, const VoteTally&) = default;
};

VoteTally Tally(std::span<const Sign> votes);

// (1/K) sum_k p_k, summed in ascending client-index order.
double AggregateZoFedSgd(std::span<const Projection> projections);

// Majority vote; a tie goes to +1.
Sign AggregateFeedSign(std::span<const Sign> votes);

// P(f_DP = +1) for the exponential-mechanism vote:
//   q(+/-) = sum_k (1/2 +/- v_k),  p(+/-) = exp(eps q(+/-) / 4)
//   P(+1) = p(+) / (p(+) + p(-))
// evaluated with the larger exponent subtracted first.
double DpPlusProbability(std::span<const Sign> votes, double epsilon);

// Draws the DP vote with one uniform from `noise`.
Sign AggregateDpFeedSign(std::span<const Sign> votes, double epsilon,
                         DirectionStream& noise);

struct CommCost {
  std::uint64_t uplink_bits_per_client = 0;
  std::uint64_t downlink_bits = 0;

  friend bool operator==(const CommCost&, const CommCost&) = default;
};

// Bits exchanged in one step with K clients and d parameters:
//   FedSGD       uplink 32 d, downlink 32 d
//   ZO-FedSGD    uplink 64 (32-bit projection + 32-bit seed), downlink 64 K
//   (DP-)FeedSign uplink 1, downlink 1 (the seed is the step index)
CommCost CommCostPerStep(const AggregationRule& rule, std::uint64_t clients,
                         std::uint64_t dim);

}  // namespace feedsign

#endif  // FEEDSIGN_AGGREGATION_H_
