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

#ifndef FEEDSIGN_FEDERATION_H_
#define FEEDSIGN_FEDERATION_H_

// The server/client round loop.
//
// All clients hold the same parameters at every step boundary, so the
// simulation keeps a single parameter vector; each client's SPSA walk
// perturbs it and restores it before the next client runs.
//
// Seed schedule (client index k is 0-based everywhere):
//   (DP-)FeedSign, shared-direction ZO-FedSGD: direction seed = t
//   ZO-FedSGD:  direction seed = Hash64({run_seed, t, k})
//   batch rows: stream Hash64({run_seed, t, k}) in the batch domain
//   heterogeneity multiplier: position t of stream Hash64({run_seed, k}),
//                             heterogeneity domain
//   Byzantine random value:   position t of stream Hash64({run_seed, k}),
//                             Byzantine domain
//   DP vote: position t of the dp_seed stream in the privacy domain

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "feedsign/aggregation.h"
#include "feedsign/models.h"
#include "feedsign/orbit.h"
#include "feedsign/prng.h"
#include "feedsign/zo.h"

namespace feedsign {

enum class ClientRole : std::uint8_t {
  kHonest,
  // Negates its own projection (the FeedSign attack).
  kByzantineReverse,
  // Replaces its projection with a standard normal draw (the ZO-FedSGD
  // attack).
  kByzantineRandom,
};

struct ClientShard {
  std::size_t client = 0;
  // Dataset rows owned by this client, ascending.
  std::vector<std::size_t> indices;
  std::size_t batch_size = 16;
  ClientRole role = ClientRole::kHonest;
  // Multiply the projection by 1 + N(0, 1).
  bool het_noise = false;
};

struct FederationState {
  ModelSpec model;
  // Optional per-client objectives (e.g. quadratics with shifted optima);
  // empty means every client uses `model`.
  std::vector<ModelSpec> client_models;
  std::shared_ptr<const Dataset> data;
  ParamVector params;
  std::uint64_t step = 0;
  std::vector<ClientShard> shards;
  AggregationRule rule = AggregationRule::FeedSign();
  double eta = 1e-3;
  double mu = kDefaultMu;
  Seed run_seed;
  Seed dp_seed;
  // ZO-FedSGD variant where every client uses seed t and the server
  // broadcasts the mean projection.
  bool shared_direction = false;

  std::size_t clients() const { return shards.size(); }
  const ModelSpec& ModelFor(std::size_t k) const {
    return client_models.empty() ? model : client_models[k];
  }
};

struct RoundReport {
  std::uint64_t step = 0;
  RuleKind rule = RuleKind::kFeedSign;
  // NaN when the round was not evaluated.
  double global_loss = 0.0;
  // NaN when not evaluated or not defined for the model.
  double accuracy = 0.0;
  std::vector<double> projections;
  VoteTally tally;
  // Broadcast coefficient: the vote (+/-1), the mean projection, or 0 for
  // per-client ZO-FedSGD and FedSGD.
  double aggregate = 0.0;
  std::uint64_t uplink_bits = 0;
  std::uint64_t downlink_bits = 0;
  double wall_time_s = 0.0;
};

struct Evaluation {
  double loss = 0.0;
  std::optional<double> accuracy;
};

// --- Partitioning ------------------------------------------------------------

// For every class: draw proportions from Dirichlet(beta 1_K), round the class
// size by largest remainder (ties to the lower client index), and deal the
// class's rows in a seeded shuffled order. Throws PartitionError if beta <= 0,
// K == 0 or K exceeds the number of rows.
std::vector<ClientShard> PartitionDirichlet(const Dataset& data, std::size_t clients,
                                            double beta, Seed seed);

// Shuffled rows dealt into K contiguous, near-equal shards.
std::vector<ClientShard> PartitionIid(const Dataset& data, std::size_t clients, Seed seed);

// Gamma(shape, 1) by Marsaglia-Tsang (shape < 1 boosted via U^(1/shape)).
// Every trial consumes one whole block of `stream`.
double SampleGamma(DirectionStream& stream, double shape);

// --- Rounds ------------------------------------------------------------------

Seed ClientSeed(Seed run_seed, std::uint64_t step, std::size_t client);

// B rows drawn uniformly with replacement from the shard.
std::vector<std::size_t> SampleBatch(const ClientShard& shard, Seed run_seed,
                                     std::uint64_t step);

// One client's transmitted projection for direction `seed`: batch, SPSA,
// heterogeneity multiplier, then the role transform.
Projection ClientStep(const ClientShard& shard, FederationState& state, Seed seed);

// Full-batch client gradient for FedSGD, with the role transform applied.
ParamVector ClientGradient(const ClientShard& shard, FederationState& state);

// Loss and accuracy of the current params over the whole federation: each
// client's objective on its own rows, weighted by row count.
Evaluation EvaluateGlobal(const FederationState& state);

// Analytic minimum of the global objective; quadratic family only
// (nullopt otherwise).
std::optional<double> OptimalLoss(const FederationState& state);

struct RoundResult {
  RoundReport report;
  // Absent for FedSGD, whose updates are not seed-reconstructible.
  std::optional<OrbitEntry> entry;
};

// Runs step state.step and advances it. On error the state is unchanged.
RoundResult RunRound(FederationState& state, bool evaluate = true);

OrbitHeader MakeOrbitHeader(const FederationState& state);

struct TrainingResult {
  std::vector<RoundReport> history;
  ParamVector initial;
  ParamVector final_params;
  Orbit orbit;
  // Set when a round failed; history holds the completed rounds.
  std::optional<std::string> error;
};

// Runs `steps` rounds, evaluating every `eval_every` steps and on the last.
// `on_round`, if set, sees the state after each round.
TrainingResult RunTraining(
    FederationState state, std::uint64_t steps, std::uint64_t eval_every = 1,
    const std::function<void(const FederationState&, const RoundReport&)>& on_round = {});

}  // namespace feedsign

#endif  // FEEDSIGN_FEDERATION_H_
