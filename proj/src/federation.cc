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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "feedsign/errors.h"

namespace feedsign {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Moves to the start of the next block (no-op when already aligned).
void AlignToBlock(DirectionStream& stream) { stream.Seek((stream.counter() + 3) / 4 * 4); }

// Each draw starts on a fresh block. A uniform read from the lane right after
// a Gaussian is the Box-Muller angle of that Gaussian, which biases the
// accept test, so a trial takes the Gaussian from lanes 0-1 and its uniform
// from lane 2.
double SampleLogGamma(DirectionStream& stream, double shape) {
  if (shape < 1.0) {
    const double boosted = SampleLogGamma(stream, shape + 1.0);
    AlignToBlock(stream);
    const double u = stream.NextUniform();
    stream.Seek(stream.counter() + 3);
    return boosted + std::log(u) / shape;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    AlignToBlock(stream);
    const double x = stream.NextGaussian();
    stream.NextU64();
    const double u = stream.NextUniform();
    stream.NextU64();
    const double base = 1.0 + c * x;
    if (base <= 0.0) continue;
    const double v = base * base * base;
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      return std::log(d) + std::log(v);
    }
  }
}

void Shuffle(std::vector<std::size_t>& v, DirectionStream& stream) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = stream.NextIndex(i);
    std::swap(v[i - 1], v[j]);
  }
}

// Largest-remainder apportionment of `total` items by `weights`.
std::vector<std::size_t> Apportion(std::size_t total, const std::vector<double>& weights) {
  const std::size_t k = weights.size();
  std::vector<std::size_t> counts(k);
  std::vector<double> frac(k);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = static_cast<double>(total) * weights[i];
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  // floor() can overshoot by rounding when a weight is ~1.
  while (assigned > total) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % k]];
  return counts;
}

void CheckPartitionArgs(const Dataset& data, std::size_t clients) {
  if (clients == 0) throw PartitionError("number of clients must be positive");
  if (clients > data.rows) {
    throw PartitionError("more clients (" + std::to_string(clients) + ") than rows (" +
                         std::to_string(data.rows) + ")");
  }
}

std::vector<ClientShard> Finish(std::vector<std::vector<std::size_t>> parts) {
  std::vector<ClientShard> shards(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (parts[k].empty()) {
      throw PartitionError("client " + std::to_string(k) + " received no rows");
    }
    std::sort(parts[k].begin(), parts[k].end());
    shards[k].client = k;
    shards[k].indices = std::move(parts[k]);
  }
  return shards;
}

DirectionStream ClientStream(Seed run_seed, std::size_t client, StreamDomain domain,
                             std::uint64_t position) {
  DirectionStream s(Seed{Hash64({run_seed.value, client})}, domain);
  s.Seek(position);
  return s;
}

}  // namespace

double SampleGamma(DirectionStream& stream, double shape) {
  if (!(shape > 0)) throw PartitionError("gamma shape must be positive");
  return std::exp(SampleLogGamma(stream, shape));
}

std::vector<ClientShard> PartitionDirichlet(const Dataset& data, std::size_t clients,
                                            double beta, Seed seed) {
  if (!(beta > 0) || !std::isfinite(beta)) {
    throw PartitionError("Dirichlet concentration must be positive and finite");
  }
  CheckPartitionArgs(data, clients);
  DirectionStream stream(seed, StreamDomain::kPartition);
  std::vector<std::vector<std::size_t>> parts(clients);
  for (int c = 0; c < data.classes; ++c) {
    std::vector<std::size_t> rows = data.IndicesOfClass(c);
    // Proportions in log space: small beta underflows plain gamma draws.
    std::vector<double> logs(clients);
    for (auto& l : logs) l = SampleLogGamma(stream, beta);
    const double top = *std::max_element(logs.begin(), logs.end());
    std::vector<double> weights(clients);
    double total = 0.0;
    for (std::size_t k = 0; k < clients; ++k) total += weights[k] = std::exp(logs[k] - top);
    for (auto& w : weights) w /= total;
    const auto counts = Apportion(rows.size(), weights);
    Shuffle(rows, stream);
    std::size_t next = 0;
    for (std::size_t k = 0; k < clients; ++k) {
      parts[k].insert(parts[k].end(), rows.begin() + next, rows.begin() + next + counts[k]);
      next += counts[k];
    }
  }
  return Finish(std::move(parts));
}

std::vector<ClientShard> PartitionIid(const Dataset& data, std::size_t clients, Seed seed) {
  CheckPartitionArgs(data, clients);
  DirectionStream stream(seed, StreamDomain::kPartition);
  std::vector<std::size_t> rows = AllRows(data);
  Shuffle(rows, stream);
  std::vector<std::vector<std::size_t>> parts(clients);
  const std::size_t base = rows.size() / clients, extra = rows.size() % clients;
  std::size_t next = 0;
  for (std::size_t k = 0; k < clients; ++k) {
    const std::size_t n = base + (k < extra ? 1 : 0);
    parts[k].assign(rows.begin() + next, rows.begin() + next + n);
    next += n;
  }
  return Finish(std::move(parts));
}

Seed ClientSeed(Seed run_seed, std::uint64_t step, std::size_t client) {
  return Seed{Hash64({run_seed.value, step, client})};
}

std::vector<std::size_t> SampleBatch(const ClientShard& shard, Seed run_seed,
                                     std::uint64_t step) {
  if (shard.indices.empty()) throw DataError("client shard is empty");
  // Batch size 0 means the whole shard.
  if (shard.batch_size == 0) return shard.indices;
  DirectionStream stream(ClientSeed(run_seed, step, shard.client), StreamDomain::kBatch);
  std::vector<std::size_t> batch(shard.batch_size);
  for (auto& r : batch) r = shard.indices[stream.NextIndex(shard.indices.size())];
  return batch;
}

Projection ClientStep(const ClientShard& shard, FederationState& state, Seed seed) {
  const std::size_t k = shard.client;
  const auto batch = SampleBatch(shard, state.run_seed, state.step);
  const Projection honest = SpsaProjection(state.ModelFor(k), state.params, *state.data,
                                           batch, seed, state.mu, k);
  double value = honest.value();
  if (shard.het_noise) {
    auto s = ClientStream(state.run_seed, k, StreamDomain::kHeterogeneity, state.step);
    value *= 1.0 + s.NextGaussian();
  }
  switch (shard.role) {
    case ClientRole::kHonest:
      break;
    case ClientRole::kByzantineReverse:
      value = -value;
      break;
    case ClientRole::kByzantineRandom: {
      auto s = ClientStream(state.run_seed, k, StreamDomain::kByzantine, state.step);
      value = s.NextGaussian();
      break;
    }
  }
  return Projection(value, seed, k);
}

ParamVector ClientGradient(const ClientShard& shard, FederationState& state) {
  const std::size_t k = shard.client;
  const auto batch = SampleBatch(shard, state.run_seed, state.step);
  ParamVector g = Grad(state.ModelFor(k), state.params, *state.data, batch);
  switch (shard.role) {
    case ClientRole::kHonest:
      break;
    case ClientRole::kByzantineReverse:
      for (auto& x : g) x = -x;
      break;
    case ClientRole::kByzantineRandom: {
      auto s = ClientStream(state.run_seed, k, StreamDomain::kByzantine, state.step);
      for (auto& x : g) x = s.NextGaussian();
      break;
    }
  }
  return g;
}

Evaluation EvaluateGlobal(const FederationState& state) {
  std::size_t total = 0;
  for (const auto& s : state.shards) total += s.indices.size();
  if (total == 0) throw DataError("federation holds no rows");
  Evaluation out;
  double loss = 0.0, acc = 0.0;
  bool has_acc = true;
  for (const auto& s : state.shards) {
    const double w = static_cast<double>(s.indices.size()) / static_cast<double>(total);
    const ModelSpec& m = state.ModelFor(s.client);
    loss += w * Loss(m, state.params, *state.data, s.indices);
    if (has_acc) {
      const auto a = Accuracy(m, state.params, *state.data, s.indices);
      if (a) {
        acc += w * *a;
      } else {
        has_acc = false;
      }
    }
  }
  if (!std::isfinite(loss)) throw EstimationError("global loss is not finite", loss);
  out.loss = loss;
  if (has_acc) out.accuracy = acc;
  return out;
}

std::optional<double> OptimalLoss(const FederationState& state) {
  const std::size_t d = state.params.size();
  std::size_t total = 0;
  for (const auto& s : state.shards) total += s.indices.size();
  if (total == 0) return std::nullopt;
  // Minimizer of sum_k pi_k [1/2 (w - w_k)^T H (w - w_k) - m_k^T w]:
  //   w = sum_k pi_k (w_k + H^-1 m_k).
  ParamVector w(d, 0.0);
  const std::vector<double>* eig = nullptr;
  for (const auto& s : state.shards) {
    const auto* q = std::get_if<Quadratic>(&state.ModelFor(s.client));
    if (q == nullptr) return std::nullopt;
    if (eig == nullptr) {
      eig = &q->eigenvalues;
    } else if (*eig != q->eigenvalues) {
      return std::nullopt;
    }
    const double pi = static_cast<double>(s.indices.size()) / static_cast<double>(total);
    ParamVector m(d, 0.0);
    if (q->batch_noise) {
      for (std::size_t r : s.indices) {
        const auto x = state.data->Row(r);
        for (std::size_t i = 0; i < d; ++i) m[i] += x[i];
      }
      for (auto& v : m) v /= static_cast<double>(s.indices.size());
    }
    for (std::size_t i = 0; i < d; ++i) {
      if (q->eigenvalues[i] <= 0.0) {
        if (m[i] != 0.0) return std::nullopt;  // unbounded below
        w[i] += pi * q->optimum[i];
      } else {
        w[i] += pi * (q->optimum[i] + m[i] / q->eigenvalues[i]);
      }
    }
  }
  FederationState at = state;
  at.params = std::move(w);
  return EvaluateGlobal(at).loss;
}

OrbitHeader MakeOrbitHeader(const FederationState& state) {
  OrbitHeader h;
  h.rule = state.rule.kind();
  switch (state.rule.kind()) {
    case RuleKind::kFeedSign:
    case RuleKind::kDpFeedSign:
      h.payload = PayloadKind::kSignBits;
      break;
    case RuleKind::kZoFedSgd:
      h.payload = state.shared_direction ? PayloadKind::kMeanProjection
                                         : PayloadKind::kPairList;
      break;
    case RuleKind::kFedSgd:
      h.payload = PayloadKind::kMeanProjection;
      break;
  }
  h.clients = static_cast<std::uint32_t>(state.clients());
  h.eta = state.eta;
  h.mu = state.mu;
  h.epsilon = state.rule.kind() == RuleKind::kDpFeedSign ? state.rule.epsilon() : 0.0;
  h.dim = state.params.size();
  h.steps = 0;
  h.run_seed = state.run_seed;
  h.spec_digest = SpecDigest(state.model);
  return h;
}

RoundResult RunRound(FederationState& state, bool evaluate) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t t = state.step;
  const std::size_t clients = state.clients();
  if (clients == 0) throw AggregationError("federation has no clients");
  if (state.data == nullptr) throw DataError("federation has no dataset");

  RoundResult out;
  RoundReport& rep = out.report;
  rep.step = t;
  rep.rule = state.rule.kind();
  const CommCost cost = CommCostPerStep(state.rule, clients, state.params.size());
  rep.uplink_bits = cost.uplink_bits_per_client * clients;
  rep.downlink_bits = cost.downlink_bits;

  const ParamVector before = state.params;
  try {
    const OrbitHeader header = MakeOrbitHeader(state);
    std::vector<Projection> projections;
    std::vector<Sign> votes;
    switch (state.rule.kind()) {
      case RuleKind::kFeedSign:
      case RuleKind::kDpFeedSign: {
        for (const auto& shard : state.shards) {
          projections.push_back(ClientStep(shard, state, Seed{t}));
          votes.push_back(SignOf(projections.back().value()));
        }
        Sign vote;
        if (state.rule.kind() == RuleKind::kFeedSign) {
          vote = AggregateFeedSign(votes);
        } else {
          DirectionStream noise(state.dp_seed, StreamDomain::kPrivacy);
          noise.Seek(t);
          vote = AggregateDpFeedSign(votes, state.rule.epsilon(), noise);
        }
        rep.aggregate = ToInt(vote);
        out.entry = OrbitEntry{t, vote};
        break;
      }
      case RuleKind::kZoFedSgd: {
        if (state.shared_direction) {
          for (const auto& shard : state.shards) {
            projections.push_back(ClientStep(shard, state, Seed{t}));
          }
          rep.aggregate = AggregateZoFedSgd(projections);
          out.entry = OrbitEntry{t, rep.aggregate};
        } else {
          std::vector<SeedProjection> pairs;
          for (const auto& shard : state.shards) {
            const Seed seed = ClientSeed(state.run_seed, t, shard.client);
            const Projection p = ClientStep(shard, state, seed);
            // What goes on the wire is a float32.
            const float wire = static_cast<float>(p.value());
            if (!std::isfinite(wire)) {
              throw EstimationError("projection overflows float32", p.value());
            }
            projections.emplace_back(static_cast<double>(wire), seed, shard.client);
            pairs.push_back({seed, wire});
          }
          rep.aggregate = AggregateZoFedSgd(projections);
          out.entry = OrbitEntry{t, std::move(pairs)};
        }
        for (const auto& p : projections) votes.push_back(SignOf(p.value()));
        break;
      }
      case RuleKind::kFedSgd: {
        ParamVector mean(state.params.size(), 0.0);
        for (const auto& shard : state.shards) {
          const ParamVector g = ClientGradient(shard, state);
          for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += g[i];
        }
        const double inv = 1.0 / static_cast<double>(clients);
        for (std::size_t i = 0; i < mean.size(); ++i) {
          const double step = mean[i] * inv;
          if (!std::isfinite(step)) throw EstimationError("gradient is not finite", step);
          state.params[i] -= state.eta * step;
        }
        break;
      }
    }
    if (out.entry) ApplyEntry(state.params, header, *out.entry);
    for (const auto& p : projections) rep.projections.push_back(p.value());
    rep.tally = Tally(votes);

    rep.global_loss = kNaN;
    rep.accuracy = kNaN;
    if (evaluate) {
      const Evaluation ev = EvaluateGlobal(state);
      rep.global_loss = ev.loss;
      if (ev.accuracy) rep.accuracy = *ev.accuracy;
    }
  } catch (...) {
    state.params = before;
    throw;
  }
  state.step = t + 1;
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

TrainingResult RunTraining(
    FederationState state, std::uint64_t steps, std::uint64_t eval_every,
    const std::function<void(const FederationState&, const RoundReport&)>& on_round) {
  if (eval_every == 0) eval_every = 1;
  TrainingResult result;
  result.initial = state.params;
  result.orbit = Orbit(MakeOrbitHeader(state));
  result.history.reserve(steps);
  for (std::uint64_t i = 0; i < steps; ++i) {
    const bool evaluate = (i + 1) % eval_every == 0 || i + 1 == steps;
    try {
      RoundResult r = RunRound(state, evaluate);
      if (r.entry) result.orbit.Append(std::move(*r.entry));
      if (on_round) on_round(state, r.report);
      result.history.push_back(std::move(r.report));
    } catch (const Error& e) {
      result.error = "step " + std::to_string(state.step) + ": " + e.what();
      break;
    }
  }
  result.final_params = std::move(state.params);
  return result;
}

}  // namespace feedsign
