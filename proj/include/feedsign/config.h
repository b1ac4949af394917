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

#ifndef FEEDSIGN_CONFIG_H_
#define FEEDSIGN_CONFIG_H_

// Experiment configuration (a single JSON object; see README for the field
// table). Unknown fields are rejected.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feedsign/aggregation.h"
#include "feedsign/federation.h"

namespace feedsign {

enum class ModelKind : std::uint8_t { kQuadratic, kLogistic, kMlp };

struct SpectrumConfig {
  // "spiked": top_count eigenvalues equal to `top`, the rest `tail`.
  // "linspace": evenly spaced from `low` to `high`.
  std::string kind = "spiked";
  double top = 1.0;
  std::optional<std::size_t> top_count;  // default: d
  double tail = 1.0;
  double low = 1.0;
  double high = 1.0;
};

struct DatasetConfig {
  std::optional<std::string> path;
  std::size_t samples = 1000;
  // Class-mean distance for the Gaussian blobs.
  double separation = 2.0;
  // Row scale of the symmetric noise set (quadratic with batch_noise).
  double noise_scale = 1.0;
  std::optional<std::uint64_t> seed;  // default: run_seed
};

struct InitConfig {
  // "constant": every entry equals `value` above the optimum (quadratic) or
  // equals `value` (other models). "gaussian": N(0, scale^2) entries, added
  // to the optimum for quadratics.
  std::string kind;
  double value = 0.5;
  double scale = 0.1;
};

enum class ByzantineKind : std::uint8_t { kReverse, kRandom };

struct ByzantineConfig {
  std::size_t count = 0;
  ByzantineKind kind = ByzantineKind::kReverse;
};

struct ExperimentConfig {
  AggregationRule rule = AggregationRule::FeedSign();
  ModelKind model = ModelKind::kQuadratic;
  std::size_t d = 0;
  std::vector<std::size_t> hidden;
  int classes = 2;
  SpectrumConfig spectrum;
  double hetero_spread = 0.0;
  bool batch_noise = false;
  InitConfig init;
  DatasetConfig dataset;
  std::size_t clients = 0;  // "K"
  std::uint64_t steps = 0;  // "T"
  std::size_t batch_size = 16;  // "B"
  double eta = 0.0;
  double mu = kDefaultMu;
  std::optional<double> beta;
  ByzantineConfig byzantine;
  bool het_noise = false;
  std::optional<double> epsilon;
  std::uint64_t run_seed = 0;
  std::optional<std::uint64_t> dp_seed;
  std::uint64_t eval_every = 1;
  std::optional<std::string> out_dir;
  bool shared_direction = false;
};

// Throws ConfigError (with the offending field path) on syntax errors,
// unknown or mistyped fields, and constraint violations.
ExperimentConfig ParseConfig(const std::string& text);
ExperimentConfig LoadConfig(const std::string& path);

// A config file may also hold a JSON array of configs (a sweep).
std::vector<ExperimentConfig> ParseConfigList(const std::string& text);

ModelSpec BuildModel(const ExperimentConfig& config);
// The initial federation state: dataset, shards, roles, per-client
// objectives and initial params.
FederationState BuildState(const ExperimentConfig& config);

TrainingResult RunExperiment(const ExperimentConfig& config);

}  // namespace feedsign

#endif  // FEEDSIGN_CONFIG_H_
