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

// feedsign: train, replay and analyze federated zeroth-order runs.

#include <cstdlib>
#include <iostream>
#include <string>

#include <spdlog/cfg/env.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "feedsign/commands.h"

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  // FEEDSIGN_LOG=debug|info|warn|error|off
  if (const char* level = std::getenv("FEEDSIGN_LOG")) spdlog::cfg::helpers::load_levels(level);

  CLI::App app{"Federated zeroth-order fine-tuning simulator"};
  app.require_subcommand(1);

  feedsign::TrainOptions train;
  std::string out_dir;
  auto* train_cmd = app.add_subcommand("train", "Run one experiment (or a JSON array of them)");
  train_cmd->add_option("--config", train.config_path, "Experiment config (JSON)")->required();
  train_cmd->add_option("--out-dir", out_dir, "Output directory");
  train_cmd->add_option("--jobs", train.jobs, "Parallel processes for config arrays")
      ->check(CLI::PositiveNumber);

  feedsign::ReplayOptions replay;
  std::string replay_config;
  auto* replay_cmd = app.add_subcommand("replay", "Rebuild parameters from an orbit");
  replay_cmd->add_option("--orbit", replay.orbit_path, "Orbit file")->required();
  replay_cmd->add_option("--init", replay.init_path, "Initial parameters")->required();
  replay_cmd->add_option("--out", replay.out_path, "Output parameters")->required();
  replay_cmd->add_option("--config", replay_config, "Check the model digest against a config");

  feedsign::AnalyzeOptions analyze;
  std::string history, analyze_config, analyze_out;
  double loss_star = 0.0, epsilon = 0.0;
  std::uint64_t clients = 0;
  auto* analyze_cmd = app.add_subcommand("analyze", "Empirical checks, written as CSV");
  analyze_cmd->add_option("--mode", analyze.mode, "floor_fit, sign_prob, half_normal, dp_check")
      ->required()
      ->check(CLI::IsMember({"floor_fit", "sign_prob", "half_normal", "dp_check"}));
  auto* history_opt = analyze_cmd->add_option("--history", history, "Loss CSV (floor_fit)");
  auto* analyze_config_opt =
      analyze_cmd->add_option("--config", analyze_config, "Experiment config");
  auto* loss_star_opt = analyze_cmd->add_option("--loss-star", loss_star, "Optimal loss");
  analyze_cmd->add_option("--seed", analyze.seed, "Sampler seed");
  analyze_cmd->add_option("--samples", analyze.samples, "Monte Carlo samples (half_normal)");
  analyze_cmd->add_option("--dim", analyze.dim, "Gradient dimension (half_normal)");
  analyze_cmd->add_option("--batches", analyze.batches, "Batches per direction (sign_prob)");
  analyze_cmd->add_option("--directions", analyze.directions, "Directions (sign_prob)");
  auto* epsilon_opt = analyze_cmd->add_option("--epsilon", epsilon, "Privacy level (dp_check)");
  auto* clients_opt = analyze_cmd->add_option("--clients", clients, "Clients (dp_check)");
  auto* analyze_out_opt = analyze_cmd->add_option("--out", analyze_out, "Output CSV");

  std::string stats_config;
  auto* stats_cmd =
      app.add_subcommand("partition-stats", "Per-client row and class counts");
  stats_cmd->add_option("--config", stats_config, "Experiment config")->required();

  CLI11_PARSE(app, argc, argv);

  if (*train_cmd) {
    if (!out_dir.empty()) train.out_dir = out_dir;
    return feedsign::CmdTrain(train, std::cerr);
  }
  if (*replay_cmd) {
    if (!replay_config.empty()) replay.config_path = replay_config;
    return feedsign::CmdReplay(replay, std::cerr);
  }
  if (*analyze_cmd) {
    if (*history_opt) analyze.history_path = history;
    if (*analyze_config_opt) analyze.config_path = analyze_config;
    if (*loss_star_opt) analyze.loss_star = loss_star;
    if (*epsilon_opt) analyze.epsilon = epsilon;
    if (*clients_opt) analyze.clients = clients;
    if (*analyze_out_opt) analyze.out_path = analyze_out;
    return feedsign::CmdAnalyze(analyze, std::cout, std::cerr);
  }
  return feedsign::CmdPartitionStats(stats_config, std::cout, std::cerr);
}
