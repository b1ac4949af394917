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

#ifndef FEEDSIGN_COMMANDS_H_
#define FEEDSIGN_COMMANDS_H_

// The subcommands of the `feedsign` tool, callable as library functions.
// Each returns a process exit code and writes diagnostics to `err`.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feedsign/federation.h"

namespace feedsign {

// %.17g, with "nan" for NaN.
std::string FormatDouble(double x);

inline constexpr const char* kHistoryHeader =
    "step,loss,accuracy,vote_plus,vote_minus,uplink_bits,downlink_bits";
std::string HistoryCsv(std::span<const RoundReport> history);

// Raw little-endian IEEE-754 doubles, no header.
void WriteParamsFile(const std::string& path, std::span<const double> params);
ParamVector ReadParamsFile(const std::string& path);

struct TrainOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  unsigned jobs = 1;
};

// Writes history.csv, initial.params, final.params and (except for FedSGD)
// run.orbit. A config holding a JSON array runs each element into
// <out_dir>/<index>, fanning out over up to `jobs` processes.
int CmdTrain(const TrainOptions& options, std::ostream& err);

struct ReplayOptions {
  std::string orbit_path;
  std::string init_path;
  std::string out_path;
  // When set, the orbit's model digest must match this config's model.
  std::optional<std::string> config_path;
};

int CmdReplay(const ReplayOptions& options, std::ostream& err);

struct AnalyzeOptions {
  // floor_fit, sign_prob, half_normal or dp_check.
  std::string mode;
  std::optional<std::string> history_path;
  std::optional<std::string> config_path;
  std::optional<double> loss_star;
  std::uint64_t seed = 0;
  std::uint64_t samples = 100000;
  std::uint64_t dim = 1000;
  std::uint64_t batches = 1000;
  std::uint64_t directions = 1;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> clients;
  // Output CSV; stdout when unset.
  std::optional<std::string> out_path;
};

int CmdAnalyze(const AnalyzeOptions& options, std::ostream& out, std::ostream& err);

// Per-client row and class counts for the config's partition.
int CmdPartitionStats(const std::string& config_path, std::ostream& out, std::ostream& err);

// Reads (step, loss) pairs from a CSV with a header naming both columns;
// rows with a non-finite loss are skipped.
void ReadLossCsv(const std::string& path, std::vector<double>& steps,
                 std::vector<double>& losses);

}  // namespace feedsign

#endif  // FEEDSIGN_COMMANDS_H_
