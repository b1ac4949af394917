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

#include "feedsign/commands.h"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "feedsign/analysis.h"
#include "feedsign/config.h"
#include "feedsign/errors.h"
#include "feedsign/orbit.h"

namespace feedsign {
namespace {

namespace fs = std::filesystem;

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

int TrainOne(const ExperimentConfig& config, const fs::path& dir, std::ostream& err) {
  fs::create_directories(dir);
  spdlog::info("training {} for {} steps into {}", RuleName(config.rule.kind()),
               config.steps, dir.string());
  const TrainingResult result = RunExperiment(config);
  WriteText(dir / "history.csv", HistoryCsv(result.history));
  WriteParamsFile((dir / "initial.params").string(), result.initial);
  WriteParamsFile((dir / "final.params").string(), result.final_params);
  if (config.rule.kind() != RuleKind::kFedSgd) {
    WriteOrbitFile((dir / "run.orbit").string(), result.orbit);
  }
  if (result.error) {
    err << "error: training aborted at " << *result.error << "\n";
    return 1;
  }
  spdlog::info("done: final loss {}",
               result.history.empty() ? std::string("n/a")
                                      : FormatDouble(result.history.back().global_loss));
  return 0;
}

// Runs f(i) for i in [0, n) over up to `jobs` child processes.
template <typename F>
int FanOut(std::size_t n, unsigned jobs, F f) {
  int status_all = 0;
  std::size_t next = 0, running = 0;
  while (next < n || running > 0) {
    while (next < n && running < jobs) {
      std::cout.flush();
      std::cerr.flush();
      const pid_t pid = fork();
      if (pid < 0) throw Error("fork failed");
      if (pid == 0) _exit(f(next));
      ++next;
      ++running;
    }
    int status = 0;
    if (wait(&status) > 0) {
      --running;
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) status_all = 1;
    }
  }
  return status_all;
}

template <typename F>
int Guard(std::ostream& err, F f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    // what() already leads with the field path.
    err << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 1;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double ParseNumber(const std::string& s, const std::string& what) {
  if (s == "nan") return std::nan("");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError("bad number '" + s + "' in " + what);
  }
  if (used != s.size()) throw DataError("bad number '" + s + "' in " + what);
  return v;
}

}  // namespace

std::string FormatDouble(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string HistoryCsv(std::span<const RoundReport> history) {
  std::string out = std::string(kHistoryHeader) + "\n";
  for (const RoundReport& r : history) {
    out += std::to_string(r.step) + "," + FormatDouble(r.global_loss) + "," +
           FormatDouble(r.accuracy) + "," + std::to_string(r.tally.plus) + "," +
           std::to_string(r.tally.minus) + "," + std::to_string(r.uplink_bits) + "," +
           std::to_string(r.downlink_bits) + "\n";
  }
  return out;
}

void WriteParamsFile(const std::string& path, std::span<const double> params) {
  std::string bytes(params.size() * 8, '\0');
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(params[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  WriteText(path, bytes);
}

ParamVector ReadParamsFile(const std::string& path) {
  const std::string bytes = ReadText(path);
  if (bytes.size() % 8 != 0) {
    throw DataError(path + ": size " + std::to_string(bytes.size()) +
                    " is not a multiple of 8");
  }
  ParamVector params(bytes.size() / 8);
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b]))
              << (8 * b);
    }
    params[i] = std::bit_cast<double>(bits);
  }
  return params;
}

void ReadLossCsv(const std::string& path, std::vector<double>& steps,
                 std::vector<double>& losses) {
  std::istringstream in(ReadText(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = SplitCsvLine(line);
  const auto step_col = std::find(header.begin(), header.end(), "step") - header.begin();
  const auto loss_col = std::find(header.begin(), header.end(), "loss") - header.begin();
  if (step_col == static_cast<long>(header.size()) ||
      loss_col == static_cast<long>(header.size())) {
    throw DataError(path + ": header needs 'step' and 'loss' columns");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = SplitCsvLine(line);
    const auto need = static_cast<std::size_t>(std::max(step_col, loss_col));
    if (cells.size() <= need) {
      throw DataError(path + ":" + std::to_string(line_no) + ": too few columns");
    }
    const std::string where = path + ":" + std::to_string(line_no);
    const double loss = ParseNumber(cells[loss_col], where);
    if (!std::isfinite(loss)) continue;
    steps.push_back(ParseNumber(cells[step_col], where));
    losses.push_back(loss);
  }
}

int CmdTrain(const TrainOptions& options, std::ostream& err) {
  return Guard(err, [&] {
    const std::string text = ReadText(options.config_path);
    std::vector<ExperimentConfig> configs = ParseConfigList(text);
    const bool sweep = !text.empty() &&
                       text.find_first_not_of(" \t\r\n") != std::string::npos &&
                       text[text.find_first_not_of(" \t\r\n")] == '[';
    auto dir_for = [&](std::size_t i) -> fs::path {
      const auto& c = configs[i];
      if (options.out_dir) {
        return sweep ? fs::path(*options.out_dir) / std::to_string(i) : fs::path(*options.out_dir);
      }
      if (c.out_dir) return *c.out_dir;
      throw ConfigError(sweep ? "[" + std::to_string(i) + "].out_dir" : "out_dir",
                        "no output directory (pass --out-dir or set out_dir)");
    };
    std::vector<fs::path> dirs;
    for (std::size_t i = 0; i < configs.size(); ++i) dirs.push_back(dir_for(i));
    if (options.jobs <= 1 || configs.size() == 1) {
      int status = 0;
      for (std::size_t i = 0; i < configs.size(); ++i) {
        status |= TrainOne(configs[i], dirs[i], err);
      }
      return status;
    }
    return FanOut(configs.size(), options.jobs, [&](std::size_t i) {
      return Guard(err, [&] { return TrainOne(configs[i], dirs[i], err); });
    });
  });
}

int CmdReplay(const ReplayOptions& options, std::ostream& err) {
  return Guard(err, [&] {
    const Orbit orbit = ReadOrbitFile(options.orbit_path);
    const ParamVector init = ReadParamsFile(options.init_path);
    std::optional<std::uint64_t> digest;
    if (options.config_path) digest = SpecDigest(BuildModel(LoadConfig(*options.config_path)));
    const ParamVector out = Replay(init, orbit, digest);
    WriteParamsFile(options.out_path, out);
    spdlog::info("replayed {} steps", orbit.size());
    return 0;
  });
}

int CmdAnalyze(const AnalyzeOptions& o, std::ostream& out_default, std::ostream& err) {
  return Guard(err, [&] {
    std::ostringstream out;
    if (o.mode == "floor_fit") {
      if (!o.history_path) throw ConfigError("history", "floor_fit needs --history");
      double loss_star = 0.0;
      if (o.loss_star) {
        loss_star = *o.loss_star;
      } else if (o.config_path) {
        const auto l = OptimalLoss(BuildState(LoadConfig(*o.config_path)));
        if (!l) throw AnalysisError("optimal loss is only known for quadratic models");
        loss_star = *l;
      } else {
        throw ConfigError("loss_star", "floor_fit needs --loss-star or --config");
      }
      std::vector<double> steps, losses;
      ReadLossCsv(*o.history_path, steps, losses);
      for (double& l : losses) l -= loss_star;
      const FloorFit fit = FitErrorFloor(steps, losses);
      out << "a,c_tilde,initial_gap,residual,r_squared,points,loss_star\n"
          << FormatDouble(fit.a) << "," << FormatDouble(fit.c_tilde) << ","
          << FormatDouble(fit.initial_gap) << "," << FormatDouble(fit.residual) << ","
          << FormatDouble(fit.r_squared) << "," << fit.points << ","
          << FormatDouble(loss_star) << "\n";
    } else if (o.mode == "sign_prob") {
      if (!o.config_path) throw ConfigError("config", "sign_prob needs --config");
      const ExperimentConfig c = LoadConfig(*o.config_path);
      const FederationState s = BuildState(c);
      out << "direction_seed,true_projection,p_hat,reversed,batches,batch_size,margin\n";
      for (std::uint64_t j = 0; j < o.directions; ++j) {
        const auto est = EstimateSignReversingProb(
            s.model, s.params, Seed{j}, *s.data, c.batch_size, o.batches,
            Seed{Hash64({o.seed, j})}, c.mu);
        out << j << "," << FormatDouble(est.true_projection) << ","
            << FormatDouble(est.p_hat) << "," << est.reversed << "," << est.batches << ","
            << est.batch_size << "," << FormatDouble(BinomialMargin(0.5, est.batches))
            << "\n";
      }
    } else if (o.mode == "half_normal") {
      DirectionStream stream(Seed{o.seed}, StreamDomain::kAnalysis);
      const ParamVector g = GaussianDirection(stream, o.dim);
      const double est = HalfNormalCheck(g, o.samples, Seed{Hash64({o.seed, 1})});
      const double expected = HalfNormalMean(g);
      out << "dim,samples,estimate,expected,relative_error\n"
          << o.dim << "," << o.samples << "," << FormatDouble(est) << ","
          << FormatDouble(expected) << ","
          << FormatDouble(std::abs(est - expected) / expected) << "\n";
    } else if (o.mode == "dp_check") {
      if (!o.epsilon) throw ConfigError("epsilon", "dp_check needs --epsilon");
      if (!o.clients) throw ConfigError("clients", "dp_check needs --clients");
      const DpRatioReport r = DpRatioCheck(*o.clients, *o.epsilon);
      out << "clients,epsilon,max_ratio,bound,pairs,within_bound\n"
          << r.clients << "," << FormatDouble(r.epsilon) << "," << FormatDouble(r.max_ratio)
          << "," << FormatDouble(r.bound) << "," << r.pairs << ","
          << (r.max_ratio <= r.bound ? 1 : 0) << "\n";
    } else {
      throw ConfigError("mode", "unknown analyze mode '" + o.mode +
                                    "' (floor_fit, sign_prob, half_normal, dp_check)");
    }
    if (o.out_path) {
      WriteText(*o.out_path, out.str());
    } else {
      out_default << out.str();
    }
    return 0;
  });
}

int CmdPartitionStats(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return Guard(err, [&] {
    const FederationState s = BuildState(LoadConfig(config_path));
    out << "client,rows";
    for (int c = 0; c < s.data->classes; ++c) out << ",class_" << c;
    out << "\n";
    for (const auto& shard : s.shards) {
      std::vector<std::size_t> counts(static_cast<std::size_t>(s.data->classes), 0);
      for (std::size_t r : shard.indices) ++counts[static_cast<std::size_t>(s.data->labels[r])];
      out << shard.client << "," << shard.indices.size();
      for (std::size_t n : counts) out << "," << n;
      out << "\n";
    }
    return 0;
  });
}

}  // namespace feedsign
