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

#include "feedsign/config.h"

#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "feedsign/errors.h"
#include "json.hpp"

namespace feedsign {
namespace {

using Json = nlohmann::json;

// Reads fields from one JSON object, remembering which keys were consumed so
// leftovers can be reported.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(Where(""), "expected an object");
  }

  bool Has(const std::string& key) const { return j_.contains(key); }

  std::string Where(const std::string& key) const {
    if (path_.empty()) return key;
    if (key.empty()) return path_;
    return path_ + "." + key;
  }

  const Json& Raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::optional<double> Number(const std::string& key) {
    if (!Has(key)) return std::nullopt;
    const Json& v = Raw(key);
    if (!v.is_number()) throw ConfigError(Where(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(Where(key), "must be finite");
    return x;
  }

  std::optional<std::uint64_t> Unsigned(const std::string& key) {
    if (!Has(key)) return std::nullopt;
    const Json& v = Raw(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned())) {
      throw ConfigError(Where(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::optional<bool> Bool(const std::string& key) {
    if (!Has(key)) return std::nullopt;
    const Json& v = Raw(key);
    if (!v.is_boolean()) throw ConfigError(Where(key), "expected true or false");
    return v.get<bool>();
  }

  std::optional<std::string> String(const std::string& key) {
    if (!Has(key)) return std::nullopt;
    const Json& v = Raw(key);
    if (!v.is_string()) throw ConfigError(Where(key), "expected a string");
    return v.get<std::string>();
  }

  template <typename T>
  T Require(std::optional<T> v, const std::string& key) {
    if (!v) throw ConfigError(Where(key), "required field is missing");
    return *v;
  }

  void RejectUnknown() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(Where(item.key()), "unknown field");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void Check(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

ExperimentConfig ParseObject(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  ExperimentConfig c;

  const std::string rule = r.Require(r.String("rule"), "rule");
  RuleKind kind;
  try {
    kind = ParseRuleName(rule);
  } catch (const AggregationError& e) {
    throw ConfigError(r.Where("rule"), e.what());
  }
  c.epsilon = r.Number("epsilon");
  if (c.epsilon && kind != RuleKind::kDpFeedSign) {
    throw ConfigError(r.Where("epsilon"), "only allowed with rule \"dp_feedsign\"");
  }
  switch (kind) {
    case RuleKind::kFedSgd:
      c.rule = AggregationRule::FedSgd();
      break;
    case RuleKind::kZoFedSgd:
      c.rule = AggregationRule::ZoFedSgd();
      break;
    case RuleKind::kFeedSign:
      c.rule = AggregationRule::FeedSign();
      break;
    case RuleKind::kDpFeedSign:
      if (!c.epsilon) throw ConfigError(r.Where("epsilon"), "required for dp_feedsign");
      Check(*c.epsilon > 0, r.Where("epsilon"), "must be positive");
      c.rule = AggregationRule::DpFeedSign(*c.epsilon);
      break;
  }

  const std::string model = r.Require(r.String("model"), "model");
  if (model == "quadratic") {
    c.model = ModelKind::kQuadratic;
  } else if (model == "logistic") {
    c.model = ModelKind::kLogistic;
  } else if (model == "mlp") {
    c.model = ModelKind::kMlp;
  } else {
    throw ConfigError(r.Where("model"), "expected quadratic, logistic or mlp");
  }
  c.d = r.Require(r.Unsigned("d"), "d");
  Check(c.d >= 1, r.Where("d"), "must be at least 1");

  if (r.Has("hidden")) {
    Check(c.model == ModelKind::kMlp, r.Where("hidden"), "only allowed with model \"mlp\"");
    const Json& h = r.Raw("hidden");
    Check(h.is_array(), r.Where("hidden"), "expected an array of layer widths");
    for (std::size_t i = 0; i < h.size(); ++i) {
      const std::string where = r.Where("hidden") + "[" + std::to_string(i) + "]";
      Check(h[i].is_number_unsigned() && h[i].get<std::uint64_t>() > 0, where,
            "expected a positive integer");
      c.hidden.push_back(h[i].get<std::size_t>());
    }
  }
  if (auto v = r.Unsigned("classes")) {
    Check(*v >= 2, r.Where("classes"), "must be at least 2");
    Check(c.model != ModelKind::kLogistic || *v == 2, r.Where("classes"),
          "logistic regression is binary");
    c.classes = static_cast<int>(*v);
  }

  const bool quadratic = c.model == ModelKind::kQuadratic;
  if (r.Has("spectrum")) {
    Check(quadratic, r.Where("spectrum"), "only allowed with model \"quadratic\"");
    ObjectReader s(r.Raw("spectrum"), r.Where("spectrum"));
    c.spectrum.kind = s.String("kind").value_or("spiked");
    if (c.spectrum.kind == "spiked") {
      c.spectrum.top = s.Number("top").value_or(1.0);
      c.spectrum.top_count = s.Unsigned("top_count");
      c.spectrum.tail = s.Number("tail").value_or(1.0);
      if (c.spectrum.top_count) {
        Check(*c.spectrum.top_count <= c.d, s.Where("top_count"), "must not exceed d");
      }
      Check(c.spectrum.top >= 0 && c.spectrum.tail >= 0, s.Where(""),
            "eigenvalues must be non-negative");
    } else if (c.spectrum.kind == "linspace") {
      c.spectrum.low = s.Require(s.Number("low"), "low");
      c.spectrum.high = s.Require(s.Number("high"), "high");
      Check(c.spectrum.low >= 0 && c.spectrum.high >= 0, s.Where(""),
            "eigenvalues must be non-negative");
    } else {
      throw ConfigError(s.Where("kind"), "expected spiked or linspace");
    }
    s.RejectUnknown();
  }
  if (auto v = r.Number("hetero_spread")) {
    Check(quadratic, r.Where("hetero_spread"), "only allowed with model \"quadratic\"");
    Check(*v >= 0, r.Where("hetero_spread"), "must be non-negative");
    c.hetero_spread = *v;
  }
  if (auto v = r.Bool("batch_noise")) {
    Check(quadratic, r.Where("batch_noise"), "only allowed with model \"quadratic\"");
    c.batch_noise = *v;
  }

  c.init.kind = quadratic ? "constant" : "gaussian";
  if (r.Has("init")) {
    ObjectReader s(r.Raw("init"), r.Where("init"));
    c.init.kind = s.String("kind").value_or(c.init.kind);
    Check(c.init.kind == "constant" || c.init.kind == "gaussian", s.Where("kind"),
          "expected constant or gaussian");
    c.init.value = s.Number("value").value_or(c.init.value);
    c.init.scale = s.Number("scale").value_or(c.init.scale);
    Check(c.init.scale >= 0, s.Where("scale"), "must be non-negative");
    s.RejectUnknown();
  }

  if (r.Has("dataset")) {
    ObjectReader s(r.Raw("dataset"), r.Where("dataset"));
    c.dataset.path = s.String("path");
    if (auto v = s.Unsigned("samples")) {
      Check(!c.dataset.path, s.Where("samples"), "not allowed together with path");
      Check(*v >= 1, s.Where("samples"), "must be at least 1");
      c.dataset.samples = *v;
    }
    if (auto v = s.Number("separation")) {
      Check(!c.dataset.path, s.Where("separation"), "not allowed together with path");
      Check(*v >= 0, s.Where("separation"), "must be non-negative");
      c.dataset.separation = *v;
    }
    if (auto v = s.Number("noise_scale")) {
      Check(!c.dataset.path, s.Where("noise_scale"), "not allowed together with path");
      Check(*v >= 0, s.Where("noise_scale"), "must be non-negative");
      c.dataset.noise_scale = *v;
    }
    c.dataset.seed = s.Unsigned("seed");
    s.RejectUnknown();
  }

  c.clients = r.Require(r.Unsigned("K"), "K");
  Check(c.clients >= 1, r.Where("K"), "must be at least 1");
  c.steps = r.Require(r.Unsigned("T"), "T");
  c.batch_size = r.Unsigned("B").value_or(c.batch_size);
  Check(c.batch_size >= 1, r.Where("B"), "must be at least 1");
  c.eta = r.Require(r.Number("eta"), "eta");
  Check(c.eta > 0, r.Where("eta"), "must be positive");
  c.mu = r.Number("mu").value_or(c.mu);
  Check(c.mu > 0, r.Where("mu"), "must be positive");
  c.beta = r.Number("beta");
  if (c.beta) Check(*c.beta > 0, r.Where("beta"), "must be positive");

  if (r.Has("byzantine")) {
    ObjectReader s(r.Raw("byzantine"), r.Where("byzantine"));
    c.byzantine.count = s.Unsigned("count").value_or(0);
    const std::string k = s.String("kind").value_or("reverse");
    if (k == "reverse") {
      c.byzantine.kind = ByzantineKind::kReverse;
    } else if (k == "random") {
      c.byzantine.kind = ByzantineKind::kRandom;
    } else {
      throw ConfigError(s.Where("kind"), "expected reverse or random");
    }
    Check(c.byzantine.count < c.clients, s.Where("count"), "must be less than K");
    s.RejectUnknown();
  }
  c.het_noise = r.Bool("het_noise").value_or(false);
  c.run_seed = r.Unsigned("run_seed").value_or(0);
  c.dp_seed = r.Unsigned("dp_seed");
  if (c.dp_seed) {
    Check(kind == RuleKind::kDpFeedSign, r.Where("dp_seed"),
          "only allowed with rule \"dp_feedsign\"");
  }
  c.eval_every = r.Unsigned("eval_every").value_or(1);
  Check(c.eval_every >= 1, r.Where("eval_every"), "must be at least 1");
  c.out_dir = r.String("out_dir");
  c.shared_direction = r.Bool("shared_direction").value_or(false);
  if (c.shared_direction) {
    Check(kind == RuleKind::kZoFedSgd, r.Where("shared_direction"),
          "only allowed with rule \"zo_fedsgd\"");
  }
  r.RejectUnknown();
  return c;
}

Json ParseJson(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", std::string("JSON syntax error: ") + e.what());
  }
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> Eigenvalues(const ExperimentConfig& c) {
  if (c.spectrum.kind == "linspace") {
    std::vector<double> e(c.d);
    for (std::size_t i = 0; i < c.d; ++i) {
      const double f = c.d == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(c.d - 1);
      e[i] = c.spectrum.low + (c.spectrum.high - c.spectrum.low) * f;
    }
    return e;
  }
  return SpikedSpectrum(c.d, c.spectrum.top_count.value_or(c.d), c.spectrum.top,
                        c.spectrum.tail);
}

Seed Derived(const ExperimentConfig& c, StreamDomain domain) {
  return Seed{Hash64({c.run_seed, static_cast<std::uint64_t>(domain)})};
}

std::shared_ptr<const Dataset> BuildDataset(const ExperimentConfig& c) {
  const Seed seed{c.dataset.seed.value_or(c.run_seed)};
  if (c.dataset.path) {
    Dataset data = LoadCsvDataset(*c.dataset.path);
    const bool needs_cols = c.model != ModelKind::kQuadratic || c.batch_noise;
    if (needs_cols && data.cols != c.d) {
      throw ConfigError("dataset.path", "dataset has " + std::to_string(data.cols) +
                                            " feature columns but d = " +
                                            std::to_string(c.d));
    }
    for (int label : data.labels) {
      if (label < 0 || label >= c.classes) {
        throw ConfigError("dataset.path", "label " + std::to_string(label) +
                                              " outside [0, classes)");
      }
    }
    data.classes = c.classes;
    return std::make_shared<const Dataset>(std::move(data));
  }
  switch (c.model) {
    case ModelKind::kLogistic:
    case ModelKind::kMlp:
      return std::make_shared<const Dataset>(MakeGaussianBlobs(
          c.dataset.samples, c.d, c.classes, c.dataset.separation, seed));
    case ModelKind::kQuadratic:
      break;
  }
  if (c.batch_noise) {
    return std::make_shared<const Dataset>(
        MakeSymmetricNoise(c.dataset.samples, c.d, c.dataset.noise_scale, seed));
  }
  // Featureless rows: they only give clients a size for loss weighting.
  Dataset data;
  data.rows = c.dataset.samples;
  data.cols = 0;
  data.classes = 1;
  data.labels.assign(data.rows, 0);
  return std::make_shared<const Dataset>(std::move(data));
}

}  // namespace

ExperimentConfig ParseConfig(const std::string& text) {
  return ParseObject(ParseJson(text), "");
}

std::vector<ExperimentConfig> ParseConfigList(const std::string& text) {
  const Json j = ParseJson(text);
  std::vector<ExperimentConfig> out;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(ParseObject(j[i], "[" + std::to_string(i) + "]"));
    }
  } else {
    out.push_back(ParseObject(j, ""));
  }
  return out;
}

ExperimentConfig LoadConfig(const std::string& path) { return ParseConfig(ReadFile(path)); }

ModelSpec BuildModel(const ExperimentConfig& c) {
  switch (c.model) {
    case ModelKind::kQuadratic:
      return Quadratic{Eigenvalues(c), ParamVector(c.d, 0.0), c.batch_noise};
    case ModelKind::kLogistic:
      return Logistic{c.d};
    case ModelKind::kMlp: {
      Mlp m;
      m.layers.push_back(c.d);
      m.layers.insert(m.layers.end(), c.hidden.begin(), c.hidden.end());
      m.layers.push_back(static_cast<std::size_t>(c.classes));
      return m;
    }
  }
  throw ConfigError("model", "unknown model");
}

FederationState BuildState(const ExperimentConfig& c) {
  FederationState s;
  s.model = BuildModel(c);
  s.data = BuildDataset(c);
  s.rule = c.rule;
  s.eta = c.eta;
  s.mu = c.mu;
  s.run_seed = Seed{c.run_seed};
  s.dp_seed = Seed{c.dp_seed.value_or(Derived(c, StreamDomain::kPrivacy).value)};
  s.shared_direction = c.shared_direction;

  const Seed partition_seed = Derived(c, StreamDomain::kPartition);
  s.shards = c.beta ? PartitionDirichlet(*s.data, c.clients, *c.beta, partition_seed)
                    : PartitionIid(*s.data, c.clients, partition_seed);
  const ClientRole attacker = c.byzantine.kind == ByzantineKind::kReverse
                                  ? ClientRole::kByzantineReverse
                                  : ClientRole::kByzantineRandom;
  for (auto& shard : s.shards) {
    shard.batch_size = c.batch_size;
    shard.het_noise = c.het_noise;
    // Attackers are the last `count` clients.
    if (shard.client + c.byzantine.count >= c.clients) shard.role = attacker;
  }

  const std::size_t d = ParamCount(s.model);
  if (c.model == ModelKind::kQuadratic && c.hetero_spread > 0) {
    // Client optima w* + sigma_h xi_k with the xi_k centred across clients.
    const auto& q = std::get<Quadratic>(s.model);
    DirectionStream stream(Derived(c, StreamDomain::kHeterogeneity),
                           StreamDomain::kHeterogeneity);
    std::vector<ParamVector> xi(c.clients, ParamVector(d));
    ParamVector mean(d, 0.0);
    for (auto& x : xi) {
      for (std::size_t i = 0; i < d; ++i) {
        x[i] = stream.NextGaussian();
        mean[i] += x[i];
      }
    }
    for (auto& m : mean) m /= static_cast<double>(c.clients);
    for (std::size_t k = 0; k < c.clients; ++k) {
      Quadratic qk = q;
      for (std::size_t i = 0; i < d; ++i) {
        qk.optimum[i] += c.hetero_spread * (xi[k][i] - mean[i]);
      }
      s.client_models.push_back(std::move(qk));
    }
  }

  s.params.assign(d, 0.0);
  DirectionStream init(Derived(c, StreamDomain::kInit), StreamDomain::kInit);
  const auto* q = std::get_if<Quadratic>(&s.model);
  for (std::size_t i = 0; i < d; ++i) {
    const double base = q != nullptr ? q->optimum[i] : 0.0;
    s.params[i] = base + (c.init.kind == "constant" ? c.init.value
                                                    : c.init.scale * init.NextGaussian());
  }
  return s;
}

TrainingResult RunExperiment(const ExperimentConfig& c) {
  return RunTraining(BuildState(c), c.steps, c.eval_every);
}

}  // namespace feedsign
