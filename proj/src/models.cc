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

#include "feedsign/models.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "feedsign/errors.h"
#include "feedsign/kernels.h"

namespace feedsign {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Samples per gradient-accumulation chunk; partial gradients are combined in
// chunk order so results do not depend on the thread count.
constexpr std::size_t kSampleChunk = 64;

void CheckParams(const ModelSpec& spec, std::span<const double> params) {
  const std::size_t want = ParamCount(spec);
  if (params.size() != want) {
    throw ShapeError(KindName(spec) + " expects " + std::to_string(want) +
                     " parameters, got " + std::to_string(params.size()));
  }
}

void CheckBatch(const Dataset& data, Batch batch, std::size_t cols) {
  if (batch.empty()) throw DataError("batch must contain at least one row");
  for (std::size_t i : batch) {
    if (i >= data.rows) {
      throw ShapeError("batch index " + std::to_string(i) +
                       " out of range for dataset of " +
                       std::to_string(data.rows) + " rows");
    }
  }
  if (data.cols != cols) {
    throw ShapeError("dataset has " + std::to_string(data.cols) +
                     " feature columns, model expects " + std::to_string(cols));
  }
}

// log(1 + exp(x)) without overflow.
inline double Softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Mean of per-row terms, rows processed in parallel and summed in order.
template <typename RowFn>
double MeanOverBatch(Batch batch, RowFn row_term) {
  std::vector<double> terms(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static) if (n >= 256)
  for (std::ptrdiff_t j = 0; j < n; ++j) terms[j] = row_term(batch[j]);
  return kernels::Sum(terms) / static_cast<double>(batch.size());
}

// Mean of per-row gradients: each chunk of rows accumulates into its own
// buffer, then buffers are added in chunk order.
template <typename RowGradFn>
ParamVector MeanGradOverBatch(std::size_t dim, Batch batch,
                              RowGradFn add_row_grad) {
  const std::size_t chunks = (batch.size() + kSampleChunk - 1) / kSampleChunk;
  std::vector<ParamVector> partial(chunks, ParamVector(dim, 0.0));
  const auto count = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static) if (count >= 4)
  for (std::ptrdiff_t c = 0; c < count; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kSampleChunk;
    const std::size_t end = std::min(batch.size(), begin + kSampleChunk);
    for (std::size_t j = begin; j < end; ++j) add_row_grad(batch[j], partial[c]);
  }
  ParamVector g(dim, 0.0);
  for (const ParamVector& p : partial) {
    for (std::size_t i = 0; i < dim; ++i) g[i] += p[i];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : g) v *= inv;
  return g;
}

// Batch mean of the feature rows (quadratic batch-noise term).
ParamVector BatchMean(const Dataset& data, Batch batch) {
  ParamVector mean(data.cols, 0.0);
  for (std::size_t j : batch) {
    const auto row = data.Row(j);
    for (std::size_t i = 0; i < data.cols; ++i) mean[i] += row[i];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : mean) v *= inv;
  return mean;
}

// --- MLP ---------------------------------------------------------------------

struct LayerView {
  std::size_t in, out, weight_offset, bias_offset;
};

std::vector<LayerView> Layout(const Mlp& mlp) {
  std::vector<LayerView> views;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < mlp.layers.size(); ++l) {
    const std::size_t in = mlp.layers[l], out = mlp.layers[l + 1];
    views.push_back({in, out, offset, offset + in * out});
    offset += in * out + out;
  }
  return views;
}

// Activations of every layer for one row; the last entry holds the logits.
std::vector<std::vector<double>> Forward(const std::vector<LayerView>& layout,
                                         std::span<const double> params,
                                         std::span<const double> x) {
  std::vector<std::vector<double>> acts;
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const LayerView& v = layout[l];
    const std::vector<double>& a = acts.back();
    std::vector<double> next(v.out);
    for (std::size_t o = 0; o < v.out; ++o) {
      double s = params[v.bias_offset + o];
      const double* w = params.data() + v.weight_offset + o * v.in;
      for (std::size_t i = 0; i < v.in; ++i) s += w[i] * a[i];
      next[o] = (l + 1 < layout.size()) ? std::tanh(s) : s;
    }
    acts.push_back(std::move(next));
  }
  return acts;
}

double CrossEntropy(std::span<const double> logits, int label) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  return m + std::log(z) - logits[label];
}

void CheckLabel(const Dataset& data, std::size_t row, int classes) {
  const int y = data.labels[row];
  if (y < 0 || y >= classes) {
    throw DataError("label " + std::to_string(y) + " at row " +
                    std::to_string(row) + " outside [0, " +
                    std::to_string(classes) + ")");
  }
}

void AppendDouble(std::vector<unsigned char>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

void AppendU64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

}  // namespace

std::vector<std::size_t> Dataset::IndicesOfClass(int c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows; ++i) {
    if (labels[i] == c) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dataset::ClassCounts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(classes, 1)), 0);
  for (int y : labels) {
    if (y >= 0 && static_cast<std::size_t>(y) < counts.size()) ++counts[y];
  }
  return counts;
}

std::vector<double> SpikedSpectrum(std::size_t dim, std::size_t top_count,
                                   double top, double tail) {
  std::vector<double> eig(dim, tail);
  std::fill_n(eig.begin(), std::min(top_count, dim), top);
  return eig;
}

double EffectiveRank(const Quadratic& q) {
  const double top = Smoothness(q);
  if (top <= 0) return 0.0;
  return std::accumulate(q.eigenvalues.begin(), q.eigenvalues.end(), 0.0) / top;
}

double Smoothness(const Quadratic& q) {
  if (q.eigenvalues.empty()) return 0.0;
  return *std::max_element(q.eigenvalues.begin(), q.eigenvalues.end());
}

double PlConstant(const Quadratic& q) {
  double best = 0.0;
  for (double e : q.eigenvalues) {
    if (e > 0 && (best == 0.0 || e < best)) best = e;
  }
  return best;
}

std::size_t ParamCount(const ModelSpec& spec) {
  return std::visit(
      Overloaded{
          [](const Quadratic& q) { return q.eigenvalues.size(); },
          [](const Logistic& l) { return l.features + 1; },
          [](const Mlp& m) {
            std::size_t n = 0;
            for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
              n += m.layers[l] * m.layers[l + 1] + m.layers[l + 1];
            }
            return n;
          },
      },
      spec);
}

std::string KindName(const ModelSpec& spec) {
  return std::visit(Overloaded{
                        [](const Quadratic&) { return std::string("quadratic"); },
                        [](const Logistic&) { return std::string("logistic"); },
                        [](const Mlp&) { return std::string("mlp"); },
                    },
                    spec);
}

std::uint64_t SpecDigest(const ModelSpec& spec) {
  std::vector<unsigned char> bytes;
  bytes.push_back(static_cast<unsigned char>(spec.index()));
  std::visit(Overloaded{
                 [&](const Quadratic& q) {
                   AppendU64(bytes, q.eigenvalues.size());
                   for (double e : q.eigenvalues) AppendDouble(bytes, e);
                   AppendU64(bytes, q.optimum.size());
                   for (double o : q.optimum) AppendDouble(bytes, o);
                   bytes.push_back(q.batch_noise ? 1 : 0);
                 },
                 [&](const Logistic& l) { AppendU64(bytes, l.features); },
                 [&](const Mlp& m) {
                   AppendU64(bytes, m.layers.size());
                   for (std::size_t s : m.layers) AppendU64(bytes, s);
                 },
             },
             spec);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double Loss(const ModelSpec& spec, std::span<const double> params,
            const Dataset& data, Batch batch) {
  CheckParams(spec, params);
  return std::visit(
      Overloaded{
          [&](const Quadratic& q) {
            if (q.optimum.size() != q.eigenvalues.size()) {
              throw ShapeError("quadratic optimum and spectrum differ in size");
            }
            double value =
                0.5 * kernels::WeightedSquaredDistance(q.eigenvalues, params, q.optimum);
            if (q.batch_noise) {
              CheckBatch(data, batch, q.eigenvalues.size());
              value -= kernels::Dot(BatchMean(data, batch), params);
            }
            return value;
          },
          [&](const Logistic& l) {
            CheckBatch(data, batch, l.features);
            const double bias = params[l.features];
            return MeanOverBatch(batch, [&](std::size_t r) {
              const auto x = data.Row(r);
              double s = bias;
              for (std::size_t i = 0; i < l.features; ++i) s += params[i] * x[i];
              const double y = data.labels[r] == 1 ? 1.0 : -1.0;
              return Softplus(-y * s);
            });
          },
          [&](const Mlp& m) {
            CheckBatch(data, batch, m.layers.front());
            const auto layout = Layout(m);
            const int classes = static_cast<int>(m.layers.back());
            for (std::size_t r : batch) CheckLabel(data, r, classes);
            return MeanOverBatch(batch, [&](std::size_t r) {
              const auto acts = Forward(layout, params, data.Row(r));
              return CrossEntropy(acts.back(), data.labels[r]);
            });
          },
      },
      spec);
}

ParamVector Grad(const ModelSpec& spec, std::span<const double> params,
                 const Dataset& data, Batch batch) {
  CheckParams(spec, params);
  return std::visit(
      Overloaded{
          [&](const Quadratic& q) {
            ParamVector g(params.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
              g[i] = q.eigenvalues[i] * (params[i] - q.optimum[i]);
            }
            if (q.batch_noise) {
              CheckBatch(data, batch, q.eigenvalues.size());
              const ParamVector mean = BatchMean(data, batch);
              for (std::size_t i = 0; i < g.size(); ++i) g[i] -= mean[i];
            }
            return g;
          },
          [&](const Logistic& l) {
            CheckBatch(data, batch, l.features);
            const double bias = params[l.features];
            return MeanGradOverBatch(
                params.size(), batch, [&](std::size_t r, ParamVector& acc) {
                  const auto x = data.Row(r);
                  double s = bias;
                  for (std::size_t i = 0; i < l.features; ++i) s += params[i] * x[i];
                  const double y = data.labels[r] == 1 ? 1.0 : -1.0;
                  // d/ds softplus(-y s) = -y sigmoid(-y s)
                  const double coef = -y * Sigmoid(-y * s);
                  for (std::size_t i = 0; i < l.features; ++i) acc[i] += coef * x[i];
                  acc[l.features] += coef;
                });
          },
          [&](const Mlp& m) {
            CheckBatch(data, batch, m.layers.front());
            const auto layout = Layout(m);
            const int classes = static_cast<int>(m.layers.back());
            for (std::size_t r : batch) CheckLabel(data, r, classes);
            return MeanGradOverBatch(
                params.size(), batch, [&](std::size_t r, ParamVector& acc) {
                  const auto acts = Forward(layout, params, data.Row(r));
                  // Softmax minus one-hot at the logits.
                  const std::vector<double>& logits = acts.back();
                  const double mx = *std::max_element(logits.begin(), logits.end());
                  std::vector<double> delta(logits.size());
                  double z = 0.0;
                  for (std::size_t c = 0; c < logits.size(); ++c) {
                    delta[c] = std::exp(logits[c] - mx);
                    z += delta[c];
                  }
                  for (double& d : delta) d /= z;
                  delta[data.labels[r]] -= 1.0;
                  for (std::size_t l = layout.size(); l-- > 0;) {
                    const LayerView& v = layout[l];
                    const std::vector<double>& a = acts[l];
                    for (std::size_t o = 0; o < v.out; ++o) {
                      double* gw = acc.data() + v.weight_offset + o * v.in;
                      for (std::size_t i = 0; i < v.in; ++i) gw[i] += delta[o] * a[i];
                      acc[v.bias_offset + o] += delta[o];
                    }
                    if (l == 0) break;
                    std::vector<double> prev(v.in, 0.0);
                    for (std::size_t o = 0; o < v.out; ++o) {
                      const double* w = params.data() + v.weight_offset + o * v.in;
                      for (std::size_t i = 0; i < v.in; ++i) prev[i] += w[i] * delta[o];
                    }
                    for (std::size_t i = 0; i < v.in; ++i) prev[i] *= 1.0 - a[i] * a[i];
                    delta = std::move(prev);
                  }
                });
          },
      },
      spec);
}

std::optional<double> Accuracy(const ModelSpec& spec,
                               std::span<const double> params,
                               const Dataset& data, Batch batch) {
  CheckParams(spec, params);
  return std::visit(
      Overloaded{
          [&](const Quadratic&) -> std::optional<double> { return std::nullopt; },
          [&](const Logistic& l) -> std::optional<double> {
            CheckBatch(data, batch, l.features);
            return MeanOverBatch(batch, [&](std::size_t r) {
              const auto x = data.Row(r);
              double s = params[l.features];
              for (std::size_t i = 0; i < l.features; ++i) s += params[i] * x[i];
              return ((s > 0) == (data.labels[r] == 1)) ? 1.0 : 0.0;
            });
          },
          [&](const Mlp& m) -> std::optional<double> {
            CheckBatch(data, batch, m.layers.front());
            const auto layout = Layout(m);
            return MeanOverBatch(batch, [&](std::size_t r) {
              const auto acts = Forward(layout, params, data.Row(r));
              const auto& logits = acts.back();
              const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
              return best == data.labels[r] ? 1.0 : 0.0;
            });
          },
      },
      spec);
}

std::vector<std::size_t> AllRows(const Dataset& data) {
  std::vector<std::size_t> rows(data.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

Dataset ParseCsvDataset(const std::string& text) {
  Dataset data;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> values;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (field.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw DataError("line " + std::to_string(line_no) + ": bad number '" + field + "'");
      }
    }
    if (values.size() < 2) {
      throw DataError("line " + std::to_string(line_no) + ": need a label and at least one feature");
    }
    const double label = values[0];
    if (label < 0 || label != std::floor(label)) {
      throw DataError("line " + std::to_string(line_no) + ": label must be a non-negative integer");
    }
    if (data.rows == 0) {
      data.cols = values.size() - 1;
    } else if (values.size() - 1 != data.cols) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(data.cols) + " features, got " +
                      std::to_string(values.size() - 1));
    }
    data.labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, static_cast<int>(label));
    data.features.insert(data.features.end(), values.begin() + 1, values.end());
    ++data.rows;
  }
  if (data.rows == 0) throw DataError("dataset is empty");
  data.classes = std::max(2, max_label + 1);
  return data;
}

Dataset LoadCsvDataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open dataset '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return ParseCsvDataset(buf.str());
}

Dataset MakeGaussianBlobs(std::size_t rows, std::size_t cols, int classes,
                          double separation, Seed seed) {
  if (classes < 2) throw DataError("need at least two classes");
  Dataset data;
  data.rows = rows;
  data.cols = cols;
  data.classes = classes;
  DirectionStream means_stream(Seed{Hash64({seed.value, 0})}, StreamDomain::kData);
  std::vector<ParamVector> means;
  for (int c = 0; c < classes; ++c) {
    ParamVector m = GaussianDirection(means_stream, cols);
    double norm = std::sqrt(kernels::reference::Dot(m, m));
    const double scale = norm > 0 ? 0.5 * separation / norm : 0.0;
    for (double& v : m) v *= scale;
    means.push_back(std::move(m));
  }
  DirectionStream noise(Seed{Hash64({seed.value, 1})}, StreamDomain::kData);
  data.features.resize(rows * cols);
  data.labels.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = static_cast<int>(r % static_cast<std::size_t>(classes));
    data.labels[r] = y;
    for (std::size_t i = 0; i < cols; ++i) {
      data.features[r * cols + i] = means[y][i] + noise.NextGaussian();
    }
  }
  return data;
}

Dataset MakeSymmetricNoise(std::size_t rows, std::size_t cols, double scale,
                           Seed seed) {
  Dataset data;
  data.rows = rows;
  data.cols = cols;
  data.classes = 2;
  data.labels.assign(rows, 0);
  data.features.assign(rows * cols, 0.0);
  DirectionStream noise(seed, StreamDomain::kData);
  for (std::size_t r = 0; r + 1 < rows; r += 2) {
    for (std::size_t i = 0; i < cols; ++i) {
      const double x = scale * noise.NextGaussian();
      data.features[r * cols + i] = x;
      data.features[(r + 1) * cols + i] = -x;
    }
  }
  return data;
}

}  // namespace feedsign
