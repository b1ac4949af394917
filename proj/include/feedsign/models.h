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

#ifndef FEEDSIGN_MODELS_H_
#define FEEDSIGN_MODELS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "feedsign/prng.h"

namespace feedsign {

// Row-major feature matrix with one integer class label per row.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  int classes = 2;
  std::vector<double> features;
  std::vector<int> labels;

  std::span<const double> Row(std::size_t i) const {
    return {features.data() + i * cols, cols};
  }
  // Indices of rows with label `c`, ascending.
  std::vector<std::size_t> IndicesOfClass(int c) const;
  std::vector<std::size_t> ClassCounts() const;
};

using Batch = std::span<const std::size_t>;

// L(w) = 1/2 sum_i eigenvalues[i] (w_i - optimum_i)^2, i.e. H is diagonal
// with the listed eigenvalues. With `batch_noise` set, the mean feature row
// of the batch (cols must equal the dimension) enters linearly:
//   L(w, B) = 1/2 (w - w*)^T H (w - w*) - mean_{j in B}(x_j)^T w
// which makes batch gradients noisy around the full-data gradient.
struct Quadratic {
  std::vector<double> eigenvalues;
  ParamVector optimum;
  bool batch_noise = false;
};

// Binary logistic regression; parameters are the feature weights followed by
// one bias term.
struct Logistic {
  std::size_t features = 0;
};

// Fully connected tanh network with a softmax cross-entropy head.
// layers = {inputs, hidden..., classes}. Parameters are stored layer by
// layer as the weight matrix (out x in, row-major) followed by the bias.
struct Mlp {
  std::vector<std::size_t> layers;
};

using ModelSpec = std::variant<Quadratic, Logistic, Mlp>;

// Eigenvalue list with `top_count` entries equal to `top` followed by
// `dim - top_count` entries equal to `tail`.
std::vector<double> SpikedSpectrum(std::size_t dim, std::size_t top_count,
                                   double top, double tail);

// Trace over largest eigenvalue.
double EffectiveRank(const Quadratic& q);
// Largest eigenvalue (the smoothness constant L).
double Smoothness(const Quadratic& q);
// Smallest positive eigenvalue (the PL constant).
double PlConstant(const Quadratic& q);

std::size_t ParamCount(const ModelSpec& spec);
std::string KindName(const ModelSpec& spec);

// 64-bit FNV-1a over the canonical byte encoding of the spec.
std::uint64_t SpecDigest(const ModelSpec& spec);

// Mean loss over `batch`. Throws ShapeError on dimension mismatch or
// out-of-range batch indices, DataError on an empty batch.
double Loss(const ModelSpec& spec, std::span<const double> params,
            const Dataset& data, Batch batch);

ParamVector Grad(const ModelSpec& spec, std::span<const double> params,
                 const Dataset& data, Batch batch);

// Fraction of correctly classified rows; nullopt for the quadratic family.
std::optional<double> Accuracy(const ModelSpec& spec,
                               std::span<const double> params,
                               const Dataset& data, Batch batch);

std::vector<std::size_t> AllRows(const Dataset& data);

// --- Data sources -----------------------------------------------------------

// CSV rows of the form `label,feat1,...,featN`. Blank lines and lines
// starting with '#' are skipped. Throws DataError with the line number.
Dataset ParseCsvDataset(const std::string& text);
Dataset LoadCsvDataset(const std::string& path);

// Balanced Gaussian classes: row i has label i % classes and features drawn
// from N(m_label, I), where the class means are random directions scaled to
// norm separation / 2.
Dataset MakeGaussianBlobs(std::size_t rows, std::size_t cols, int classes,
                          double separation, Seed seed);

// Antithetic rows (x, -x, x', -x', ...) with x ~ N(0, scale^2 I); the row
// distribution is exactly symmetric about zero. Labels are all 0.
Dataset MakeSymmetricNoise(std::size_t rows, std::size_t cols, double scale,
                           Seed seed);

}  // namespace feedsign

#endif  // FEEDSIGN_MODELS_H_
