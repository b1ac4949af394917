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

#ifndef FEEDSIGN_ANALYSIS_H_
#define FEEDSIGN_ANALYSIS_H_

// Measurements of the quantities the convergence theory is stated in.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "feedsign/federation.h"
#include "feedsign/models.h"
#include "feedsign/prng.h"

namespace feedsign {

// --- Sign-reversing probability ------------------------------------------------

struct SignReversalEstimate {
  std::uint64_t step = 0;
  Seed seed;
  // z^T grad L over the full dataset.
  double true_projection = 0.0;
  double p_hat = 0.0;
  std::size_t reversed = 0;
  std::size_t batches = 0;
  std::size_t batch_size = 0;
};

// Draws `batches` batches of `batch_size` rows without replacement (stream
// `sampler`) and reports the fraction whose SPSA projection disagrees in sign
// with the full-data projection. A batch of the whole dataset is the dataset
// itself. Throws AnalysisError if the full-data projection is exactly zero or
// batches == 0.
SignReversalEstimate EstimateSignReversingProb(const ModelSpec& spec,
                                               std::span<const double> params, Seed seed,
                                               const Dataset& data, std::size_t batch_size,
                                               std::size_t batches, Seed sampler,
                                               double mu = kDefaultMu);

// Three standard errors of a Bernoulli(p) mean over n trials.
double BinomialMargin(double p, std::size_t n);

// --- Half-normal projection mean ----------------------------------------------

// Mean of |z^T g| over `samples` directions; sample i uses seed
// Hash64({sampler, i}). Expected value sqrt(2/pi) ||g||.
double HalfNormalCheck(std::span<const double> g, std::size_t samples, Seed sampler);

// sqrt(2 / pi) ||g||_2.
double HalfNormalMean(std::span<const double> g);

// --- Error-floor fit -----------------------------------------------------------

// gap_t = (g_0 - c) (1 - a)^t + c, with g_0 the first observed gap and t
// counted from the first observation.
struct FloorFit {
  double a = 0.0;
  double c_tilde = 0.0;
  double initial_gap = 0.0;
  // Root-mean-square residual.
  double residual = 0.0;
  double r_squared = 1.0;
  std::size_t points = 0;
};

inline constexpr std::size_t kMinFitPoints = 50;
// Below this R^2 (on a non-constant series) the model does not describe the
// data and the fit is rejected.
inline constexpr double kMinFitRSquared = 0.5;

// a is searched on a log grid over [1e-9, 1) (kFitGridPoints points) and then
// refined by golden-section search between the neighbours of the best grid
// point; for each a the floor c has a closed-form least-squares value,
// clamped at 0. Exact ties keep the smaller a. Throws AnalysisError on fewer
// than kMinFitPoints points, non-finite input, or a poor fit.
inline constexpr std::size_t kFitGridPoints = 2000;
FloorFit FitErrorFloor(std::span<const double> steps, std::span<const double> gaps);

// Uses the evaluated rounds of `history`; gap = global_loss - loss_star.
FloorFit FitErrorFloor(std::span<const RoundReport> history, double loss_star);

// --- Unbiasedness special case --------------------------------------------------

struct UnbiasednessReport {
  std::vector<double> grid;
  std::vector<double> mean_sign;
  double max_deviation = 0.0;
  // 3 sqrt(1 / trials) 2.
  double bound = 0.0;
};

// For p on 21 evenly spaced points of [-1, 1], averages sign(p + u) over
// `trials` draws of u ~ U[-1, 1] (stream Hash64({sampler, i}) for grid point
// i). Throws AnalysisError if trials < 10^4.
UnbiasednessReport UnbiasednessSpecialCase(std::size_t trials, Seed sampler);

// --- Byzantine composition ------------------------------------------------------

enum class AttackerModel : std::uint8_t {
  // Sends the reverse of the true sign.
  kReverseTrueSign,
  // Negates its own noisy estimate.
  kNegateEstimate,
};

struct ByzantineVoteReport {
  double p_e = 0.0;
  double p_b = 0.0;
  std::size_t trials = 0;
  std::size_t wrong = 0;
  double wrong_fraction = 0.0;
  // p_e + p_b - p_e p_b
  double predicted_reverse = 0.0;
  // p_e + p_b - 2 p_e p_b
  double predicted_negate = 0.0;
};

// Each trial picks one of `clients` clients uniformly; round(p_b K) of them
// are attackers. An honest client observes 1 + u with u ~ U[-a, a] and
// a = 1 / (1 - 2 p_e), so its sign is wrong with probability exactly p_e.
// Counts votes disagreeing with the true sign (+1). Throws AnalysisError
// unless 0 <= p_e < 1/2 and 0 <= p_b <= 1.
ByzantineVoteReport SimulateByzantineVotes(double p_e, double p_b, std::size_t clients,
                                           std::size_t trials, AttackerModel model,
                                           Seed sampler);

// --- Differential privacy --------------------------------------------------------

struct DpRatioReport {
  std::size_t clients = 0;
  double epsilon = 0.0;
  // max over vote vectors v, neighbours v' (one vote flipped) and both
  // outcomes o of P(o | v) / P(o | v').
  double max_ratio = 0.0;
  double bound = 0.0;
  std::size_t pairs = 0;
};

// Exhaustive over all 2^K vote vectors; K <= 20.
DpRatioReport DpRatioCheck(std::size_t clients, double epsilon);

struct DpSamplingReport {
  double closed_form = 0.0;
  double empirical = 0.0;
  double margin = 0.0;
  std::size_t samples = 0;
};

// Draws the DP vote `samples` times from the privacy-domain stream of
// `sampler` and compares the frequency of +1 with DpPlusProbability.
DpSamplingReport DpSamplingCheck(std::span<const Sign> votes, double epsilon,
                                 std::size_t samples, Seed sampler);

// --- Rank statistics --------------------------------------------------------------

// Spearman rank correlation with average ranks for ties.
double Spearman(std::span<const double> x, std::span<const double> y);

}  // namespace feedsign

#endif  // FEEDSIGN_ANALYSIS_H_
