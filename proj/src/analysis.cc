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

#include "feedsign/analysis.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "feedsign/aggregation.h"
#include "feedsign/errors.h"
#include "feedsign/kernels.h"
#include "feedsign/zo.h"

namespace feedsign {
namespace {

std::vector<double> Ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = avg;
    i = j + 1;
  }
  return ranks;
}

struct FloorCandidate {
  double a = 0.0;
  double c = 0.0;
  double sse = 0.0;
};

class FloorObjective {
 public:
  FloorObjective(std::span<const double> tau, std::span<const double> y)
      : tau_(tau), y_(y), g0_(y[0]) {}

  FloorCandidate At(double a) const {
    const double lq = std::log1p(-a);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y_.size(); ++i) {
      const double q = std::exp(lq * tau_[i]);
      const double u = 1.0 - q;
      num += (y_[i] - g0_ * q) * u;
      den += u * u;
    }
    FloorCandidate out{a, den > 0.0 ? std::max(num / den, 0.0) : 0.0, 0.0};
    for (std::size_t i = 0; i < y_.size(); ++i) {
      const double q = std::exp(lq * tau_[i]);
      const double r = y_[i] - ((g0_ - out.c) * q + out.c);
      out.sse += r * r;
    }
    return out;
  }

 private:
  std::span<const double> tau_;
  std::span<const double> y_;
  double g0_;
};

}  // namespace

SignReversalEstimate EstimateSignReversingProb(const ModelSpec& spec,
                                               std::span<const double> params, Seed seed,
                                               const Dataset& data, std::size_t batch_size,
                                               std::size_t batches, Seed sampler,
                                               double mu) {
  if (batches == 0) throw AnalysisError("batch count must be positive");
  if (batch_size == 0 || batch_size > data.rows) {
    throw AnalysisError("batch size must be in [1, rows]");
  }
  const std::vector<std::size_t> all = AllRows(data);
  const ParamVector full_grad = Grad(spec, params, data, all);
  SignReversalEstimate est;
  est.seed = seed;
  est.batches = batches;
  est.batch_size = batch_size;
  est.true_projection = kernels::GaussianDot(full_grad, seed);
  if (est.true_projection == 0.0) {
    throw AnalysisError("direction is orthogonal to the full-data gradient");
  }
  const Sign truth = SignOf(est.true_projection);

  ParamVector w(params.begin(), params.end());
  DirectionStream stream(sampler, StreamDomain::kBatch);
  std::vector<std::size_t> pool = all;
  std::vector<std::size_t> batch(batch_size);
  for (std::size_t m = 0; m < batches; ++m) {
    if (batch_size < pool.size()) {
      for (std::size_t i = 0; i < batch_size; ++i) {
        std::swap(pool[i], pool[i + stream.NextIndex(pool.size() - i)]);
      }
      std::copy(pool.begin(), pool.begin() + batch_size, batch.begin());
      std::sort(batch.begin(), batch.end());
    } else {
      batch = all;
    }
    const Projection p = SpsaProjection(spec, w, data, batch, seed, mu);
    if (SignOf(p.value()) != truth) ++est.reversed;
  }
  est.p_hat = static_cast<double>(est.reversed) / static_cast<double>(batches);
  return est;
}

double BinomialMargin(double p, std::size_t n) {
  return 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

double HalfNormalMean(std::span<const double> g) {
  return std::sqrt(2.0 / std::numbers::pi) * std::sqrt(kernels::Dot(g, g));
}

double HalfNormalCheck(std::span<const double> g, std::size_t samples, Seed sampler) {
  if (samples == 0) throw AnalysisError("sample count must be positive");
  if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) {
    throw AnalysisError("gradient is zero");
  }
  std::vector<double> terms(samples);
  const auto n = static_cast<std::int64_t>(samples);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const Seed s{Hash64({sampler.value, static_cast<std::uint64_t>(i)})};
    terms[static_cast<std::size_t>(i)] = std::abs(kernels::GaussianDot(g, s));
  }
  return kernels::Sum(terms) / static_cast<double>(samples);
}

FloorFit FitErrorFloor(std::span<const double> steps, std::span<const double> gaps) {
  if (steps.size() != gaps.size()) throw AnalysisError("steps and gaps differ in length");
  if (gaps.size() < kMinFitPoints) {
    throw AnalysisError("floor fit needs at least " + std::to_string(kMinFitPoints) +
                        " points, got " + std::to_string(gaps.size()));
  }
  std::vector<double> tau(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!std::isfinite(steps[i]) || !std::isfinite(gaps[i])) {
      throw AnalysisError("non-finite value in loss history");
    }
    tau[i] = steps[i] - steps[0];
    if (i > 0 && steps[i] < steps[i - 1]) throw AnalysisError("steps must be ascending");
  }

  const FloorObjective objective(tau, gaps);
  constexpr double kMaxA = 1.0 - 1e-12;
  std::vector<double> grid(kFitGridPoints);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double e = -9.0 + 9.0 * static_cast<double>(i) / static_cast<double>(grid.size() - 1);
    grid[i] = std::min(std::pow(10.0, e), kMaxA);
  }
  FloorCandidate best = objective.At(grid[0]);
  std::size_t best_i = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const FloorCandidate c = objective.At(grid[i]);
    if (c.sse < best.sse) {
      best = c;
      best_i = i;
    }
  }
  // Golden-section refinement in log a between the neighbouring grid points.
  double lo = std::log(grid[best_i == 0 ? 0 : best_i - 1]);
  double hi = std::log(grid[std::min(best_i + 1, grid.size() - 1)]);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  FloorCandidate f1 = objective.At(std::exp(x1)), f2 = objective.At(std::exp(x2));
  for (int it = 0; it < 80 && hi - lo > 1e-14; ++it) {
    if (f1.sse <= f2.sse) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective.At(std::exp(x1));
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective.At(std::exp(x2));
    }
  }
  for (const FloorCandidate& c : {f1, f2}) {
    if (c.sse < best.sse) best = c;
  }

  const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) /
                      static_cast<double>(gaps.size());
  double sstot = 0.0;
  for (double y : gaps) sstot += (y - mean) * (y - mean);

  FloorFit fit;
  fit.a = best.a;
  fit.c_tilde = best.c;
  fit.initial_gap = gaps[0];
  fit.points = gaps.size();
  fit.residual = std::sqrt(best.sse / static_cast<double>(gaps.size()));
  fit.r_squared = sstot > 0.0 ? 1.0 - best.sse / sstot : 1.0;
  if (fit.r_squared < kMinFitRSquared) {
    throw AnalysisError("floor fit rejected: R^2 = " + std::to_string(fit.r_squared));
  }
  return fit;
}

FloorFit FitErrorFloor(std::span<const RoundReport> history, double loss_star) {
  std::vector<double> steps, gaps;
  for (const RoundReport& r : history) {
    if (!std::isfinite(r.global_loss)) continue;
    steps.push_back(static_cast<double>(r.step + 1));
    gaps.push_back(r.global_loss - loss_star);
  }
  return FitErrorFloor(steps, gaps);
}

UnbiasednessReport UnbiasednessSpecialCase(std::size_t trials, Seed sampler) {
  if (trials < 10000) throw AnalysisError("unbiasedness check needs at least 10^4 trials");
  UnbiasednessReport rep;
  rep.bound = 3.0 * std::sqrt(1.0 / static_cast<double>(trials)) * 2.0;
  for (int i = 0; i <= 20; ++i) {
    const double p = static_cast<double>(i - 10) / 10.0;
    DirectionStream stream(Seed{Hash64({sampler.value, static_cast<std::uint64_t>(i)})},
                           StreamDomain::kAnalysis);
    long long sum = 0;
    for (std::size_t n = 0; n < trials; ++n) {
      const double u = 2.0 * stream.NextUniform() - 1.0;
      sum += ToInt(SignOf(p + u));
    }
    const double mean = static_cast<double>(sum) / static_cast<double>(trials);
    rep.grid.push_back(p);
    rep.mean_sign.push_back(mean);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(mean - p));
  }
  return rep;
}

ByzantineVoteReport SimulateByzantineVotes(double p_e, double p_b, std::size_t clients,
                                           std::size_t trials, AttackerModel model,
                                           Seed sampler) {
  if (!(p_e >= 0.0 && p_e < 0.5)) throw AnalysisError("p_e must lie in [0, 1/2)");
  if (!(p_b >= 0.0 && p_b <= 1.0)) throw AnalysisError("p_b must lie in [0, 1]");
  if (clients == 0 || trials == 0) throw AnalysisError("clients and trials must be positive");
  const auto attackers =
      static_cast<std::size_t>(std::llround(p_b * static_cast<double>(clients)));
  const double spread = 1.0 / (1.0 - 2.0 * p_e);

  ByzantineVoteReport rep;
  rep.p_e = p_e;
  rep.p_b = p_b;
  rep.trials = trials;
  rep.predicted_reverse = p_e + p_b - p_e * p_b;
  rep.predicted_negate = p_e + p_b - 2.0 * p_e * p_b;
  DirectionStream stream(sampler, StreamDomain::kAnalysis);
  for (std::size_t n = 0; n < trials; ++n) {
    const std::size_t k = stream.NextIndex(clients);
    const double estimate = 1.0 + spread * (2.0 * stream.NextUniform() - 1.0);
    double sent = estimate;
    if (k < attackers) sent = model == AttackerModel::kReverseTrueSign ? -1.0 : -estimate;
    if (SignOf(sent) == Sign::kMinus) ++rep.wrong;
  }
  rep.wrong_fraction = static_cast<double>(rep.wrong) / static_cast<double>(trials);
  return rep;
}

DpRatioReport DpRatioCheck(std::size_t clients, double epsilon) {
  if (clients == 0 || clients > 20) throw AnalysisError("clients must be in [1, 20]");
  DpRatioReport rep;
  rep.clients = clients;
  rep.epsilon = epsilon;
  rep.bound = std::exp(epsilon);
  const std::uint64_t count = std::uint64_t{1} << clients;
  auto votes_of = [&](std::uint64_t mask) {
    std::vector<Sign> v(clients);
    for (std::size_t k = 0; k < clients; ++k) {
      v[k] = (mask >> k) & 1 ? Sign::kMinus : Sign::kPlus;
    }
    return v;
  };
  // P(+1 | v) and P(-1 | v) = P(+1 | -v), each evaluated directly.
  std::vector<double> plus(count), minus(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    plus[mask] = DpPlusProbability(votes_of(mask), epsilon);
    minus[mask] = DpPlusProbability(votes_of(~mask & (count - 1)), epsilon);
  }
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (std::size_t k = 0; k < clients; ++k) {
      const std::uint64_t other = mask ^ (std::uint64_t{1} << k);
      rep.max_ratio = std::max({rep.max_ratio, plus[mask] / plus[other],
                                minus[mask] / minus[other]});
      ++rep.pairs;
    }
  }
  return rep;
}

DpSamplingReport DpSamplingCheck(std::span<const Sign> votes, double epsilon,
                                 std::size_t samples, Seed sampler) {
  if (samples == 0) throw AnalysisError("sample count must be positive");
  DpSamplingReport rep;
  rep.samples = samples;
  rep.closed_form = DpPlusProbability(votes, epsilon);
  DirectionStream noise(sampler, StreamDomain::kPrivacy);
  std::size_t plus = 0;
  for (std::size_t n = 0; n < samples; ++n) {
    if (AggregateDpFeedSign(votes, epsilon, noise) == Sign::kPlus) ++plus;
  }
  rep.empirical = static_cast<double>(plus) / static_cast<double>(samples);
  rep.margin = BinomialMargin(rep.closed_form, samples);
  return rep;
}

double Spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw AnalysisError("Spearman needs two equal-length series of length >= 2");
  }
  const auto rx = Ranks(x), ry = Ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace feedsign
