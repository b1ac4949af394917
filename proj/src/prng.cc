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

#include "feedsign/prng.h"

#include <cmath>
#include <numbers>

#include "feedsign/kernels.h"

namespace feedsign {
namespace {

constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kPhiloxW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kPhiloxW1 = 0xBB67AE8584CAA73BULL;

inline void MulHiLo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                    std::uint64_t& lo) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

inline PhiloxCounter Round(const PhiloxCounter& c, const PhiloxKey& k) {
  std::uint64_t hi0, lo0, hi1, lo1;
  MulHiLo(kPhiloxM0, c[0], hi0, lo0);
  MulHiLo(kPhiloxM1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

// Box-Muller on one lane pair.
inline void BoxMuller(std::uint64_t a, std::uint64_t b, double& even,
                      double& odd) {
  const double rho = std::sqrt(-2.0 * std::log(ToUnitInterval(a)));
  const double theta = 2.0 * std::numbers::pi * ToUnitInterval(b);
  even = rho * std::cos(theta);
  odd = rho * std::sin(theta);
}

}  // namespace

PhiloxCounter Philox4x64(PhiloxCounter counter, PhiloxKey key) {
  counter = Round(counter, key);
  for (int r = 1; r < 10; ++r) {
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
    counter = Round(counter, key);
  }
  return counter;
}

std::uint64_t Hash64(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t w : words) h = Mix64(h ^ Mix64(w + 0x9e3779b97f4a7c15ULL));
  return h;
}

double ToUnitInterval(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

std::array<double, 4> GaussianBlock(Seed seed, StreamDomain domain,
                                    std::uint64_t block) {
  const PhiloxCounter r = Philox4x64(
      {block, 0, 0, 0}, {seed.value, static_cast<std::uint64_t>(domain)});
  std::array<double, 4> out;
  BoxMuller(r[0], r[1], out[0], out[1]);
  BoxMuller(r[2], r[3], out[2], out[3]);
  return out;
}

double GaussianAt(Seed seed, std::uint64_t index) {
  return GaussianBlock(seed, StreamDomain::kDirection, index / 4)[index % 4];
}

DirectionStream::DirectionStream(Seed seed, StreamDomain domain)
    : seed_(seed), domain_(domain) {}

void DirectionStream::Load(std::uint64_t block) {
  if (have_raw_ && block_ == block) return;
  raw_ = Philox4x64({block, 0, 0, 0},
                    {seed_.value, static_cast<std::uint64_t>(domain_)});
  block_ = block;
  have_raw_ = true;
  have_gaussian_ = false;
}

double DirectionStream::NextGaussian() {
  const std::uint64_t pos = counter_++;
  Load(pos / 4);
  if (!have_gaussian_) {
    BoxMuller(raw_[0], raw_[1], gaussian_[0], gaussian_[1]);
    BoxMuller(raw_[2], raw_[3], gaussian_[2], gaussian_[3]);
    have_gaussian_ = true;
  }
  return gaussian_[pos % 4];
}

double DirectionStream::NextUniform() { return ToUnitInterval(NextU64()); }

std::uint64_t DirectionStream::NextU64() {
  const std::uint64_t pos = counter_++;
  Load(pos / 4);
  return raw_[pos % 4];
}

std::uint64_t DirectionStream::NextIndex(std::uint64_t n) {
  // Lemire's multiply-shift; the bias is below 2^-64 * n and irrelevant here.
  const unsigned __int128 p = static_cast<unsigned __int128>(NextU64()) * n;
  return static_cast<std::uint64_t>(p >> 64);
}

DirectionStream MakeStream(Seed seed) { return DirectionStream(seed); }

ParamVector GaussianDirection(DirectionStream& stream, std::size_t dim) {
  ParamVector z(dim);
  for (double& v : z) v = stream.NextGaussian();
  return z;
}

void PerturbInPlace(std::span<double> params, Seed seed, double scale) {
  kernels::AddScaledGaussian(params, seed, scale);
}

}  // namespace feedsign
