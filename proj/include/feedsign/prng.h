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

#ifndef FEEDSIGN_PRNG_H_
#define FEEDSIGN_PRNG_H_

// Shared deterministic randomness.
//
// Every random quantity in the simulator is a pure function of a
// (seed, domain, index) triple, computed with the Philox4x64-10
// counter-based generator:
//
//   block b of stream (seed, domain) = Philox4x64_10(counter = {b, 0, 0, 0},
//                                                    key = {seed, domain})
//
// A block yields four 64-bit lanes r0..r3. Position i of a stream reads
// block i / 4, lane i % 4, and can be consumed three ways:
//
//   raw      : r[i % 4]
//   uniform  : ((r >> 12) + 0.5) * 2^-52, which lies strictly inside (0, 1)
//              (with 53 bits the top value rounds to 1.0)
//   gaussian : Box-Muller over the lane pair (r0, r1) or (r2, r3).
//              For a pair of uniforms (u_a, u_b):
//                rho = sqrt(-2 ln u_a), theta = 2 pi u_b
//                even lane -> rho * cos(theta), odd lane -> rho * sin(theta)
//
// Each draw advances the counter by exactly one position, whatever its kind,
// so the sample count is unambiguous and a Gaussian at position i never
// depends on what was drawn before it. The second Box-Muller variate of a
// pair is cached in the stream's block buffer, not recomputed.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace feedsign {

struct Seed {
  std::uint64_t value = 0;

  friend bool operator==(Seed, Seed) = default;
};

using ParamVector = std::vector<double>;

// Key word 1 of the Philox key; keeps streams for different purposes
// independent even when they share a seed value.
enum class StreamDomain : std::uint64_t {
  kDirection = 0,
  kBatch = 1,
  kByzantine = 2,
  kHeterogeneity = 3,
  kPrivacy = 4,
  kPartition = 5,
  kInit = 6,
  kData = 7,
  kAnalysis = 8,
};

using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

// Philox4x64 with 10 rounds (Salmon et al., Random123).
PhiloxCounter Philox4x64(PhiloxCounter counter, PhiloxKey key);

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Order-sensitive hash of a word sequence:
//   h = 0x243f6a8885a308d3
//   for each w: h = Mix64(h ^ Mix64(w + 0x9e3779b97f4a7c15))
std::uint64_t Hash64(std::initializer_list<std::uint64_t> words);

double ToUnitInterval(std::uint64_t bits);

// Four Gaussian variates of one block.
std::array<double, 4> GaussianBlock(Seed seed, StreamDomain domain,
                                    std::uint64_t block);

// Gaussian at position `index` of the direction stream for `seed`.
double GaussianAt(Seed seed, std::uint64_t index);

class DirectionStream {
 public:
  explicit DirectionStream(Seed seed,
                           StreamDomain domain = StreamDomain::kDirection);

  Seed seed() const { return seed_; }
  StreamDomain domain() const { return domain_; }
  // Number of positions consumed so far.
  std::uint64_t counter() const { return counter_; }

  double NextGaussian();
  double NextUniform();
  std::uint64_t NextU64();
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t NextIndex(std::uint64_t n);

  void Seek(std::uint64_t counter) { counter_ = counter; }
  void Reset() { counter_ = 0; }

 private:
  void Load(std::uint64_t block);

  Seed seed_;
  StreamDomain domain_;
  std::uint64_t counter_ = 0;
  bool have_raw_ = false;
  bool have_gaussian_ = false;
  std::uint64_t block_ = 0;
  PhiloxCounter raw_{};
  std::array<double, 4> gaussian_{};
};

DirectionStream MakeStream(Seed seed);

// Draws `dim` standard normal entries; advances the counter by `dim`.
// dim == 0 returns an empty vector and leaves the counter untouched.
ParamVector GaussianDirection(DirectionStream& stream, std::size_t dim);

// params[i] += scale * z[i] with z the direction stream of `seed`, regenerated
// block by block so no d-sized temporary is allocated.
void PerturbInPlace(std::span<double> params, Seed seed, double scale);

}  // namespace feedsign

#endif  // FEEDSIGN_PRNG_H_
