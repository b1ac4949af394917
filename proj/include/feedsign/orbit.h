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

#ifndef FEEDSIGN_ORBIT_H_
#define FEEDSIGN_ORBIT_H_

// Orbits: the append-only log of what the server broadcast at every step.
// Replaying an orbit from the starting checkpoint reproduces the trained
// parameters bit for bit.
//
// File layout (.orbit), all integers and floats little-endian:
//
//   offset size  field
//        0    4  magic "FSGN"
//        4    1  format version (1)
//        5    1  rule (0 fedsgd, 1 zo_fedsgd, 2 feedsign, 3 dp_feedsign)
//        6    1  payload kind (1 sign bits, 2 mean projection, 3 pair list)
//        7    1  reserved, 0
//        8    4  clients K (u32)
//       12    8  eta (f64)
//       20    8  mu (f64)
//       28    8  epsilon (f64, 0 unless dp_feedsign)
//       36    8  dimension d (u64)
//       44    8  steps T (u64)
//       52    8  run seed (u64)
//       60    8  model spec digest (u64)
//       68       payload
//
// Payloads:
//   sign bits        ceil(T / 8) bytes; step t is bit (t % 8) of byte t / 8,
//                    1 = +1, unused high bits of the last byte are 0. Seeds
//                    are not stored: step t always uses seed t.
//   mean projection  T x f64, shared seed t per step.
//   pair list        T x K x (seed u64, projection f32) = 12 K T bytes.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "feedsign/aggregation.h"
#include "feedsign/prng.h"
#include "feedsign/zo.h"

namespace feedsign {

struct FederationState;

inline constexpr std::uint8_t kOrbitVersion = 1;
inline constexpr std::size_t kOrbitHeaderBytes = 68;

enum class PayloadKind : std::uint8_t {
  kSignBits = 1,
  kMeanProjection = 2,
  kPairList = 3,
};

struct SeedProjection {
  Seed seed;
  float projection = 0.0f;

  friend bool operator==(const SeedProjection&, const SeedProjection&) = default;
};

using OrbitPayload = std::variant<Sign, double, std::vector<SeedProjection>>;

struct OrbitEntry {
  std::uint64_t step = 0;
  OrbitPayload payload;

  friend bool operator==(const OrbitEntry&, const OrbitEntry&) = default;
};

struct OrbitHeader {
  RuleKind rule = RuleKind::kFeedSign;
  PayloadKind payload = PayloadKind::kSignBits;
  std::uint32_t clients = 0;
  double eta = 0.0;
  double mu = 0.0;
  double epsilon = 0.0;
  std::uint64_t dim = 0;
  std::uint64_t steps = 0;
  Seed run_seed;
  std::uint64_t spec_digest = 0;

  friend bool operator==(const OrbitHeader&, const OrbitHeader&) = default;
};

class Orbit {
 public:
  Orbit() = default;
  // header.steps is overwritten to track the entry count.
  explicit Orbit(OrbitHeader header);

  const OrbitHeader& header() const { return header_; }
  const std::vector<OrbitEntry>& entries() const { return entries_; }
  std::uint64_t size() const { return entries_.size(); }

  // Throws OrbitError if the step is not the next one or the payload variant
  // does not match the header's payload kind.
  void Append(OrbitEntry entry);

  // The first `steps` entries.
  Orbit Prefix(std::uint64_t steps) const;

  friend bool operator==(const Orbit&, const Orbit&) = default;

 private:
  OrbitHeader header_;
  std::vector<OrbitEntry> entries_;
};

std::uint64_t PayloadBytes(const OrbitHeader& header);

std::vector<std::uint8_t> Serialize(const Orbit& orbit);
// Throws OrbitError on bad magic, version, truncation or trailing bytes.
Orbit Deserialize(std::span<const std::uint8_t> bytes);

void WriteOrbitFile(const std::string& path, const Orbit& orbit);
Orbit ReadOrbitFile(const std::string& path);

// Applies one broadcast step to params; training and replay both go through
// here so they perform the same floating-point operations.
void ApplyEntry(std::span<double> params, const OrbitHeader& header,
                const OrbitEntry& entry);

// Throws ReplayError on dimension or digest mismatch or a malformed orbit.
ParamVector Replay(std::span<const double> initial, const Orbit& orbit,
                   std::optional<std::uint64_t> spec_digest = std::nullopt);

// Reconstructs the live model for a client joining at live.step.
// Throws ReplayError if the prefix does not cover exactly steps 0..t-1 or
// does not belong to the live run.
ParamVector CatchUp(std::span<const double> initial, const Orbit& orbit_prefix,
                    const FederationState& live);

}  // namespace feedsign

#endif  // FEEDSIGN_ORBIT_H_
