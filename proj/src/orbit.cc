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

#include "feedsign/orbit.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "feedsign/errors.h"
#include "feedsign/federation.h"

namespace feedsign {
namespace {

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void U8(std::uint8_t v) { out_.push_back(v); }
  void U32(std::uint32_t v) { Little(v, 4); }
  void U64(std::uint64_t v) { Little(v, 8); }
  void F32(float v) { U32(std::bit_cast<std::uint32_t>(v)); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }

 private:
  void Little(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t U8() { return static_cast<std::uint8_t>(Little(1)); }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Little(4)); }
  std::uint64_t U64() { return Little(8); }
  float F32() { return std::bit_cast<float>(U32()); }
  double F64() { return std::bit_cast<double>(U64()); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::uint64_t Little(int n) {
    if (remaining() < static_cast<std::size_t>(n)) {
      throw OrbitError("orbit truncated at byte " + std::to_string(pos_));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

bool PayloadMatches(PayloadKind kind, const OrbitPayload& p) {
  switch (kind) {
    case PayloadKind::kSignBits:
      return std::holds_alternative<Sign>(p);
    case PayloadKind::kMeanProjection:
      return std::holds_alternative<double>(p);
    case PayloadKind::kPairList:
      return std::holds_alternative<std::vector<SeedProjection>>(p);
  }
  return false;
}

}  // namespace

Orbit::Orbit(OrbitHeader header) : header_(header) { header_.steps = 0; }

void Orbit::Append(OrbitEntry entry) {
  if (entry.step != entries_.size()) {
    throw OrbitError("orbit entry for step " + std::to_string(entry.step) +
                     " appended at position " + std::to_string(entries_.size()));
  }
  if (!PayloadMatches(header_.payload, entry.payload)) {
    throw OrbitError("payload variant does not match the orbit's payload kind");
  }
  if (const auto* pairs = std::get_if<std::vector<SeedProjection>>(&entry.payload);
      pairs && pairs->size() != header_.clients) {
    throw OrbitError("pair list has " + std::to_string(pairs->size()) +
                     " records, header says " + std::to_string(header_.clients));
  }
  entries_.push_back(std::move(entry));
  header_.steps = entries_.size();
}

Orbit Orbit::Prefix(std::uint64_t steps) const {
  if (steps > entries_.size()) {
    throw OrbitError("prefix of " + std::to_string(steps) + " steps requested from an orbit of " +
                     std::to_string(entries_.size()));
  }
  Orbit out(header_);
  out.entries_.assign(entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(steps));
  out.header_.steps = steps;
  return out;
}

std::uint64_t PayloadBytes(const OrbitHeader& header) {
  switch (header.payload) {
    case PayloadKind::kSignBits:
      return (header.steps + 7) / 8;
    case PayloadKind::kMeanProjection:
      return 8 * header.steps;
    case PayloadKind::kPairList:
      return 12ULL * header.clients * header.steps;
  }
  return 0;
}

std::vector<std::uint8_t> Serialize(const Orbit& orbit) {
  const OrbitHeader& h = orbit.header();
  std::vector<std::uint8_t> out;
  out.reserve(kOrbitHeaderBytes + PayloadBytes(h));
  ByteWriter w(out);
  for (char c : {'F', 'S', 'G', 'N'}) w.U8(static_cast<std::uint8_t>(c));
  w.U8(kOrbitVersion);
  w.U8(static_cast<std::uint8_t>(h.rule));
  w.U8(static_cast<std::uint8_t>(h.payload));
  w.U8(0);
  w.U32(h.clients);
  w.F64(h.eta);
  w.F64(h.mu);
  w.F64(h.epsilon);
  w.U64(h.dim);
  w.U64(h.steps);
  w.U64(h.run_seed.value);
  w.U64(h.spec_digest);

  switch (h.payload) {
    case PayloadKind::kSignBits: {
      std::vector<std::uint8_t> bits((h.steps + 7) / 8, 0);
      for (const OrbitEntry& e : orbit.entries()) {
        if (std::get<Sign>(e.payload) == Sign::kPlus) {
          bits[e.step / 8] |= static_cast<std::uint8_t>(1u << (e.step % 8));
        }
      }
      out.insert(out.end(), bits.begin(), bits.end());
      break;
    }
    case PayloadKind::kMeanProjection:
      for (const OrbitEntry& e : orbit.entries()) w.F64(std::get<double>(e.payload));
      break;
    case PayloadKind::kPairList:
      for (const OrbitEntry& e : orbit.entries()) {
        for (const SeedProjection& sp : std::get<std::vector<SeedProjection>>(e.payload)) {
          w.U64(sp.seed.value);
          w.F32(sp.projection);
        }
      }
      break;
  }
  return out;
}

Orbit Deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.U8());
  if (std::memcmp(magic, "FSGN", 4) != 0) throw OrbitError("not an orbit file (bad magic)");
  const std::uint8_t version = r.U8();
  if (version != kOrbitVersion) {
    throw OrbitError("unsupported orbit version " + std::to_string(version));
  }
  OrbitHeader h;
  const std::uint8_t rule = r.U8();
  if (rule > static_cast<std::uint8_t>(RuleKind::kDpFeedSign)) {
    throw OrbitError("unknown rule code " + std::to_string(rule));
  }
  h.rule = static_cast<RuleKind>(rule);
  const std::uint8_t kind = r.U8();
  if (kind < 1 || kind > 3) throw OrbitError("unknown payload kind " + std::to_string(kind));
  h.payload = static_cast<PayloadKind>(kind);
  if (r.U8() != 0) throw OrbitError("reserved header byte is not zero");
  h.clients = r.U32();
  h.eta = r.F64();
  h.mu = r.F64();
  h.epsilon = r.F64();
  h.dim = r.U64();
  h.steps = r.U64();
  h.run_seed = Seed{r.U64()};
  h.spec_digest = r.U64();

  const std::uint64_t need = PayloadBytes(h);
  if (r.remaining() < need) {
    throw OrbitError("orbit truncated: header promises " + std::to_string(h.steps) +
                     " steps (" + std::to_string(need) + " payload bytes), found " +
                     std::to_string(r.remaining()));
  }
  if (r.remaining() > need) throw OrbitError("trailing bytes after orbit payload");

  Orbit orbit(h);
  for (std::uint64_t t = 0; t < h.steps; ++t) {
    OrbitEntry e{t, Sign::kPlus};
    switch (h.payload) {
      case PayloadKind::kSignBits:
        break;  // filled below from the bitmap
      case PayloadKind::kMeanProjection:
        e.payload = r.F64();
        break;
      case PayloadKind::kPairList: {
        std::vector<SeedProjection> pairs(h.clients);
        for (SeedProjection& sp : pairs) {
          sp.seed = Seed{r.U64()};
          sp.projection = r.F32();
        }
        e.payload = std::move(pairs);
        break;
      }
    }
    if (h.payload == PayloadKind::kSignBits) {
      const std::uint8_t byte = bytes[kOrbitHeaderBytes + t / 8];
      e.payload = ((byte >> (t % 8)) & 1u) ? Sign::kPlus : Sign::kMinus;
    }
    orbit.Append(std::move(e));
  }
  if (h.payload == PayloadKind::kSignBits && h.steps % 8 != 0) {
    const std::uint8_t last = bytes[kOrbitHeaderBytes + h.steps / 8];
    if (last >> (h.steps % 8)) throw OrbitError("padding bits of the sign bitmap are not zero");
  }
  return orbit;
}

void WriteOrbitFile(const std::string& path, const Orbit& orbit) {
  const auto bytes = Serialize(orbit);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw OrbitError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw OrbitError("failed writing '" + path + "'");
}

Orbit ReadOrbitFile(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw OrbitError("cannot open orbit file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return Deserialize(bytes);
}

void ApplyEntry(std::span<double> params, const OrbitHeader& header,
                const OrbitEntry& entry) {
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Sign>) {
          PerturbInPlace(params, Seed{entry.step}, -header.eta * ToInt(p));
        } else if constexpr (std::is_same_v<T, double>) {
          PerturbInPlace(params, Seed{entry.step}, -header.eta * p);
        } else {
          const double step = header.eta / static_cast<double>(p.size());
          for (const SeedProjection& sp : p) {
            PerturbInPlace(params, sp.seed, -step * static_cast<double>(sp.projection));
          }
        }
      },
      entry.payload);
}

ParamVector Replay(std::span<const double> initial, const Orbit& orbit,
                   std::optional<std::uint64_t> spec_digest) {
  const OrbitHeader& h = orbit.header();
  if (initial.size() != h.dim) {
    throw ReplayError("initial parameters have " + std::to_string(initial.size()) +
                      " entries, orbit was recorded for d = " + std::to_string(h.dim));
  }
  if (spec_digest && *spec_digest != h.spec_digest) {
    throw ReplayError("model spec digest mismatch: orbit was recorded for a different model");
  }
  if (orbit.entries().size() != h.steps) {
    throw ReplayError("orbit truncated: " + std::to_string(orbit.entries().size()) + " of " +
                      std::to_string(h.steps) + " steps present");
  }
  ParamVector w(initial.begin(), initial.end());
  for (std::uint64_t t = 0; t < orbit.entries().size(); ++t) {
    const OrbitEntry& e = orbit.entries()[t];
    if (e.step != t) throw ReplayError("orbit gap at step " + std::to_string(t));
    ApplyEntry(w, h, e);
  }
  return w;
}

ParamVector CatchUp(std::span<const double> initial, const Orbit& orbit_prefix,
                    const FederationState& live) {
  if (orbit_prefix.size() != live.step) {
    throw ReplayError("orbit prefix covers " + std::to_string(orbit_prefix.size()) +
                      " steps but the live run is at step " + std::to_string(live.step));
  }
  const OrbitHeader& h = orbit_prefix.header();
  if (h.rule != live.rule.kind() || h.eta != live.eta || h.run_seed != live.run_seed) {
    throw ReplayError("orbit prefix belongs to a different run");
  }
  return Replay(initial, orbit_prefix, SpecDigest(live.model));
}

}  // namespace feedsign
