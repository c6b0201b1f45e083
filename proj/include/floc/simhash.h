// Copyright 2026 The floc-cohorts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// SimHash over a set of domains.
//
// Every (domain, bit) pair gets a standard-normal weight, which plays the
// role of one coordinate of a random hyperplane. Bit b of the hash is set
// when the weights of the set's domains for that bit sum to a positive
// value; an exact zero sum gives 0. Weights come from a counter-based
// stream keyed by (FNV-1a(domain), bit, seed), so there is no stored
// projection matrix and the vocabulary is unbounded.

#ifndef FLOC_SIMHASH_H_
#define FLOC_SIMHASH_H_

#include <cmath>
#include <compare>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "absl/container/flat_hash_map.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"
#include "absl/strings/string_view.h"
#include "floc/random.h"

namespace floc {

inline constexpr int kMaxSimHashBits = 64;
inline constexpr int kDefaultSimHashBits = 50;

struct SimHashConfig {
  int bit_length = kDefaultSimHashBits;
  uint64_t seed = 0;
};

inline absl::Status ValidateSimHashConfig(const SimHashConfig& config) {
  if (config.bit_length < 1 || config.bit_length > kMaxSimHashBits) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "bit_length must be in [1, 64], got %d", config.bit_length));
  }
  return absl::OkStatus();
}

// A bit_length-wide bitvector. Bit index 0 is the most significant bit.
struct SimHashValue {
  uint64_t bits = 0;

  friend auto operator<=>(const SimHashValue&, const SimHashValue&) = default;
};

inline bool HashBit(SimHashValue h, int bit_index, int bit_length) {
  return (h.bits >> (bit_length - 1 - bit_index)) & 1;
}

inline int HammingDistance(SimHashValue a, SimHashValue b) {
  return __builtin_popcountll(a.bits ^ b.bits);
}

namespace simhash_internal {

inline uint64_t DomainKey(absl::string_view domain, uint64_t seed) {
  return Mix64(Fnv1a64(domain) ^ Mix64(seed ^ 0x5eedf10c5eedf10cULL));
}

// Box-Muller on two counter-derived uniforms; u1 lies in (0, 1].
inline double GaussianFromKey(uint64_t key, int bit_index) {
  const uint64_t counter = static_cast<uint64_t>(bit_index) << 1;
  const uint64_t a = Mix64(key ^ Mix64(counter));
  const uint64_t b = Mix64(key ^ Mix64(counter | 1));
  const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace simhash_internal

inline double GaussianFeature(absl::string_view domain, int bit_index,
                              uint64_t seed) {
  return simhash_internal::GaussianFromKey(
      simhash_internal::DomainKey(domain, seed), bit_index);
}

inline SimHashValue SimHashFromSums(std::span<const double> sums) {
  SimHashValue h;
  const int bit_length = static_cast<int>(sums.size());
  for (int b = 0; b < bit_length; ++b) {
    if (sums[b] > 0.0) h.bits |= uint64_t{1} << (bit_length - 1 - b);
  }
  return h;
}

inline absl::StatusOr<SimHashValue> SimHash(
    std::span<const std::string> domains, const SimHashConfig& config) {
  if (absl::Status s = ValidateSimHashConfig(config); !s.ok()) return s;
  if (domains.empty()) {
    return absl::InvalidArgumentError("cannot hash an empty domain set");
  }
  std::vector<double> sums(config.bit_length, 0.0);
  for (const std::string& d : domains) {
    const uint64_t key = simhash_internal::DomainKey(d, config.seed);
    for (int b = 0; b < config.bit_length; ++b) {
      sums[b] += simhash_internal::GaussianFromKey(key, b);
    }
  }
  return SimHashFromSums(sums);
}

// Same result as SimHash, with per-domain weight vectors memoized. Useful
// when the same vocabulary is hashed many times. Not thread-safe.
class SimHasher {
 public:
  explicit SimHasher(const SimHashConfig& config) : config_(config) {}

  const SimHashConfig& config() const { return config_; }

  absl::StatusOr<SimHashValue> Hash(std::span<const std::string> domains) {
    if (absl::Status s = ValidateSimHashConfig(config_); !s.ok()) return s;
    if (domains.empty()) {
      return absl::InvalidArgumentError("cannot hash an empty domain set");
    }
    sums_.assign(config_.bit_length, 0.0);
    for (const std::string& d : domains) {
      const std::vector<double>& w = Weights(d);
      for (int b = 0; b < config_.bit_length; ++b) sums_[b] += w[b];
    }
    return SimHashFromSums(sums_);
  }

 private:
  const std::vector<double>& Weights(const std::string& domain) {
    auto it = cache_.find(domain);
    if (it != cache_.end()) return it->second;
    std::vector<double> w(config_.bit_length);
    const uint64_t key = simhash_internal::DomainKey(domain, config_.seed);
    for (int b = 0; b < config_.bit_length; ++b) {
      w[b] = simhash_internal::GaussianFromKey(key, b);
    }
    return cache_.emplace(domain, std::move(w)).first->second;
  }

  SimHashConfig config_;
  absl::flat_hash_map<std::string, std::vector<double>> cache_;
  std::vector<double> sums_;
};

}  // namespace floc

#endif  // FLOC_SIMHASH_H_
