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

// PrefixLSH: groups SimHash values into k-anonymous cohorts keyed by hash
// prefixes.
//
// The hash space is bisected from the most significant bit down. A node
// whose two children would each hold at least k hashes is split; any other
// node becomes a cohort. Every cohort therefore has at least k members,
// and the leaves form a prefix-free cover of the whole hash space. Cohort
// IDs are assigned to leaves in ascending prefix order.

#ifndef FLOC_PREFIX_LSH_H_
#define FLOC_PREFIX_LSH_H_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"
#include "floc/simhash.h"
#include "json.hpp"

namespace floc {

struct CohortEntry {
  // Right-aligned prefix value of `prefix_length` bits.
  uint64_t prefix = 0;
  int prefix_length = 0;
  int32_t cohort_id = 0;

  friend bool operator==(const CohortEntry&, const CohortEntry&) = default;
};

class CohortMap {
 public:
  // Validates that entries are in ascending prefix order, that IDs are
  // 0..n-1 in that order, and that the prefixes tile the hash space.
  static absl::StatusOr<CohortMap> Create(int k, int bit_length,
                                          std::vector<CohortEntry> entries) {
    if (k < 1) return absl::InvalidArgumentError("k must be >= 1");
    if (bit_length < 1 || bit_length > kMaxSimHashBits) {
      return absl::InvalidArgumentError("bit_length must be in [1, 64]");
    }
    if (entries.empty()) {
      return absl::InvalidArgumentError("cohort map has no entries");
    }
    // Tiling check: consecutive ranges must abut, starting at 0 and ending
    // at 2^bit_length. Working in 128 bits keeps bit_length = 64 exact.
    __uint128_t expected_start = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
      const CohortEntry& e = entries[i];
      if (e.prefix_length < 0 || e.prefix_length > bit_length) {
        return absl::InvalidArgumentError(
            absl::StrFormat("entry %d has prefix length %d", i,
                            e.prefix_length));
      }
      if (e.prefix_length < 64 && (e.prefix >> e.prefix_length) != 0) {
        return absl::InvalidArgumentError(
            absl::StrFormat("entry %d prefix exceeds its length", i));
      }
      if (e.cohort_id != static_cast<int32_t>(i)) {
        return absl::InvalidArgumentError(
            absl::StrFormat("entry %d has cohort_id %d", i, e.cohort_id));
      }
      const int shift = bit_length - e.prefix_length;
      const __uint128_t start = static_cast<__uint128_t>(e.prefix) << shift;
      if (start != expected_start) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "entry %d leaves a gap or overlaps its predecessor", i));
      }
      expected_start = start + (static_cast<__uint128_t>(1) << shift);
    }
    if (expected_start != (static_cast<__uint128_t>(1) << bit_length)) {
      return absl::InvalidArgumentError(
          "cohort prefixes do not cover the hash space");
    }
    return CohortMap(k, bit_length, std::move(entries));
  }

  int k() const { return k_; }
  int bit_length() const { return bit_length_; }
  int num_cohorts() const { return static_cast<int>(entries_.size()); }
  std::span<const CohortEntry> entries() const { return entries_; }

  // Cohort whose prefix matches the leading bits of `hash`. The hash must
  // be below 2^bit_length.
  int32_t Assign(SimHashValue hash) const {
    // Last entry whose range starts at or below the hash.
    auto it = std::upper_bound(starts_.begin(), starts_.end(), hash.bits);
    return static_cast<int32_t>(it - starts_.begin()) - 1;
  }

  // Members per cohort for a given hash multiset.
  std::vector<int64_t> CohortSizes(std::span<const SimHashValue> hashes) const {
    std::vector<int64_t> sizes(entries_.size(), 0);
    for (SimHashValue h : hashes) ++sizes[Assign(h)];
    return sizes;
  }

  // {"k": k, "bit_length": L, "entries": [{"prefix": "0101", "cohort_id": 3}]}
  nlohmann::json ToJson() const {
    nlohmann::json entries = nlohmann::json::array();
    for (const CohortEntry& e : entries_) {
      std::string bits(e.prefix_length, '0');
      for (int i = 0; i < e.prefix_length; ++i) {
        if ((e.prefix >> (e.prefix_length - 1 - i)) & 1) bits[i] = '1';
      }
      entries.push_back({{"prefix", bits}, {"cohort_id", e.cohort_id}});
    }
    return {{"k", k_}, {"bit_length", bit_length_}, {"entries", entries}};
  }

  static absl::StatusOr<CohortMap> FromJson(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("k") || !j.contains("bit_length") ||
        !j.contains("entries") || !j["entries"].is_array() ||
        !j["k"].is_number_integer() || !j["bit_length"].is_number_integer()) {
      return absl::InvalidArgumentError(
          "cohort map JSON needs integer k, bit_length and an entries array");
    }
    std::vector<CohortEntry> entries;
    for (const auto& e : j["entries"]) {
      if (!e.is_object() || !e.contains("prefix") || !e["prefix"].is_string() ||
          !e.contains("cohort_id") || !e["cohort_id"].is_number_integer()) {
        return absl::InvalidArgumentError("malformed cohort map entry");
      }
      const std::string bits = e["prefix"].get<std::string>();
      if (bits.size() > static_cast<size_t>(kMaxSimHashBits)) {
        return absl::InvalidArgumentError("prefix longer than 64 bits");
      }
      CohortEntry entry;
      entry.prefix_length = static_cast<int>(bits.size());
      for (char c : bits) {
        if (c != '0' && c != '1') {
          return absl::InvalidArgumentError("prefix must be a binary string");
        }
        entry.prefix = (entry.prefix << 1) | static_cast<uint64_t>(c == '1');
      }
      entry.cohort_id = e["cohort_id"].get<int32_t>();
      entries.push_back(entry);
    }
    return Create(j["k"].get<int>(), j["bit_length"].get<int>(),
                  std::move(entries));
  }

  friend bool operator==(const CohortMap& a, const CohortMap& b) {
    return a.k_ == b.k_ && a.bit_length_ == b.bit_length_ &&
           a.entries_ == b.entries_;
  }

 private:
  CohortMap(int k, int bit_length, std::vector<CohortEntry> entries)
      : k_(k), bit_length_(bit_length), entries_(std::move(entries)) {
    starts_.reserve(entries_.size());
    for (const CohortEntry& e : entries_) {
      const int shift = bit_length_ - e.prefix_length;
      starts_.push_back(shift >= 64 ? 0 : e.prefix << shift);
    }
  }

  int k_;
  int bit_length_;
  std::vector<CohortEntry> entries_;
  std::vector<uint64_t> starts_;
};

namespace prefix_lsh_internal {

// Bisects sorted[lo, hi), all sharing the top `length` bits given by
// `prefix`. Appends leaves in ascending prefix order.
inline void Split(std::span<const uint64_t> sorted, size_t lo, size_t hi,
                  uint64_t prefix, int length, int k, int bit_length,
                  std::vector<CohortEntry>& leaves) {
  while (true) {
    if (length < bit_length) {
      const int bit = bit_length - 1 - length;
      const size_t mid = static_cast<size_t>(
          std::partition_point(sorted.begin() + lo, sorted.begin() + hi,
                               [bit](uint64_t h) { return ((h >> bit) & 1) == 0; }) -
          sorted.begin());
      const size_t left = mid - lo;
      const size_t right = hi - mid;
      if (left >= static_cast<size_t>(k) && right >= static_cast<size_t>(k)) {
        Split(sorted, lo, mid, prefix << 1, length + 1, k, bit_length, leaves);
        lo = mid;
        prefix = (prefix << 1) | 1;
        ++length;
        continue;
      }
    }
    leaves.push_back({prefix, length, static_cast<int32_t>(leaves.size())});
    return;
  }
}

}  // namespace prefix_lsh_internal

// Builds the cohort map for one population of hashes. Duplicate hashes
// count with multiplicity.
inline absl::StatusOr<CohortMap> BuildCohortMap(
    std::span<const SimHashValue> hashes, int k, int bit_length) {
  if (k < 1) return absl::InvalidArgumentError("k must be >= 1");
  if (bit_length < 1 || bit_length > kMaxSimHashBits) {
    return absl::InvalidArgumentError("bit_length must be in [1, 64]");
  }
  if (hashes.size() < static_cast<size_t>(k)) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "%d hashes cannot form a cohort of k=%d", hashes.size(), k));
  }
  std::vector<uint64_t> sorted;
  sorted.reserve(hashes.size());
  for (SimHashValue h : hashes) {
    if (bit_length < 64 && (h.bits >> bit_length) != 0) {
      return absl::InvalidArgumentError(
          "hash value exceeds the configured bit length");
    }
    sorted.push_back(h.bits);
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<CohortEntry> leaves;
  prefix_lsh_internal::Split(sorted, 0, sorted.size(), 0, 0, k, bit_length,
                             leaves);
  return CohortMap::Create(k, bit_length, std::move(leaves));
}

}  // namespace floc

#endif  // FLOC_PREFIX_LSH_H_
