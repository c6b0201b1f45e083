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

#ifndef FLOC_RANDOM_H_
#define FLOC_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "absl/strings/string_view.h"

namespace floc {

// SplitMix64 finalizer. Bijective on 64-bit values.
constexpr uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// 64-bit FNV-1a. Stable across processes and platforms, unlike std::hash.
constexpr uint64_t Fnv1a64(absl::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// All randomness in the library flows from a root seed through this
// derivation: seed(root, purpose, index) = Mix64(Mix64(root ^ fnv(purpose)) + index).
constexpr uint64_t DeriveSeed(uint64_t root, absl::string_view purpose,
                              uint64_t index = 0) {
  return Mix64(Mix64(root ^ Fnv1a64(purpose)) + index);
}

// The engine's output sequence is fixed by the standard. The std::
// distributions are not, so the helpers below are used instead of them.
using Engine = std::mt19937_64;

inline Engine MakeEngine(uint64_t root, absl::string_view purpose,
                         uint64_t index = 0) {
  return Engine(DeriveSeed(root, purpose, index));
}

// Uniform on [0, 1) with 53 bits of resolution.
inline double UniformDouble(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Uniform on [0, n). Lemire's multiply-shift with rejection; n must be > 0.
inline uint64_t UniformIndex(Engine& engine, uint64_t n) {
  uint64_t x = engine();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  uint64_t low = static_cast<uint64_t>(m);
  if (low < n) {
    const uint64_t threshold = -n % n;
    while (low < threshold) {
      x = engine();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<uint64_t>(m);
    }
  }
  return static_cast<uint64_t>(m >> 64);
}

// Fisher-Yates.
template <typename T>
void Shuffle(std::span<T> values, Engine& engine) {
  for (size_t i = values.size(); i > 1; --i) {
    const size_t j = UniformIndex(engine, i);
    using std::swap;
    swap(values[i - 1], values[j]);
  }
}

// Returns `count` distinct indices from [0, population) in random order.
inline std::vector<size_t> SampleWithoutReplacement(size_t population,
                                                    size_t count,
                                                    Engine& engine) {
  std::vector<size_t> indices(population);
  for (size_t i = 0; i < population; ++i) indices[i] = i;
  if (count > population) count = population;
  for (size_t i = 0; i < count; ++i) {
    const size_t j = i + UniformIndex(engine, population - i);
    std::swap(indices[i], indices[j]);
  }
  indices.resize(count);
  return indices;
}

// Samples from a fixed discrete distribution by inverting its CDF.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(std::span<const double> weights) {
    cdf_.reserve(weights.size());
    double total = 0.0;
    for (double w : weights) {
      total += w;
      cdf_.push_back(total);
    }
    for (double& c : cdf_) c /= total;
    if (!cdf_.empty()) cdf_.back() = 1.0;
  }

  size_t size() const { return cdf_.size(); }

  size_t operator()(Engine& engine) const {
    const double u = UniformDouble(engine);
    size_t lo = 0;
    size_t hi = cdf_.size() - 1;
    while (lo < hi) {
      const size_t mid = (lo + hi) / 2;
      if (u < cdf_[mid]) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace floc

#endif  // FLOC_RANDOM_H_
