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

// Population-scale t-closeness control with demographics drawn i.i.d.
// from a target distribution.
//
// Every cohort first receives k members; the remaining members go to
// uniformly random cohorts. Members are streamed in fixed-size chunks and
// only per-cohort cell counters are kept.

#ifndef FLOC_OT_CONTROL_H_
#define FLOC_OT_CONTROL_H_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "floc/demographics.h"
#include "floc/parallel.h"
#include "floc/random.h"
#include "floc/t_closeness.h"
#include "json.hpp"

namespace floc {

inline constexpr int64_t kOtChunkSize = int64_t{1} << 20;

struct OtControlConfig {
  int64_t num_cohorts = 33872;
  int64_t k = 2000;
  double cohort_size_ratio = 1.5;
  double t = 0.1;
  uint64_t seed = 0;
};

struct OtAttributeResult {
  int64_t violations = 0;
  // Cohorts in which the group's share exceeds its frequency by more
  // than t.
  std::array<int64_t, kNumGroups> group_violations{};
  double max_excess = -1.0;
  std::array<double, kNumGroups> population{};
};

struct OtControlResult {
  OtControlConfig config;
  int64_t total_members = 0;
  std::vector<int64_t> cohort_sizes;
  std::array<OtAttributeResult, 2> attributes;  // race, income

  const OtAttributeResult& race() const { return attributes[0]; }
  const OtAttributeResult& income() const { return attributes[1]; }

  nlohmann::json ToJson() const {
    nlohmann::json attrs = nlohmann::json::object();
    for (Attribute a : {Attribute::kRace, Attribute::kIncome}) {
      const OtAttributeResult& r = attributes[static_cast<int>(a)];
      nlohmann::json groups = nlohmann::json::object();
      for (int g = 0; g < kNumGroups; ++g) {
        groups[std::string(GroupToken(a, g))] = {
            {"population_frequency", r.population[g]},
            {"violations", r.group_violations[g]}};
      }
      attrs[std::string(AttributeName(a))] = {{"violations", r.violations},
                                              {"max_excess", r.max_excess},
                                              {"groups", groups}};
    }
    const auto [lo, hi] =
        std::minmax_element(cohort_sizes.begin(), cohort_sizes.end());
    return {{"num_cohorts", config.num_cohorts},
            {"k", config.k},
            {"cohort_size_ratio", config.cohort_size_ratio},
            {"t", config.t},
            {"seed", config.seed},
            {"total_members", total_members},
            {"mean_cohort_size", static_cast<double>(total_members) /
                                     static_cast<double>(config.num_cohorts)},
            {"min_cohort_size", lo == cohort_sizes.end() ? 0 : *lo},
            {"max_cohort_size", hi == cohort_sizes.end() ? 0 : *hi},
            {"attributes", attrs}};
  }
};

// Population frequencies are the target's marginals.
inline absl::StatusOr<OtControlResult> OtScaleControl(
    const OtControlConfig& config, const JointDistribution& target,
    int workers = 1) {
  if (config.num_cohorts < 1 || config.k < 1) {
    return absl::InvalidArgumentError("num_cohorts and k must be >= 1");
  }
  if (!(config.cohort_size_ratio >= 1.0)) {
    return absl::InvalidArgumentError("cohort_size_ratio must be >= 1");
  }
  const int64_t cohorts = config.num_cohorts;
  const int64_t first = cohorts * config.k;
  const int64_t total = static_cast<int64_t>(std::llround(
      static_cast<double>(first) * config.cohort_size_ratio));
  const int64_t rest = total - first;
  const int64_t rest_chunks = (rest + kOtChunkSize - 1) / kOtChunkSize;

  std::array<double, kNumCells> weights{};
  for (int c = 0; c < kNumCells; ++c) weights[c] = target.cell(c);
  const DiscreteSampler cell_sampler(weights);

  using Counters = std::vector<std::array<int32_t, kNumCells>>;
  const int stripes = std::max(1, ResolveWorkers(workers));
  std::vector<Counters> partial(stripes, Counters(cohorts));
  const uint64_t n_cohorts = static_cast<uint64_t>(cohorts);
  ParallelFor(stripes, stripes, [&](size_t s) {
    Counters& counters = partial[s];
    for (int64_t c = static_cast<int64_t>(s); c < cohorts; c += stripes) {
      Engine engine =
          MakeEngine(config.seed, "ot-first", static_cast<uint64_t>(c));
      for (int64_t i = 0; i < config.k; ++i) ++counters[c][cell_sampler(engine)];
    }
    for (int64_t chunk = static_cast<int64_t>(s); chunk < rest_chunks;
         chunk += stripes) {
      Engine engine =
          MakeEngine(config.seed, "ot-rest", static_cast<uint64_t>(chunk));
      const int64_t begin = chunk * kOtChunkSize;
      const int64_t end = std::min(rest, begin + kOtChunkSize);
      for (int64_t i = begin; i < end; ++i) {
        const uint64_t c = UniformIndex(engine, n_cohorts);
        ++counters[c][cell_sampler(engine)];
      }
    }
  });

  OtControlResult result;
  result.config = config;
  result.total_members = total;
  result.cohort_sizes.assign(cohorts, 0);
  for (Attribute a : {Attribute::kRace, Attribute::kIncome}) {
    result.attributes[static_cast<int>(a)].population = target.Marginal(a);
  }
  for (int64_t c = 0; c < cohorts; ++c) {
    std::array<int64_t, kNumCells> cells{};
    for (const Counters& counters : partial) {
      for (int j = 0; j < kNumCells; ++j) cells[j] += counters[c][j];
    }
    int64_t size = 0;
    for (int64_t v : cells) size += v;
    result.cohort_sizes[c] = size;
    for (Attribute a : {Attribute::kRace, Attribute::kIncome}) {
      OtAttributeResult& r = result.attributes[static_cast<int>(a)];
      std::array<int64_t, kNumGroups> groups{};
      for (int j = 0; j < kNumCells; ++j) {
        groups[GroupIndex(CellDemographics(j), a)] += cells[j];
      }
      const AnomalousCategory anomalous =
          AnomalousCategoryOf(groups, r.population);
      r.max_excess = std::max(r.max_excess, anomalous.excess);
      r.violations += ExceedsThreshold(anomalous.excess, config.t);
      for (int g = 0; g < kNumGroups; ++g) {
        const double excess = static_cast<double>(groups[g]) /
                                  static_cast<double>(size) -
                              r.population[g];
        r.group_violations[g] += ExceedsThreshold(excess, config.t);
      }
    }
  }
  return result;
}

}  // namespace floc

#endif  // FLOC_OT_CONTROL_H_
