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

// Weekly cohort computation: each week is clustered independently.

#ifndef FLOC_COHORTS_H_
#define FLOC_COHORTS_H_

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"
#include "floc/machine_week.h"
#include "floc/parallel.h"
#include "floc/prefix_lsh.h"
#include "floc/simhash.h"
#include "json.hpp"

namespace floc {

struct CohortAssignment {
  int64_t machine_id = 0;
  int32_t week_index = 0;
  int32_t cohort_id = 0;

  friend bool operator==(const CohortAssignment&,
                         const CohortAssignment&) = default;
};

struct WeeklyCohorts {
  // Cohort IDs are namespaced per week.
  std::map<int32_t, CohortMap> maps;
  // Sorted by (week_index, machine_id).
  std::vector<CohortAssignment> assignments;
};

// Hashes every machine-week. Results are independent of `workers`.
inline absl::StatusOr<std::vector<SimHashValue>> HashMachineWeeks(
    std::span<const MachineWeek> machine_weeks, const SimHashConfig& config,
    int workers = 1) {
  if (absl::Status s = ValidateSimHashConfig(config); !s.ok()) return s;
  std::vector<SimHashValue> hashes(machine_weeks.size());
  const size_t chunks = static_cast<size_t>(ResolveWorkers(workers));
  const size_t per_chunk = (machine_weeks.size() + chunks - 1) / chunks;
  std::vector<absl::Status> status(chunks);
  ParallelFor(chunks, workers, [&](size_t c) {
    SimHasher hasher(config);
    const size_t end = std::min(machine_weeks.size(), (c + 1) * per_chunk);
    for (size_t i = c * per_chunk; i < end; ++i) {
      auto h = hasher.Hash(machine_weeks[i].domains);
      if (!h.ok()) {
        status[c] = h.status();
        return;
      }
      hashes[i] = *h;
    }
  });
  for (const absl::Status& s : status) {
    if (!s.ok()) return s;
  }
  return hashes;
}

inline absl::StatusOr<WeeklyCohorts> ComputeWeeklyCohorts(
    std::span<const MachineWeek> machine_weeks, int k,
    const SimHashConfig& config, int workers = 1) {
  absl::StatusOr<std::vector<SimHashValue>> hashes =
      HashMachineWeeks(machine_weeks, config, workers);
  if (!hashes.ok()) return hashes.status();

  std::map<int32_t, std::vector<size_t>> by_week;
  for (size_t i = 0; i < machine_weeks.size(); ++i) {
    by_week[machine_weeks[i].week_index].push_back(i);
  }
  for (const auto& [week, members] : by_week) {
    if (members.size() < static_cast<size_t>(k)) {
      return absl::FailedPreconditionError(absl::StrFormat(
          "week %d has %d machine-weeks, fewer than k=%d", week,
          members.size(), k));
    }
  }

  std::vector<std::pair<int32_t, std::vector<size_t>>> weeks(by_week.begin(),
                                                             by_week.end());
  std::vector<absl::StatusOr<CohortMap>> maps(
      weeks.size(), absl::UnknownError("not built"));
  ParallelFor(weeks.size(), workers, [&](size_t w) {
    std::vector<SimHashValue> week_hashes;
    week_hashes.reserve(weeks[w].second.size());
    for (size_t i : weeks[w].second) week_hashes.push_back((*hashes)[i]);
    maps[w] = BuildCohortMap(week_hashes, k, config.bit_length);
  });

  WeeklyCohorts result;
  for (size_t w = 0; w < weeks.size(); ++w) {
    if (!maps[w].ok()) return maps[w].status();
    const CohortMap& map = *maps[w];
    std::vector<CohortAssignment> week_assignments;
    for (size_t i : weeks[w].second) {
      week_assignments.push_back({machine_weeks[i].machine_id, weeks[w].first,
                                  map.Assign((*hashes)[i])});
    }
    std::sort(week_assignments.begin(), week_assignments.end(),
              [](const CohortAssignment& a, const CohortAssignment& b) {
                return a.machine_id < b.machine_id;
              });
    result.assignments.insert(result.assignments.end(),
                              week_assignments.begin(),
                              week_assignments.end());
    result.maps.emplace(weeks[w].first, std::move(*maps[w]));
  }
  return result;
}

inline void WriteAssignments(std::ostream& out,
                             std::span<const CohortAssignment> assignments) {
  out << "machine_id\tweek_index\tcohort_id\n";
  for (const CohortAssignment& a : assignments) {
    out << a.machine_id << '\t' << a.week_index << '\t' << a.cohort_id << '\n';
  }
}

// {"weeks": [{"week_index": w, "cohort_map": {...}}]}
inline nlohmann::json WeeklyMapsToJson(
    const std::map<int32_t, CohortMap>& maps) {
  nlohmann::json weeks = nlohmann::json::array();
  for (const auto& [week, map] : maps) {
    weeks.push_back({{"week_index", week}, {"cohort_map", map.ToJson()}});
  }
  return {{"weeks", weeks}};
}

}  // namespace floc

#endif  // FLOC_COHORTS_H_
