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

// Stratified demographic panels.

#ifndef FLOC_PANELS_H_
#define FLOC_PANELS_H_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"
#include "floc/demographics.h"
#include "floc/machine_week.h"
#include "floc/prefix_lsh.h"
#include "floc/random.h"
#include "floc/simhash.h"
#include "json.hpp"

namespace floc {

inline constexpr int kDefaultPanelK = 30;
inline constexpr int kDefaultPanelsPerWeek = 10;

using CellCounts = std::array<int64_t, kNumCells>;

struct PanelMember {
  int64_t machine_id = 0;
  Demographics demographics;
  SimHashValue hash;
};

struct Panel {
  int64_t panel_id = 0;
  int32_t week_index = 0;
  std::vector<PanelMember> members;
  // Filled by ClusterPanel; cohort_ids[i] belongs to members[i].
  int k = 0;
  int bit_length = kDefaultSimHashBits;
  int num_cohorts = 0;
  std::vector<int32_t> cohort_ids;

  CellCounts Cells() const {
    CellCounts counts{};
    for (const PanelMember& m : members) ++counts[CellIndex(m.demographics)];
    return counts;
  }
};

// Largest-remainder apportionment of `total` seats across the cells; ties
// in the remainder go to the lower cell index.
inline CellCounts Apportion(int64_t total, const JointDistribution& target) {
  CellCounts counts{};
  std::array<std::pair<double, int>, kNumCells> remainders;
  int64_t assigned = 0;
  for (int c = 0; c < kNumCells; ++c) {
    const double exact = static_cast<double>(total) * target.cell(c);
    counts[c] = static_cast<int64_t>(std::floor(exact));
    assigned += counts[c];
    remainders[c] = {exact - static_cast<double>(counts[c]), c};
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; assigned < total && i < kNumCells; ++i, ++assigned) {
    ++counts[remainders[i].second];
  }
  return counts;
}

// Largest m whose apportionment fits `panels` times into `available`.
// Sets `binding_cell` to the cell that limits m.
inline int64_t FeasiblePanelSize(const CellCounts& available,
                                 const JointDistribution& target, int panels,
                                 int* binding_cell = nullptr) {
  int64_t total = 0;
  for (int64_t a : available) total += a;
  int64_t upper = total / panels;
  int binding = 0;
  double tightest = static_cast<double>(total) + 1.0;
  for (int c = 0; c < kNumCells; ++c) {
    if (target.cell(c) <= 0.0) continue;
    const double bound =
        static_cast<double>(available[c]) / (panels * target.cell(c));
    if (bound < tightest) {
      tightest = bound;
      binding = c;
    }
  }
  if (binding_cell != nullptr) *binding_cell = binding;
  upper = std::min<int64_t>(upper, static_cast<int64_t>(tightest) + kNumCells);
  for (int64_t m = upper; m > 0; --m) {
    const CellCounts need = Apportion(m, target);
    bool fits = true;
    for (int c = 0; c < kNumCells && fits; ++c) {
      fits = need[c] * panels <= available[c];
    }
    if (fits) return m;
  }
  return 0;
}

// Builds `panels_per_week` disjoint panels for every week present.
// `hashes[i]` is the hash of `machine_weeks[i]`. Panels are ordered by
// (week, panel index) and numbered consecutively.
inline absl::StatusOr<std::vector<Panel>> StratifiedPanels(
    std::span<const MachineWeek> machine_weeks,
    std::span<const SimHashValue> hashes, const JointDistribution& target,
    int panels_per_week, uint64_t seed) {
  if (panels_per_week < 1) {
    return absl::InvalidArgumentError("panels_per_week must be >= 1");
  }
  if (hashes.size() != machine_weeks.size()) {
    return absl::InvalidArgumentError("one hash per machine-week is required");
  }
  std::map<int32_t, std::array<std::vector<size_t>, kNumCells>> by_week;
  for (size_t i = 0; i < machine_weeks.size(); ++i) {
    by_week[machine_weeks[i].week_index]
           [CellIndex(machine_weeks[i].demographics)]
               .push_back(i);
  }
  std::vector<Panel> panels;
  for (auto& [week, cells] : by_week) {
    CellCounts available{};
    for (int c = 0; c < kNumCells; ++c) {
      // A machine appears at most once per week, but guard anyway.
      std::vector<size_t>& members = cells[c];
      std::sort(members.begin(), members.end(), [&](size_t a, size_t b) {
        return machine_weeks[a].machine_id < machine_weeks[b].machine_id;
      });
      members.erase(std::unique(members.begin(), members.end(),
                                [&](size_t a, size_t b) {
                                  return machine_weeks[a].machine_id ==
                                         machine_weeks[b].machine_id;
                                }),
                    members.end());
      available[c] = static_cast<int64_t>(members.size());
    }
    int binding = 0;
    const int64_t m =
        FeasiblePanelSize(available, target, panels_per_week, &binding);
    if (m == 0) {
      const Demographics d = CellDemographics(binding);
      return absl::FailedPreconditionError(absl::StrFormat(
          "week %d cannot support %d panels: cell (%s, %s) has %d machines",
          week, panels_per_week, RaceToken(d.race), IncomeToken(d.income),
          available[binding]));
    }
    const CellCounts need = Apportion(m, target);
    for (int c = 0; c < kNumCells; ++c) {
      Engine engine = MakeEngine(
          seed, "panel-cell",
          static_cast<uint64_t>(week) * kNumCells + static_cast<uint64_t>(c));
      Shuffle(std::span<size_t>(cells[c]), engine);
    }
    for (int p = 0; p < panels_per_week; ++p) {
      Panel panel;
      panel.panel_id = static_cast<int64_t>(panels.size());
      panel.week_index = week;
      panel.members.reserve(static_cast<size_t>(m));
      for (int c = 0; c < kNumCells; ++c) {
        const size_t begin = static_cast<size_t>(need[c] * p);
        for (size_t j = begin; j < begin + static_cast<size_t>(need[c]); ++j) {
          const size_t idx = cells[c][j];
          panel.members.push_back({machine_weeks[idx].machine_id,
                                   machine_weeks[idx].demographics,
                                   hashes[idx]});
        }
      }
      panels.push_back(std::move(panel));
    }
  }
  return panels;
}

inline absl::Status ClusterPanel(Panel& panel, int k, int bit_length) {
  std::vector<SimHashValue> hashes;
  hashes.reserve(panel.members.size());
  for (const PanelMember& m : panel.members) hashes.push_back(m.hash);
  absl::StatusOr<CohortMap> map = BuildCohortMap(hashes, k, bit_length);
  if (!map.ok()) {
    return absl::Status(map.status().code(),
                        absl::StrFormat("panel %d: %s", panel.panel_id,
                                        map.status().message()));
  }
  panel.k = k;
  panel.bit_length = bit_length;
  panel.num_cohorts = map->num_cohorts();
  panel.cohort_ids.resize(hashes.size());
  for (size_t i = 0; i < hashes.size(); ++i) {
    panel.cohort_ids[i] = map->Assign(hashes[i]);
  }
  return absl::OkStatus();
}

inline nlohmann::json PanelSummary(const Panel& panel) {
  const CellCounts cells = panel.Cells();
  return {{"panel_id", panel.panel_id},
          {"week_index", panel.week_index},
          {"size", panel.members.size()},
          {"k", panel.k},
          {"num_cohorts", panel.num_cohorts},
          {"cell_counts", cells}};
}

}  // namespace floc

#endif  // FLOC_PANELS_H_
