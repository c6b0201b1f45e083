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

// Chi-square tests of a subpopulation's top-domain visit frequencies
// against the aggregate.

#ifndef FLOC_BROWSING_DIFFERENCE_H_
#define FLOC_BROWSING_DIFFERENCE_H_

#include <algorithm>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/container/flat_hash_map.h"
#include "absl/container/flat_hash_set.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"
#include "absl/strings/string_view.h"
#include "floc/demographics.h"
#include "floc/machine_week.h"
#include "floc/random.h"
#include "floc/stats.h"

namespace floc {

inline std::vector<int> DefaultDGrid() {
  std::vector<int> grid;
  for (int d = 10; d <= 100; d += 10) grid.push_back(d);
  return grid;
}

struct DomainCount {
  std::string domain;
  int64_t count = 0;
  friend bool operator==(const DomainCount&, const DomainCount&) = default;
};

struct TopDomainsResult {
  std::vector<DomainCount> domains;
  // Set when fewer than D distinct domains exist.
  bool truncated = false;
};

// A visit is one machine-week containing the domain.
inline TopDomainsResult TopDomains(std::span<const MachineWeek> machine_weeks,
                                   int d) {
  absl::flat_hash_map<std::string, int64_t> counts;
  for (const MachineWeek& mw : machine_weeks) {
    for (const std::string& domain : mw.domains) ++counts[domain];
  }
  TopDomainsResult result;
  result.domains.reserve(counts.size());
  for (auto& [domain, count] : counts) result.domains.push_back({domain, count});
  std::sort(result.domains.begin(), result.domains.end(),
            [](const DomainCount& a, const DomainCount& b) {
              if (a.count != b.count) return a.count > b.count;
              return a.domain < b.domain;
            });
  if (d < 0) d = 0;
  if (result.domains.size() > static_cast<size_t>(d)) {
    result.domains.resize(static_cast<size_t>(d));
  } else if (result.domains.size() < static_cast<size_t>(d)) {
    result.truncated = true;
  }
  return result;
}

// Visit counts of `domains` over the machine-weeks accepted by `keep`.
inline std::vector<double> CountVisits(
    std::span<const MachineWeek> machine_weeks,
    std::span<const DomainCount> domains,
    const std::function<bool(const MachineWeek&)>& keep) {
  absl::flat_hash_map<absl::string_view, size_t> index;
  for (size_t i = 0; i < domains.size(); ++i) index[domains[i].domain] = i;
  std::vector<double> counts(domains.size(), 0.0);
  for (const MachineWeek& mw : machine_weeks) {
    if (!keep(mw)) continue;
    for (const std::string& domain : mw.domains) {
      auto it = index.find(domain);
      if (it != index.end()) counts[it->second] += 1.0;
    }
  }
  return counts;
}

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

// Expected counts are the aggregate scaled to the observed total.
inline absl::StatusOr<ChiSquareResult> ChiSquareTest(
    std::span<const double> observed, std::span<const double> aggregate) {
  if (observed.size() != aggregate.size() || observed.size() < 2) {
    return absl::InvalidArgumentError(
        "chi-square needs matching count vectors with at least 2 cells");
  }
  double observed_total = 0.0;
  double aggregate_total = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    if (observed[i] < 0.0 || aggregate[i] < 0.0) {
      return absl::InvalidArgumentError("counts must be non-negative");
    }
    observed_total += observed[i];
    aggregate_total += aggregate[i];
  }
  ChiSquareResult result;
  result.df = static_cast<int>(observed.size()) - 1;
  for (size_t i = 0; i < observed.size(); ++i) {
    const double expected = aggregate[i] * observed_total / aggregate_total;
    if (!(expected > 0.0)) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "expected count for cell %d is zero; reduce D", i));
    }
    const double diff = observed[i] - expected;
    result.statistic += diff * diff / expected;
  }
  result.p_value = ChiSquareSurvival(result.statistic, result.df);
  return result;
}

struct ChiSquareRow {
  std::string attribute;
  std::string group;
  int d = 0;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool truncated = false;
};

inline constexpr double kDefaultControlFraction = 0.25;

// Machines of the random control subpopulation: a seeded sample of
// round(fraction * machines) distinct machine IDs.
inline absl::flat_hash_set<int64_t> ControlMachines(
    std::span<const MachineWeek> machine_weeks, double fraction,
    uint64_t seed, uint64_t repetition) {
  std::vector<int64_t> machines;
  for (const MachineWeek& mw : machine_weeks) machines.push_back(mw.machine_id);
  std::sort(machines.begin(), machines.end());
  machines.erase(std::unique(machines.begin(), machines.end()), machines.end());
  Engine engine = MakeEngine(seed, "chisq-control", repetition);
  const size_t count = static_cast<size_t>(
      std::llround(fraction * static_cast<double>(machines.size())));
  absl::flat_hash_set<int64_t> control;
  for (size_t i : SampleWithoutReplacement(machines.size(), count, engine)) {
    control.insert(machines[i]);
  }
  return control;
}

// One row per (race group, income group, control) x D. Rows whose
// subpopulation is empty are skipped.
inline absl::StatusOr<std::vector<ChiSquareRow>> BrowsingDifference(
    std::span<const MachineWeek> machine_weeks, std::span<const int> d_grid,
    uint64_t seed, double control_fraction = kDefaultControlFraction) {
  if (machine_weeks.empty()) {
    return absl::InvalidArgumentError("no machine-weeks");
  }
  int max_d = 0;
  for (int d : d_grid) {
    if (d < 2) return absl::InvalidArgumentError("D must be >= 2");
    max_d = std::max(max_d, d);
  }
  const TopDomainsResult top = TopDomains(machine_weeks, max_d);
  const std::vector<double> aggregate = CountVisits(
      machine_weeks, top.domains, [](const MachineWeek&) { return true; });
  const absl::flat_hash_set<int64_t> control =
      ControlMachines(machine_weeks, control_fraction, seed, 0);

  struct Subpopulation {
    std::string attribute;
    std::string group;
    std::function<bool(const MachineWeek&)> keep;
  };
  std::vector<Subpopulation> subpops;
  for (Attribute a : {Attribute::kRace, Attribute::kIncome}) {
    for (int g = 0; g < kNumGroups; ++g) {
      subpops.push_back({std::string(AttributeName(a)),
                         std::string(GroupToken(a, g)),
                         [a, g](const MachineWeek& mw) {
                           return GroupIndex(mw.demographics, a) == g;
                         }});
    }
  }
  subpops.push_back({"control", "random", [&control](const MachineWeek& mw) {
                       return control.contains(mw.machine_id);
                     }});

  std::vector<ChiSquareRow> rows;
  for (const Subpopulation& s : subpops) {
    const std::vector<double> observed =
        CountVisits(machine_weeks, top.domains, s.keep);
    for (int d : d_grid) {
      const size_t cells = std::min(top.domains.size(), static_cast<size_t>(d));
      std::span<const double> obs(observed.data(), cells);
      double total = 0.0;
      for (double o : obs) total += o;
      if (total == 0.0) continue;
      absl::StatusOr<ChiSquareResult> r =
          ChiSquareTest(obs, std::span<const double>(aggregate.data(), cells));
      if (!r.ok()) return r.status();
      rows.push_back({s.attribute, s.group, d, r->statistic, r->df, r->p_value,
                      cells < static_cast<size_t>(d)});
    }
  }
  return rows;
}

inline void WriteChiSquareCsv(std::ostream& out,
                              std::span<const ChiSquareRow> rows) {
  out << "attribute,group,D,statistic,p_value\n";
  for (const ChiSquareRow& r : rows) {
    out << r.attribute << ',' << r.group << ',' << r.d << ','
        << absl::StrFormat("%.12g,%.12g\n", r.statistic, r.p_value);
  }
}

}  // namespace floc

#endif  // FLOC_BROWSING_DIFFERENCE_H_
