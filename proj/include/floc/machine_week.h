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

// Machine-week records: the set of unique registrable domains one machine
// visited in one 7-day window. These are the input unit for cohorts.

#ifndef FLOC_MACHINE_WEEK_H_
#define FLOC_MACHINE_WEEK_H_

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/container/flat_hash_map.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/string_view.h"
#include "floc/demographics.h"
#include "floc/public_suffix.h"
#include "floc/sessions.h"
#include "floc/zip_state.h"
#include "json.hpp"

namespace floc {

// Machine-weeks with fewer unique domains are dropped.
inline constexpr int kMinDomainsPerWeek = 7;

// Separates domains inside the store's domain column. Never valid in a
// normalized host name.
inline constexpr char kDomainSeparator = '|';

struct MachineWeek {
  int64_t machine_id = 0;
  int32_t week_index = 0;
  // Sorted, unique.
  std::vector<std::string> domains;
  std::string state = std::string(kUnknownState);
  Demographics demographics;

  friend bool operator==(const MachineWeek&, const MachineWeek&) = default;
};

inline bool MachineWeekKeyLess(const MachineWeek& a, const MachineWeek& b) {
  return std::tie(a.machine_id, a.week_index) <
         std::tie(b.machine_id, b.week_index);
}

struct WeekConfig {
  std::chrono::year_month_day epoch{std::chrono::year{2017},
                                    std::chrono::January, std::chrono::day{1}};
  // Weeks [0, num_weeks) are kept; sessions outside are counted and ignored.
  int num_weeks = 52;
};

inline int64_t WeekIndex(const std::chrono::year_month_day& date,
                         const WeekConfig& config) {
  const auto days = (std::chrono::sys_days(date) -
                     std::chrono::sys_days(config.epoch))
                        .count();
  // Floor division so days before the epoch land in negative weeks.
  return days >= 0 ? days / 7 : -((-days + 6) / 7);
}

struct AggregationReport {
  int64_t sessions_in = 0;
  int64_t invalid_domain_sessions = 0;
  int64_t out_of_window_sessions = 0;
  int64_t candidate_machine_weeks = 0;
  int64_t dropped_below_cutoff = 0;
  int64_t machine_weeks_out = 0;
  int64_t unknown_state_machine_weeks = 0;
  // Machines whose sessions disagree on demographics or zip; the first
  // session seen wins.
  int64_t conflicting_profile_machines = 0;
  // Up to 20 distinct rejected hosts, sorted.
  std::vector<std::string> invalid_domain_examples;

  nlohmann::json ToJson() const {
    return {{"sessions_in", sessions_in},
            {"invalid_domain_sessions", invalid_domain_sessions},
            {"out_of_window_sessions", out_of_window_sessions},
            {"candidate_machine_weeks", candidate_machine_weeks},
            {"dropped_below_cutoff", dropped_below_cutoff},
            {"machine_weeks_out", machine_weeks_out},
            {"unknown_state_machine_weeks", unknown_state_machine_weeks},
            {"conflicting_profile_machines", conflicting_profile_machines},
            {"invalid_domain_examples", invalid_domain_examples}};
  }
};

struct AggregationResult {
  // Sorted by (machine_id, week_index).
  std::vector<MachineWeek> machine_weeks;
  AggregationReport report;
};

// Groups sessions into machine-weeks of validated eTLD+1s and applies the
// 7-domain cutoff. Output order is canonical regardless of input order,
// except that a machine's profile is taken from its first session.
inline AggregationResult BuildMachineWeeks(
    std::span<const SessionRecord> records, const WeekConfig& config,
    const SuffixSet& suffixes) {
  AggregationResult result;
  AggregationReport& report = result.report;
  report.sessions_in = static_cast<int64_t>(records.size());

  struct Profile {
    Demographics demographics;
    std::string zip;
    bool conflicting = false;
  };
  std::map<int64_t, Profile> profiles;
  std::map<std::pair<int64_t, int32_t>, std::vector<std::string>> groups;
  absl::flat_hash_map<std::string, std::optional<std::string>> domain_cache;
  std::vector<std::string> invalid;

  for (const SessionRecord& r : records) {
    auto [pit, inserted] =
        profiles.try_emplace(r.machine_id, Profile{r.demographics, r.zip});
    if (!inserted && (pit->second.demographics != r.demographics ||
                      pit->second.zip != r.zip)) {
      pit->second.conflicting = true;
    }

    auto cached = domain_cache.find(r.domain);
    if (cached == domain_cache.end()) {
      cached =
          domain_cache.emplace(r.domain, suffixes.RegistrableDomain(r.domain))
              .first;
      if (!cached->second && invalid.size() < 20) invalid.push_back(r.domain);
    }
    if (!cached->second) {
      ++report.invalid_domain_sessions;
      continue;
    }
    const int64_t week = WeekIndex(r.date, config);
    if (week < 0 || week >= config.num_weeks) {
      ++report.out_of_window_sessions;
      continue;
    }
    groups[{r.machine_id, static_cast<int32_t>(week)}].push_back(
        *cached->second);
  }

  for (const auto& [id, profile] : profiles) {
    if (profile.conflicting) ++report.conflicting_profile_machines;
  }
  std::sort(invalid.begin(), invalid.end());
  report.invalid_domain_examples = std::move(invalid);

  report.candidate_machine_weeks = static_cast<int64_t>(groups.size());
  for (auto& [key, domains] : groups) {
    std::sort(domains.begin(), domains.end());
    domains.erase(std::unique(domains.begin(), domains.end()), domains.end());
    if (static_cast<int>(domains.size()) < kMinDomainsPerWeek) {
      ++report.dropped_below_cutoff;
      continue;
    }
    const Profile& profile = profiles.at(key.first);
    MachineWeek mw;
    mw.machine_id = key.first;
    mw.week_index = key.second;
    mw.domains = std::move(domains);
    mw.state = std::string(StateForZip(profile.zip));
    mw.demographics = profile.demographics;
    if (mw.state == kUnknownState) ++report.unknown_state_machine_weeks;
    result.machine_weeks.push_back(std::move(mw));
  }
  report.machine_weeks_out = static_cast<int64_t>(result.machine_weeks.size());
  return result;
}

// Deterministic union of shards keyed by (machine_id, week_index). Domain
// sets of colliding keys are unioned; the first shard's profile wins.
// Shards should be split by machine so the cutoff saw complete weeks.
inline std::vector<MachineWeek> MergeMachineWeeks(
    std::span<const std::vector<MachineWeek>> shards) {
  std::map<std::pair<int64_t, int32_t>, MachineWeek> merged;
  for (const auto& shard : shards) {
    for (const MachineWeek& mw : shard) {
      auto [it, inserted] =
          merged.try_emplace({mw.machine_id, mw.week_index}, mw);
      if (inserted) continue;
      std::vector<std::string> unioned;
      std::set_union(it->second.domains.begin(), it->second.domains.end(),
                     mw.domains.begin(), mw.domains.end(),
                     std::back_inserter(unioned));
      it->second.domains = std::move(unioned);
    }
  }
  std::vector<MachineWeek> out;
  out.reserve(merged.size());
  for (auto& [key, mw] : merged) out.push_back(std::move(mw));
  return out;
}

inline constexpr absl::string_view kMachineWeekHeader =
    "machine_id\tweek_index\tstate\trace_group\tincome_group\tdomains";

inline void WriteMachineWeeks(std::ostream& out,
                              std::span<const MachineWeek> machine_weeks) {
  out << kMachineWeekHeader << '\n';
  for (const MachineWeek& mw : machine_weeks) {
    out << mw.machine_id << '\t' << mw.week_index << '\t' << mw.state << '\t'
        << RaceToken(mw.demographics.race) << '\t'
        << IncomeToken(mw.demographics.income) << '\t'
        << absl::StrJoin(mw.domains, std::string(1, kDomainSeparator))
        << '\n';
  }
}

inline absl::StatusOr<std::vector<MachineWeek>> ReadMachineWeeks(
    std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    return absl::InvalidArgumentError("machine-week store has no header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMachineWeekHeader) {
    return absl::InvalidArgumentError(
        "machine-week store header mismatch: '" + line + "'");
  }
  std::vector<MachineWeek> out;
  int64_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<absl::string_view> f = absl::StrSplit(line, '\t');
    auto error = [&](absl::string_view what) {
      return absl::InvalidArgumentError(
          absl::StrFormat("machine-week store line %d: %s", line_number, what));
    };
    if (f.size() != 6) return error("expected 6 columns");
    MachineWeek mw;
    if (!sessions_internal::ParseInt(f[0], mw.machine_id)) {
      return error("bad machine_id");
    }
    if (!sessions_internal::ParseInt(f[1], mw.week_index) ||
        mw.week_index < 0) {
      return error("bad week_index");
    }
    mw.state = std::string(f[2]);
    auto race = ParseRace(f[3]);
    auto income = ParseIncome(f[4]);
    if (!race || !income) return error("bad demographic group");
    mw.demographics = {*race, *income};
    for (absl::string_view d : absl::StrSplit(f[5], kDomainSeparator)) {
      if (!d.empty()) mw.domains.emplace_back(d);
    }
    std::sort(mw.domains.begin(), mw.domains.end());
    mw.domains.erase(std::unique(mw.domains.begin(), mw.domains.end()),
                     mw.domains.end());
    if (static_cast<int>(mw.domains.size()) < kMinDomainsPerWeek) {
      return error("fewer than 7 unique domains");
    }
    out.push_back(std::move(mw));
  }
  if (in.bad()) return absl::DataLossError("error reading machine-week store");
  return out;
}

inline absl::StatusOr<std::vector<MachineWeek>> ReadMachineWeeksFile(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError("cannot open machine-week store " + path);
  return ReadMachineWeeks(in);
}

}  // namespace floc

#endif  // FLOC_MACHINE_WEEK_H_
