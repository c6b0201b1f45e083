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

// Unicity of cohort-ID sequences.
//
// Each machine's weeks are cut into non-overlapping windows aligned to
// week 0; a window becomes a sample only if the machine has a qualifying
// machine-week at every position. Cohorts are then computed per window
// position, pooling every sample's machine-week at that position, and a
// sample counts as unique at horizon w when its (optionally
// fingerprint-prefixed) first w cohort IDs occur exactly once.

#ifndef FLOC_UNICITY_H_
#define FLOC_UNICITY_H_

#include <algorithm>
#include <cstdint>
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
#include "absl/strings/str_format.h"
#include "floc/machine_week.h"
#include "floc/parallel.h"
#include "floc/prefix_lsh.h"
#include "floc/random.h"
#include "floc/simhash.h"
#include "json.hpp"

namespace floc {

inline constexpr int kDefaultWindow = 4;

struct SequenceSample {
  int64_t sample_id = 0;
  int64_t machine_id = 0;
  int32_t window_start_week = 0;
  // Index of the machine-week at each window position in the span the
  // sample was built from.
  std::vector<size_t> records;
  std::vector<SimHashValue> hashes;
  std::vector<int32_t> cohort_ids;
  // U.S. state; nullopt when the zip had no state mapping.
  std::optional<std::string> fingerprint;
};

inline std::vector<SequenceSample> BuildSequences(
    std::span<const MachineWeek> machine_weeks, int window = kDefaultWindow) {
  std::vector<SequenceSample> samples;
  if (window < 1) return samples;
  std::map<int64_t, std::map<int32_t, size_t>> by_machine;
  for (size_t i = 0; i < machine_weeks.size(); ++i) {
    by_machine[machine_weeks[i].machine_id][machine_weeks[i].week_index] = i;
  }
  for (const auto& [machine, weeks] : by_machine) {
    const int32_t last_week = weeks.rbegin()->first;
    for (int32_t start = 0; start + window - 1 <= last_week; start += window) {
      std::vector<size_t> records;
      for (int32_t p = 0; p < window; ++p) {
        auto it = weeks.find(start + p);
        if (it == weeks.end()) break;
        records.push_back(it->second);
      }
      if (static_cast<int>(records.size()) != window) continue;
      SequenceSample s;
      s.sample_id = static_cast<int64_t>(samples.size());
      s.machine_id = machine;
      s.window_start_week = start;
      const std::string& state = machine_weeks[records.front()].state;
      if (state != kUnknownState) s.fingerprint = state;
      s.records = std::move(records);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

inline absl::Status HashSequences(std::span<SequenceSample> samples,
                                  std::span<const MachineWeek> machine_weeks,
                                  const SimHashConfig& config) {
  SimHasher hasher(config);
  for (SequenceSample& s : samples) {
    s.hashes.clear();
    for (size_t r : s.records) {
      if (r >= machine_weeks.size()) {
        return absl::OutOfRangeError("sample refers to a missing machine-week");
      }
      absl::StatusOr<SimHashValue> h = hasher.Hash(machine_weeks[r].domains);
      if (!h.ok()) return h.status();
      s.hashes.push_back(*h);
    }
  }
  return absl::OkStatus();
}

// Clusters each window position over all samples' hashes and writes the
// cohort IDs into the samples. Returns one map per position.
inline absl::StatusOr<std::vector<CohortMap>> AssignSequenceCohortsFromHashes(
    std::span<SequenceSample> samples, int k, int bit_length) {
  if (samples.empty()) {
    return absl::InvalidArgumentError("no sequence samples");
  }
  const size_t window = samples.front().hashes.size();
  for (const SequenceSample& s : samples) {
    if (s.hashes.size() != window || window == 0) {
      return absl::FailedPreconditionError(
          "samples must all be hashed over the same window");
    }
  }
  if (samples.size() < static_cast<size_t>(k)) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "window position 1 has %d machine-weeks, fewer than k=%d",
        samples.size(), k));
  }
  std::vector<CohortMap> maps;
  std::vector<SimHashValue> position_hashes(samples.size());
  for (SequenceSample& s : samples) s.cohort_ids.assign(window, 0);
  for (size_t p = 0; p < window; ++p) {
    for (size_t i = 0; i < samples.size(); ++i) {
      position_hashes[i] = samples[i].hashes[p];
    }
    absl::StatusOr<CohortMap> map =
        BuildCohortMap(position_hashes, k, bit_length);
    if (!map.ok()) return map.status();
    for (SequenceSample& s : samples) s.cohort_ids[p] = map->Assign(s.hashes[p]);
    maps.push_back(*std::move(map));
  }
  return maps;
}

inline absl::StatusOr<std::vector<CohortMap>> AssignSequenceCohorts(
    std::span<SequenceSample> samples,
    std::span<const MachineWeek> machine_weeks, int k,
    const SimHashConfig& config) {
  if (absl::Status s = HashSequences(samples, machine_weeks, config); !s.ok()) {
    return s;
  }
  return AssignSequenceCohortsFromHashes(samples, k, config.bit_length);
}

struct HorizonRow {
  int weeks_observed = 0;
  int64_t unique_sequence = 0;
  double frac_unique_sequence = 0.0;
  // Present when the fingerprint column was requested.
  std::optional<int64_t> unique_with_fingerprint;
  std::optional<double> frac_unique_with_fingerprint;
};

struct UnicityReport {
  int64_t n_samples = 0;
  int k = 0;
  bool use_fingerprint = false;
  // Samples with a known state; the fingerprint column's denominator.
  int64_t n_fingerprint_samples = 0;
  int64_t n_unknown_state = 0;
  std::vector<HorizonRow> rows;
  std::vector<int> cohort_counts_per_week;

  nlohmann::json ToJson() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const HorizonRow& r : rows) {
      nlohmann::json row = {{"weeks_observed", r.weeks_observed},
                            {"unique_sequence", r.unique_sequence},
                            {"frac_unique_sequence", r.frac_unique_sequence}};
      if (r.frac_unique_with_fingerprint) {
        row["unique_with_fingerprint"] = *r.unique_with_fingerprint;
        row["frac_unique_with_fingerprint"] = *r.frac_unique_with_fingerprint;
      }
      rows_json.push_back(row);
    }
    return {{"n_samples", n_samples},
            {"k", k},
            {"use_fingerprint", use_fingerprint},
            {"n_fingerprint_samples", n_fingerprint_samples},
            {"n_unknown_state", n_unknown_state},
            {"cohort_counts_per_week", cohort_counts_per_week},
            {"rows", rows_json}};
  }
};

namespace unicity_internal {

// Refines group labels one horizon at a time: the label at horizon w is a
// dense ID of (label at w - 1, cohort at w). Returns the number of
// samples in singleton groups at every horizon.
inline std::vector<int64_t> UniqueCounts(std::span<const SequenceSample> samples,
                                         std::vector<int64_t> labels,
                                         size_t window) {
  std::vector<int64_t> unique(window, 0);
  absl::flat_hash_map<std::pair<int64_t, int32_t>, int64_t> ids;
  std::vector<int64_t> group_sizes;
  for (size_t w = 0; w < window; ++w) {
    ids.clear();
    group_sizes.clear();
    for (size_t i = 0; i < samples.size(); ++i) {
      auto [it, inserted] = ids.try_emplace(
          {labels[i], samples[i].cohort_ids[w]},
          static_cast<int64_t>(group_sizes.size()));
      if (inserted) group_sizes.push_back(0);
      ++group_sizes[it->second];
      labels[i] = it->second;
    }
    for (size_t i = 0; i < samples.size(); ++i) {
      if (group_sizes[labels[i]] == 1) ++unique[w];
    }
  }
  return unique;
}

}  // namespace unicity_internal

// Unicity at every horizon. The sequence column counts all samples; the
// fingerprint column counts only samples with a known state.
inline absl::StatusOr<UnicityReport> UnicityFractions(
    std::span<const SequenceSample> samples, bool use_fingerprint) {
  if (samples.empty()) {
    return absl::InvalidArgumentError("unicity needs at least one sample");
  }
  const size_t window = samples.front().cohort_ids.size();
  for (const SequenceSample& s : samples) {
    if (s.cohort_ids.size() != window || window == 0) {
      return absl::FailedPreconditionError(
          "samples must all carry cohort IDs for the same window");
    }
  }
  UnicityReport report;
  report.n_samples = static_cast<int64_t>(samples.size());
  report.use_fingerprint = use_fingerprint;

  const std::vector<int64_t> unique = unicity_internal::UniqueCounts(
      samples, std::vector<int64_t>(samples.size(), 0), window);

  std::vector<int64_t> unique_fp;
  if (use_fingerprint) {
    std::vector<SequenceSample> known;
    std::vector<int64_t> labels;
    std::map<std::string, int64_t> state_ids;
    for (const SequenceSample& s : samples) {
      if (!s.fingerprint) {
        ++report.n_unknown_state;
        continue;
      }
      auto [it, inserted] = state_ids.try_emplace(
          *s.fingerprint, static_cast<int64_t>(state_ids.size()));
      labels.push_back(it->second);
      SequenceSample slim;
      slim.cohort_ids = s.cohort_ids;
      known.push_back(std::move(slim));
    }
    report.n_fingerprint_samples = static_cast<int64_t>(known.size());
    if (!known.empty()) {
      unique_fp = unicity_internal::UniqueCounts(known, labels, window);
    } else {
      unique_fp.assign(window, 0);
    }
  }

  for (size_t w = 0; w < window; ++w) {
    HorizonRow row;
    row.weeks_observed = static_cast<int>(w + 1);
    row.unique_sequence = unique[w];
    row.frac_unique_sequence =
        static_cast<double>(unique[w]) / static_cast<double>(report.n_samples);
    if (use_fingerprint) {
      row.unique_with_fingerprint = unique_fp[w];
      row.frac_unique_with_fingerprint =
          report.n_fingerprint_samples == 0
              ? 0.0
              : static_cast<double>(unique_fp[w]) /
                    static_cast<double>(report.n_fingerprint_samples);
    }
    report.rows.push_back(row);
  }
  return report;
}

// Clusters the (already hashed) samples with minimum cohort size k and
// reports unicity with and without the fingerprint.
inline absl::StatusOr<UnicityReport> ComputeUnicity(
    std::span<SequenceSample> samples, int k, int bit_length) {
  absl::StatusOr<std::vector<CohortMap>> maps =
      AssignSequenceCohortsFromHashes(samples, k, bit_length);
  if (!maps.ok()) return maps.status();
  absl::StatusOr<UnicityReport> report =
      UnicityFractions(samples, /*use_fingerprint=*/true);
  if (!report.ok()) return report.status();
  report->k = k;
  for (const CohortMap& m : *maps) {
    report->cohort_counts_per_week.push_back(m.num_cohorts());
  }
  return report;
}

struct SweepPoint {
  // N for population sweeps, k for k sweeps.
  int64_t parameter = 0;
  UnicityReport report;
};

namespace unicity_internal {

inline std::vector<SequenceSample> HashOnlyCopy(
    std::span<const SequenceSample> samples, std::span<const size_t> pick) {
  std::vector<SequenceSample> out;
  out.reserve(pick.size());
  for (size_t i : pick) {
    SequenceSample s;
    s.sample_id = samples[i].sample_id;
    s.machine_id = samples[i].machine_id;
    s.window_start_week = samples[i].window_start_week;
    s.hashes = samples[i].hashes;
    s.fingerprint = samples[i].fingerprint;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace unicity_internal

// For each N, draws N samples without replacement (seeded by N, so repeated
// grid values give identical reports) and recomputes cohorts on them.
inline absl::StatusOr<std::vector<SweepPoint>> SweepPopulation(
    std::span<const SequenceSample> samples, int k,
    std::span<const int64_t> n_grid, uint64_t seed, int bit_length,
    int workers = 1) {
  for (int64_t n : n_grid) {
    if (n > static_cast<int64_t>(samples.size())) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "N=%d exceeds the %d available samples", n, samples.size()));
    }
    if (n < k) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "N=%d leaves fewer than k=%d machine-weeks per week", n, k));
    }
  }
  std::vector<absl::StatusOr<UnicityReport>> reports(
      n_grid.size(), absl::UnknownError("not run"));
  ParallelFor(n_grid.size(), workers, [&](size_t g) {
    Engine engine = MakeEngine(seed, "sweep-n", static_cast<uint64_t>(n_grid[g]));
    const std::vector<size_t> pick = SampleWithoutReplacement(
        samples.size(), static_cast<size_t>(n_grid[g]), engine);
    std::vector<SequenceSample> subset =
        unicity_internal::HashOnlyCopy(samples, pick);
    reports[g] = ComputeUnicity(subset, k, bit_length);
  });
  std::vector<SweepPoint> out;
  for (size_t g = 0; g < n_grid.size(); ++g) {
    if (!reports[g].ok()) return reports[g].status();
    out.push_back({n_grid[g], *std::move(reports[g])});
  }
  return out;
}

inline absl::StatusOr<std::vector<SweepPoint>> SweepK(
    std::span<const SequenceSample> samples, std::span<const int> k_grid,
    int bit_length, int workers = 1) {
  for (int k : k_grid) {
    if (k < 1) return absl::InvalidArgumentError("k must be >= 1");
    if (static_cast<size_t>(k) > samples.size()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "k=%d exceeds the %d machine-weeks per week", k, samples.size()));
    }
  }
  std::vector<size_t> all(samples.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<absl::StatusOr<UnicityReport>> reports(
      k_grid.size(), absl::UnknownError("not run"));
  ParallelFor(k_grid.size(), workers, [&](size_t g) {
    std::vector<SequenceSample> copy = unicity_internal::HashOnlyCopy(samples, all);
    reports[g] = ComputeUnicity(copy, k_grid[g], bit_length);
  });
  std::vector<SweepPoint> out;
  for (size_t g = 0; g < k_grid.size(); ++g) {
    if (!reports[g].ok()) return reports[g].status();
    out.push_back({k_grid[g], *std::move(reports[g])});
  }
  return out;
}

namespace unicity_internal {

inline void WriteRows(std::ostream& out, const UnicityReport& report) {
  for (const HorizonRow& r : report.rows) {
    out << r.weeks_observed << ','
        << absl::StrFormat("%.12g", r.frac_unique_sequence) << ',';
    if (r.frac_unique_with_fingerprint) {
      out << absl::StrFormat("%.12g", *r.frac_unique_with_fingerprint);
    }
    out << ',' << report.n_samples << ',' << report.k << '\n';
  }
}

}  // namespace unicity_internal

inline void WriteUnicityCsv(std::ostream& out, const UnicityReport& report) {
  out << "weeks_observed,frac_unique,frac_unique_fp,n,k\n";
  unicity_internal::WriteRows(out, report);
}

// Rows of every sweep point; the n and k columns identify the point.
inline void WriteSweepCsv(std::ostream& out,
                          std::span<const SweepPoint> points) {
  out << "weeks_observed,frac_unique,frac_unique_fp,n,k\n";
  for (const SweepPoint& p : points) {
    unicity_internal::WriteRows(out, p.report);
  }
}

inline nlohmann::json SweepToJson(const std::string& parameter_name,
                                  std::span<const SweepPoint> points) {
  nlohmann::json j = nlohmann::json::array();
  for (const SweepPoint& p : points) {
    j.push_back({{parameter_name, p.parameter}, {"report", p.report.ToJson()}});
  }
  return j;
}

}  // namespace floc

#endif  // FLOC_UNICITY_H_
