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

// Seeded synthetic browsing populations.
//
// Global domain popularity is Zipf over a fixed vocabulary. Each race and
// each income group permutes the popularity of the top stratum of the
// vocabulary; a machine's preference is the global distribution blended
// with the mean of its two group permutations at weight `skew`.

#ifndef FLOC_SYNTH_H_
#define FLOC_SYNTH_H_

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
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
#include "floc/parallel.h"
#include "floc/random.h"
#include "floc/sessions.h"
#include "floc/zip_state.h"
#include "json.hpp"

namespace floc {

struct SynthConfig {
  int64_t n_machines = 10000;
  int n_weeks = 52;
  int vocabulary_size = 5000;
  double zipf_exponent = 1.0;
  // Ranks whose popularity the group permutations reorder.
  int top_stratum = 200;
  // Domains per machine-week: min_domains plus a geometric excess, capped
  // at max_domains.
  int min_domains = kMinDomainsPerWeek;
  double mean_domains = 20.0;
  int max_domains = 100;
  // Probability that a machine is active in a given week.
  double week_presence = 0.9;
  // Share of machines whose zip has no state mapping.
  double unknown_zip_fraction = 0.02;
  double skew = 0.0;
  JointDistribution target = JointDistribution::Uniform();
  uint64_t seed = 0;

  nlohmann::json ToJson() const {
    return {{"n_machines", n_machines},
            {"n_weeks", n_weeks},
            {"vocabulary_size", vocabulary_size},
            {"zipf_exponent", zipf_exponent},
            {"top_stratum", top_stratum},
            {"min_domains", min_domains},
            {"mean_domains", mean_domains},
            {"max_domains", max_domains},
            {"week_presence", week_presence},
            {"unknown_zip_fraction", unknown_zip_fraction},
            {"skew", skew},
            {"seed", seed},
            {"target", target.ToJson()}};
  }
};

inline absl::Status ValidateSynthConfig(const SynthConfig& c) {
  if (c.n_machines < 1 || c.n_weeks < 1 || c.vocabulary_size < 1) {
    return absl::InvalidArgumentError(
        "n_machines, n_weeks and vocabulary_size must be >= 1");
  }
  if (!(c.skew >= 0.0 && c.skew <= 1.0)) {
    return absl::InvalidArgumentError("skew must be in [0, 1]");
  }
  if (c.min_domains < 1 || c.max_domains < c.min_domains) {
    return absl::InvalidArgumentError(
        "domains per week need 1 <= min_domains <= max_domains");
  }
  if (c.max_domains > c.vocabulary_size) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "max_domains=%d exceeds the vocabulary of %d domains", c.max_domains,
        c.vocabulary_size));
  }
  if (!(c.mean_domains >= c.min_domains)) {
    return absl::InvalidArgumentError("mean_domains must be >= min_domains");
  }
  if (!(c.week_presence > 0.0 && c.week_presence <= 1.0)) {
    return absl::InvalidArgumentError("week_presence must be in (0, 1]");
  }
  if (!(c.unknown_zip_fraction >= 0.0 && c.unknown_zip_fraction <= 1.0)) {
    return absl::InvalidArgumentError("unknown_zip_fraction must be in [0, 1]");
  }
  if (!(c.zipf_exponent >= 0.0) || c.top_stratum < 0) {
    return absl::InvalidArgumentError(
        "zipf_exponent and top_stratum must be non-negative");
  }
  return absl::OkStatus();
}

// Registrable name of the domain at popularity rank `rank` (0-based).
inline std::string SynthDomain(int rank) {
  static constexpr std::array<absl::string_view, 4> kSuffixes = {
      "com", "org", "net", "co.uk"};
  return absl::StrFormat("site%d.%s", rank + 1, kSuffixes[rank % 4]);
}

struct MachineProfile {
  int64_t machine_id = 0;
  Demographics demographics;
  std::string zip;
  std::string state;
};

struct SynthPopulation {
  // Ascending machine_id.
  std::vector<MachineProfile> machines;
  // Sorted by (machine_id, week_index).
  std::vector<MachineWeek> machine_weeks;
};

namespace synth_internal {

// Domain weights for every demographic cell.
inline std::array<std::vector<double>, kNumCells> CellWeights(
    const SynthConfig& c) {
  const int vocab = c.vocabulary_size;
  const int top = std::min(c.top_stratum, vocab);
  std::vector<double> global(vocab);
  double total = 0.0;
  for (int i = 0; i < vocab; ++i) {
    global[i] = std::pow(static_cast<double>(i + 1), -c.zipf_exponent);
    total += global[i];
  }
  for (double& g : global) g /= total;

  auto permutation = [&](absl::string_view purpose, int group) {
    std::vector<int> perm(top);
    for (int i = 0; i < top; ++i) perm[i] = i;
    Engine engine = MakeEngine(c.seed, purpose, static_cast<uint64_t>(group));
    Shuffle(std::span<int>(perm), engine);
    return perm;
  };
  std::array<std::vector<int>, kNumGroups> race_perm;
  std::array<std::vector<int>, kNumGroups> income_perm;
  for (int g = 0; g < kNumGroups; ++g) {
    race_perm[g] = permutation("synth-race-perm", g);
    income_perm[g] = permutation("synth-income-perm", g);
  }
  std::array<std::vector<double>, kNumCells> weights;
  for (int cell = 0; cell < kNumCells; ++cell) {
    const Demographics d = CellDemographics(cell);
    const std::vector<int>& rp = race_perm[static_cast<int>(d.race)];
    const std::vector<int>& ip = income_perm[static_cast<int>(d.income)];
    std::vector<double>& w = weights[cell];
    w = global;
    for (int i = 0; i < top; ++i) {
      w[i] = (1.0 - c.skew) * global[i] +
             c.skew * 0.5 * (global[rp[i]] + global[ip[i]]);
    }
  }
  return weights;
}

inline int DrawDomainCount(const SynthConfig& c, Engine& engine) {
  const double excess_mean = c.mean_domains - c.min_domains;
  int64_t extra = 0;
  if (excess_mean > 0.0) {
    const double q = excess_mean / (1.0 + excess_mean);
    const double u = 1.0 - UniformDouble(engine);  // in (0, 1]
    extra = static_cast<int64_t>(std::floor(std::log(u) / std::log(q)));
  }
  return static_cast<int>(
      std::min<int64_t>(c.min_domains + extra, c.max_domains));
}

inline std::string DrawZip(const SynthConfig& c, Engine& engine) {
  if (UniformDouble(engine) < c.unknown_zip_fraction) return "00000";
  const auto& ranges = zip_internal::kZip3Ranges;
  const auto& range = ranges[UniformIndex(engine, ranges.size())];
  const int prefix =
      range.first +
      static_cast<int>(UniformIndex(engine, range.last - range.first + 1));
  return absl::StrFormat("%03d%02d", prefix,
                         static_cast<int>(UniformIndex(engine, 100)));
}

}  // namespace synth_internal

inline absl::StatusOr<SynthPopulation> GeneratePopulation(
    const SynthConfig& config, int workers = 1) {
  if (absl::Status s = ValidateSynthConfig(config); !s.ok()) return s;
  const std::array<std::vector<double>, kNumCells> weights =
      synth_internal::CellWeights(config);
  std::vector<DiscreteSampler> domain_samplers;
  for (const auto& w : weights) domain_samplers.emplace_back(w);
  std::array<double, kNumCells> cell_weights{};
  for (int c = 0; c < kNumCells; ++c) cell_weights[c] = config.target.cell(c);
  const DiscreteSampler cell_sampler(cell_weights);
  std::vector<std::string> names(config.vocabulary_size);
  for (int i = 0; i < config.vocabulary_size; ++i) names[i] = SynthDomain(i);

  const size_t n = static_cast<size_t>(config.n_machines);
  SynthPopulation population;
  population.machines.resize(n);
  std::vector<std::vector<MachineWeek>> weeks(n);
  ParallelFor(n, workers, [&](size_t i) {
    Engine engine = MakeEngine(config.seed, "synth-machine", i);
    MachineProfile& profile = population.machines[i];
    profile.machine_id = static_cast<int64_t>(i) + 1;
    const int cell = static_cast<int>(cell_sampler(engine));
    profile.demographics = CellDemographics(cell);
    profile.zip = synth_internal::DrawZip(config, engine);
    profile.state = std::string(StateForZip(profile.zip));
    const DiscreteSampler& sampler = domain_samplers[cell];
    std::vector<int> ranks;
    for (int w = 0; w < config.n_weeks; ++w) {
      if (UniformDouble(engine) >= config.week_presence) continue;
      const int count = synth_internal::DrawDomainCount(config, engine);
      ranks.clear();
      while (static_cast<int>(ranks.size()) < count) {
        const int r = static_cast<int>(sampler(engine));
        if (std::find(ranks.begin(), ranks.end(), r) == ranks.end()) {
          ranks.push_back(r);
        }
      }
      MachineWeek mw;
      mw.machine_id = profile.machine_id;
      mw.week_index = w;
      mw.state = profile.state;
      mw.demographics = profile.demographics;
      for (int r : ranks) mw.domains.push_back(names[r]);
      std::sort(mw.domains.begin(), mw.domains.end());
      weeks[i].push_back(std::move(mw));
    }
  });
  for (auto& machine_weeks : weeks) {
    for (MachineWeek& mw : machine_weeks) {
      population.machine_weeks.push_back(std::move(mw));
    }
  }
  return population;
}

// One session per (machine-week, domain), dated inside the week.
inline std::vector<SessionRecord> ToSessionRecords(
    const SynthPopulation& population, const WeekConfig& weeks, uint64_t seed) {
  std::vector<SessionRecord> records;
  absl::flat_hash_map<int64_t, const MachineProfile*> profiles;
  for (const MachineProfile& p : population.machines) profiles[p.machine_id] = &p;
  const std::chrono::sys_days epoch(weeks.epoch);
  int64_t session_id = 1;
  for (size_t i = 0; i < population.machine_weeks.size(); ++i) {
    const MachineWeek& mw = population.machine_weeks[i];
    Engine engine = MakeEngine(seed, "synth-sessions", i);
    const MachineProfile& profile = *profiles.at(mw.machine_id);
    for (const std::string& domain : mw.domains) {
      SessionRecord r;
      r.machine_id = mw.machine_id;
      r.session_id = session_id++;
      r.domain = domain;
      r.date = std::chrono::year_month_day(
          epoch + std::chrono::days(7 * mw.week_index +
                                    static_cast<int>(UniformIndex(engine, 7))));
      r.seconds_of_day = static_cast<int32_t>(UniformIndex(engine, 86400));
      r.pages = 1 + static_cast<int64_t>(UniformIndex(engine, 5));
      r.duration_seconds = 5 + static_cast<int64_t>(UniformIndex(engine, 600));
      r.demographics = mw.demographics;
      r.zip = profile.zip;
      records.push_back(std::move(r));
    }
  }
  return records;
}

}  // namespace floc

#endif  // FLOC_SYNTH_H_
