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

// Acceptance run: one PASS/FAIL line per criterion. With no arguments all
// criteria run; otherwise only the numbered ones.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "boost/multiprecision/cpp_bin_float.hpp"
#include "boost/multiprecision/cpp_int.hpp"
#include "floc/browsing_difference.h"
#include "floc/cohorts.h"
#include "floc/demographics.h"
#include "floc/machine_week.h"
#include "floc/ot_control.h"
#include "floc/panels.h"
#include "floc/prefix_lsh.h"
#include "floc/random.h"
#include "floc/stats.h"
#include "floc/synth.h"
#include "floc/t_closeness.h"
#include "floc/unicity.h"

namespace floc {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

JointDistribution Cps() {
  return *JointDistribution::LoadFile(
      std::string(FLOC_DATA_DIR) +
      "/joint_distribution_cps2017_illustrative.json");
}

std::string Fraction(int64_t num, int64_t den) {
  return absl::StrCat(num, "/", den);
}

// --- 1 --------------------------------------------------------------------

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int RunCli(const std::string& args, const std::string& log) {
  const std::string cmd =
      absl::StrCat("\"", FLOC_CLI_PATH, "\" ", args, " > \"", log, "\" 2>&1");
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() /
                       absl::StrCat("floc_acceptance_", ::getpid()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome ToyExample() {
  const std::string fixture =
      std::string(FLOC_DATA_DIR) + "/fixtures/toy_sequences.tsv";
  const std::vector<MachineWeek> mws = *ReadMachineWeeksFile(fixture);
  std::vector<SequenceSample> samples = BuildSequences(mws, kDefaultWindow);
  if (!HashSequences(samples, mws, SimHashConfig{}).ok()) return {false, "hash"};
  absl::StatusOr<UnicityReport> report = ComputeUnicity(samples, 3, kDefaultSimHashBits);
  if (!report.ok()) return {false, std::string(report.status().message())};
  const std::vector<int64_t> want_seq = {0, 2, 6};
  const std::vector<int64_t> want_fp = {2, 6, 6};
  bool pass = report->n_samples == 6 && report->n_fingerprint_samples == 6;
  std::vector<std::string> seq, fp;
  for (int h = 0; h < 3; ++h) {
    const HorizonRow& row = report->rows[h];
    pass = pass && row.unique_sequence == want_seq[h] &&
           row.unique_with_fingerprint == want_fp[h];
    seq.push_back(Fraction(row.unique_sequence, report->n_samples));
    fp.push_back(Fraction(row.unique_with_fingerprint.value_or(-1),
                          report->n_fingerprint_samples));
  }
  // Same numbers through the CLI.
  const fs::path dir = Scratch("c1");
  const int rc = RunCli(absl::StrCat("unicity --k 3 --input \"", fixture,
                                     "\" --out \"", (dir / "u").string(), "\""),
                        (dir / "log").string());
  const std::string csv = ReadFile((dir / "u" / "unicity.csv").string());
  const std::string want_csv =
      "weeks_observed,frac_unique,frac_unique_fp,n,k\n"
      "1,0,0.333333333333,6,3\n"
      "2,0.333333333333,1,6,3\n"
      "3,1,1,6,3\n";
  const bool cli = rc == 0 && csv.rfind(want_csv, 0) == 0;
  return {pass && cli,
          absl::StrFormat("sequence %s, with state %s; CLI %s",
                          absl::StrJoin(seq, " "), absl::StrJoin(fp, " "),
                          cli ? "matches" : "differs")};
}

// --- 2 --------------------------------------------------------------------

Outcome PrefixLshProperties() {
  Engine engine = MakeEngine(2, "acceptance-prefix-lsh");
  int64_t checked = 0;
  int64_t cohorts_seen = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int bits = 1 + static_cast<int>(UniformIndex(engine, 64));
    const size_t n = 1 + UniformIndex(engine, 2000);
    const int k = 1 + static_cast<int>(UniformIndex(engine, n));
    // A pool smaller than n forces duplicate hashes in some cases.
    const size_t pool_size = 1 + UniformIndex(engine, n);
    std::vector<uint64_t> pool(pool_size);
    for (uint64_t& v : pool) {
      v = bits == 64 ? engine() : UniformIndex(engine, uint64_t{1} << bits);
    }
    std::vector<SimHashValue> hashes(n);
    for (SimHashValue& h : hashes) h.bits = pool[UniformIndex(engine, pool_size)];
    absl::StatusOr<CohortMap> map = BuildCohortMap(hashes, k, bits);
    if (!map.ok()) {
      return {false, absl::StrFormat("case %d: %s", trial, map.status().message())};
    }
    // Prefixes as half-open intervals of the hash space.
    struct Interval {
      __uint128_t start, end;
      size_t entry;
    };
    std::vector<Interval> intervals;
    __uint128_t covered = 0;
    for (size_t e = 0; e < map->entries().size(); ++e) {
      const CohortEntry& c = map->entries()[e];
      const int shift = bits - c.prefix_length;
      const __uint128_t start = static_cast<__uint128_t>(c.prefix) << shift;
      const __uint128_t width = static_cast<__uint128_t>(1) << shift;
      intervals.push_back({start, start + width, e});
      covered += width;
    }
    std::sort(intervals.begin(), intervals.end(),
              [](const Interval& a, const Interval& b) { return a.start < b.start; });
    bool disjoint = true;
    for (size_t i = 1; i < intervals.size(); ++i) {
      disjoint = disjoint && intervals[i].start >= intervals[i - 1].end;
    }
    if (!disjoint || covered != (static_cast<__uint128_t>(1) << bits)) {
      return {false, absl::StrFormat("case %d: prefixes do not tile", trial)};
    }
    std::vector<int64_t> members(intervals.size(), 0);
    for (SimHashValue h : hashes) {
      auto it = std::upper_bound(
          intervals.begin(), intervals.end(), static_cast<__uint128_t>(h.bits),
          [](__uint128_t v, const Interval& iv) { return v < iv.start; });
      --it;
      if (h.bits >= it->end) return {false, "unassigned hash"};
      ++members[it->entry];
      if (map->Assign(h) != map->entries()[it->entry].cohort_id) {
        return {false, absl::StrFormat("case %d: Assign disagrees", trial)};
      }
    }
    int64_t total = 0;
    for (int64_t m : members) {
      if (m < k) {
        return {false, absl::StrFormat("case %d: cohort of %d < k=%d", trial, m, k)};
      }
      total += m;
    }
    if (total != static_cast<int64_t>(n)) return {false, "member counts"};
    ++checked;
    cohorts_seen += static_cast<int64_t>(members.size());
  }
  return {true, absl::StrFormat("%d cases, %d cohorts, all >= k, tiling exact",
                                checked, cohorts_seen)};
}

// --- 3 --------------------------------------------------------------------

// Singleton counts per horizon by direct key comparison.
std::vector<int64_t> BruteUnique(const std::vector<SequenceSample>& s,
                                 bool with_state) {
  std::vector<int64_t> out;
  const size_t window = s.empty() ? 0 : s[0].cohort_ids.size();
  for (size_t h = 1; h <= window; ++h) {
    std::map<std::pair<std::string, std::vector<int32_t>>, int64_t> counts;
    for (const SequenceSample& x : s) {
      if (with_state && !x.fingerprint) continue;
      std::vector<int32_t> key(x.cohort_ids.begin(), x.cohort_ids.begin() + h);
      ++counts[{with_state ? *x.fingerprint : "", key}];
    }
    int64_t unique = 0;
    for (const auto& [key, c] : counts) unique += c == 1;
    out.push_back(unique);
  }
  return out;
}

Outcome UnicityMonotonicity() {
  Engine engine = MakeEngine(3, "acceptance-unicity");
  static const std::vector<std::string> kStates = {"AL", "CA", "NY", "TX", "WA"};
  int with_unknown = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 1 + UniformIndex(engine, 400);
    const int alphabet = 1 + static_cast<int>(UniformIndex(engine, 6));
    const int states = 1 + static_cast<int>(UniformIndex(engine, kStates.size()));
    const double unknown = trial % 2 == 0 ? 0.0 : 0.3 * UniformDouble(engine);
    std::vector<SequenceSample> samples(n);
    bool any_known = false, any_unknown = false;
    for (size_t i = 0; i < n; ++i) {
      SequenceSample& s = samples[i];
      s.sample_id = static_cast<int64_t>(i);
      s.machine_id = static_cast<int64_t>(i);
      for (int w = 0; w < kDefaultWindow; ++w) {
        s.cohort_ids.push_back(static_cast<int32_t>(UniformIndex(engine, alphabet)));
      }
      if (UniformDouble(engine) >= unknown) {
        s.fingerprint = kStates[UniformIndex(engine, states)];
        any_known = true;
      } else {
        any_unknown = true;
      }
    }
    with_unknown += any_unknown;
    absl::StatusOr<UnicityReport> r = UnicityFractions(samples, true);
    if (!r.ok() || !any_known) {
      if (!any_known && !r.ok()) continue;
      if (!r.ok()) return {false, std::string(r.status().message())};
    }
    // Dominance is asserted on the fingerprint-known subpopulation.
    std::vector<SequenceSample> known;
    for (const SequenceSample& s : samples) {
      if (s.fingerprint) known.push_back(s);
    }
    const UnicityReport known_seq = *UnicityFractions(known, false);
    const std::vector<int64_t> brute_seq = BruteUnique(samples, false);
    const std::vector<int64_t> brute_fp = BruteUnique(samples, true);
    for (size_t h = 0; h < r->rows.size(); ++h) {
      const HorizonRow& row = r->rows[h];
      if (row.unique_sequence != brute_seq[h] ||
          row.unique_with_fingerprint != brute_fp[h]) {
        return {false, absl::StrFormat("case %d: counts differ from brute force", trial)};
      }
      if (h > 0 && (row.frac_unique_sequence < r->rows[h - 1].frac_unique_sequence ||
                    *row.frac_unique_with_fingerprint <
                        *r->rows[h - 1].frac_unique_with_fingerprint)) {
        return {false, absl::StrFormat("case %d: not monotone at %d", trial, h + 1)};
      }
      if (*row.frac_unique_with_fingerprint < known_seq.rows[h].frac_unique_sequence) {
        return {false, absl::StrFormat("case %d: fingerprint below sequence", trial)};
      }
      if (!any_unknown &&
          *row.frac_unique_with_fingerprint < row.frac_unique_sequence) {
        return {false, absl::StrFormat("case %d: report columns", trial)};
      }
    }
  }
  return {true, absl::StrFormat(
                    "100 cases (%d with unknown states), brute-force counts agree",
                    with_unknown)};
}

// --- 4 --------------------------------------------------------------------

Outcome UnicityTrends() {
  std::vector<std::string> notes;
  for (uint64_t seed : {1, 2, 3}) {
    SynthConfig c;
    c.n_machines = 25000;
    c.n_weeks = 32;
    c.skew = 0.5;
    c.target = Cps();
    c.seed = seed;
    const SynthPopulation pop = *GeneratePopulation(c);
    std::vector<SequenceSample> seqs = BuildSequences(pop.machine_weeks, 4);
    if (!HashSequences(seqs, pop.machine_weeks, SimHashConfig{}).ok()) {
      return {false, "hash"};
    }
    const std::vector<int64_t> n_grid = {20000, 40000, 60000, 80000, 100000};
    const int k_fixed = 1000;
    absl::StatusOr<std::vector<SweepPoint>> by_n =
        SweepPopulation(seqs, k_fixed, n_grid, seed, kDefaultSimHashBits);
    if (!by_n.ok()) return {false, std::string(by_n.status().message())};
    std::vector<double> x, y;
    for (const SweepPoint& p : *by_n) {
      x.push_back(static_cast<double>(p.parameter));
      y.push_back(p.report.rows[2].frac_unique_sequence);
    }
    const double rho_n = *SpearmanCorrelation(x, y);
    const std::string n_values = absl::StrJoin(y, ",", [](std::string* o, double v) {
      absl::StrAppend(o, absl::StrFormat("%.3f", v));
    });

    Engine engine = MakeEngine(seed, "acceptance-k-subsample");
    std::vector<SequenceSample> sub;
    for (size_t i : SampleWithoutReplacement(seqs.size(), 50000, engine)) {
      sub.push_back(seqs[i]);
    }
    const std::vector<int> k_grid = {250, 500, 1000, 1500, 2000};
    absl::StatusOr<std::vector<SweepPoint>> by_k =
        SweepK(sub, k_grid, kDefaultSimHashBits);
    if (!by_k.ok()) return {false, std::string(by_k.status().message())};
    x.clear();
    y.clear();
    for (const SweepPoint& p : *by_k) {
      x.push_back(static_cast<double>(p.parameter));
      y.push_back(p.report.rows[2].frac_unique_sequence);
    }
    const double rho_k = *SpearmanCorrelation(x, y);
    const std::string k_values = absl::StrJoin(y, ",", [](std::string* o, double v) {
      absl::StrAppend(o, absl::StrFormat("%.3f", v));
    });
    notes.push_back(absl::StrFormat(
        "seed %d (%d sequences): rho_N=%.2f [%s] at k=%d, rho_k=%.2f [%s] at N=50000",
        seed, seqs.size(), rho_n, n_values, k_fixed, rho_k, k_values));
    if (rho_n >= 0.6 && rho_k <= -0.6) return {true, notes.back()};
  }
  return {false, absl::StrJoin(notes, "; ")};
}

// --- 5 --------------------------------------------------------------------

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

// Exact P(X > k) for X ~ Binomial(n, num/den): integer sum, one division.
cpp_rational ExactSurvival(int64_t k, int64_t n, int64_t num, int64_t den) {
  const int64_t rest = den - num;
  cpp_int choose = 1;
  for (int64_t i = 1; i <= k + 1; ++i) {
    choose *= n - i + 1;
    choose /= i;
  }
  cpp_int num_pow = boost::multiprecision::pow(cpp_int(num), k + 1);
  cpp_int rest_pow = boost::multiprecision::pow(cpp_int(rest), n - k - 1);
  cpp_int sum = 0;
  for (int64_t i = k + 1; i <= n; ++i) {
    sum += choose * num_pow * rest_pow;
    if (i == n) break;
    choose *= n - i;
    choose /= i + 1;
    num_pow *= num;
    rest_pow /= rest;
  }
  return cpp_rational(sum, boost::multiprecision::pow(cpp_int(den), n));
}

Outcome BinomialExactness() {
  const double small = BinomialBaseline(10, 0.5, 0.0);
  const bool small_ok = std::fabs(small - 0.376953125) <= 1e-12 &&
                        ExactSurvival(5, 10, 1, 2) == cpp_rational(386, 1024);
  // k_r = 3000 * (13 + 10) / 100 = 690 exactly.
  const double oracle = static_cast<double>(
      boost::multiprecision::cpp_bin_float_100(ExactSurvival(690, 3000, 13, 100)));
  const double got = BinomialBaseline(3000, 0.13, 0.1);
  const double rel = std::fabs(got - oracle) / oracle;
  return {small_ok && rel <= 1e-10,
          absl::StrFormat("1-F(5;10,0.5)=%.12g; (3000,0.13,0.1)=%.6e vs exact %.6e, "
                          "rel err %.2e",
                          small, got, oracle, rel)};
}

// --- 6 and 7 --------------------------------------------------------------

struct PanelRun {
  std::vector<Panel> panels;
  std::vector<Panel> shuffled;
};

const PanelRun& SharedPanels() {
  static const PanelRun* run = [] {
    auto* r = new PanelRun;
    SynthConfig c;
    c.n_machines = 100000;
    c.n_weeks = 10;
    c.skew = 0.5;
    c.target = Cps();
    c.seed = 1;
    const SynthPopulation pop = *GeneratePopulation(c);
    const std::vector<SimHashValue> hashes =
        *HashMachineWeeks(pop.machine_weeks, SimHashConfig{});
    r->panels = *StratifiedPanels(pop.machine_weeks, hashes, c.target,
                                  kDefaultPanelsPerWeek, 2);
    for (Panel& p : r->panels) {
      if (!ClusterPanel(p, kDefaultPanelK, kDefaultSimHashBits).ok()) std::abort();
      r->shuffled.push_back(*ShuffleBaseline(p, uint64_t{3}));
    }
    return r;
  }();
  return *run;
}

Outcome ShuffleMatchesBinomial() {
  const PanelRun& run = SharedPanels();
  const std::vector<double> grid = {0.05, 0.1, 0.2};
  const double q = StudentTQuantile(0.975, static_cast<double>(run.shuffled.size() - 1));
  bool pass = run.shuffled.size() == 100;
  double worst = 0.0, worst_mean_n = 0.0;
  std::string worst_where;
  int64_t binomial_n = 0;
  for (Attribute a : {Attribute::kRace, Attribute::kIncome}) {
    const TClosenessReport r = *TClosenessCurve(run.shuffled, grid, a);
    binomial_n = r.binomial_n;
    for (int g = 0; g < kNumGroups; ++g) {
      for (size_t i = 0; i < grid.size(); ++i) {
        const CurvePoint& p = r.by_group[g][i];
        double se = (p.ci_high - p.mean) / q;
        // Every panel at zero has no spread; fall back to the model SE.
        if (se == 0.0) se = p.size_matched_se;
        const double z = se > 0.0 ? (p.mean - p.size_matched_baseline) / se
                                  : (p.mean == p.size_matched_baseline ? 0.0 : 1e9);
        if (std::fabs(z) > worst) {
          worst = std::fabs(z);
          worst_where = absl::StrFormat("%s/%s t=%.2f (%.5f vs %.5f)",
                                        AttributeName(a), GroupToken(a, g), grid[i],
                                        p.mean, p.size_matched_baseline);
        }
        if (se > 0.0) {
          worst_mean_n = std::max(worst_mean_n,
                                  std::fabs(p.mean - p.binomial_baseline) / se);
        }
        pass = pass && std::fabs(z) <= 3.0;
      }
    }
  }
  return {pass, absl::StrFormat(
                    "%d shuffled panels of %d, 8 groups x 3 t: max |z|=%.2f at %s "
                    "against the size-matched baseline (single n=%d: max |z|=%.2f)",
                    run.shuffled.size(), run.shuffled[0].members.size(), worst,
                    worst_where, binomial_n, worst_mean_n)};
}

Outcome TClosenessMonotone() {
  const PanelRun& run = SharedPanels();
  const std::vector<double> grid = DefaultTGrid();
  int64_t curves = 0;
  for (const std::vector<Panel>* set : {&run.panels, &run.shuffled}) {
    for (const Panel& p : *set) {
      for (Attribute a : {Attribute::kRace, Attribute::kIncome}) {
        const PanelCurve c = *PanelViolationCurve(p, grid, a);
        for (size_t i = 0; i < grid.size(); ++i) {
          const double v = c.overall[i];
          if (v < 0.0 || v > 1.0 || (i > 0 && v > c.overall[i - 1])) {
            return {false, absl::StrFormat("panel %d %s at t=%.2f", p.panel_id,
                                           AttributeName(a), grid[i])};
          }
          for (int g = 0; g < kNumGroups; ++g) {
            const double w = c.by_group[g][i];
            if (w < 0.0 || w > 1.0 || (i > 0 && w > c.by_group[g][i - 1])) {
              return {false, "per-group curve"};
            }
          }
        }
        ++curves;
      }
    }
  }
  return {true, absl::StrFormat("%d panel curves over %d thresholds", curves,
                                grid.size())};
}

// --- 8 --------------------------------------------------------------------

Outcome OtScale() {
  const JointDistribution target = Cps();
  OtControlConfig config;  // 33,872 cohorts, k=2000, ratio 1.5, t=0.1
  config.seed = 8;
  absl::StatusOr<OtControlResult> r = OtScaleControl(config, target, 0);
  if (!r.ok()) return {false, std::string(r.status().message())};
  std::map<int64_t, int64_t> sizes;
  for (int64_t n : r->cohort_sizes) ++sizes[n];
  double expected = 0.0;
  for (Attribute a : {Attribute::kRace, Attribute::kIncome}) {
    const auto marginal = target.Marginal(a);
    for (const auto& [n, count] : sizes) {
      for (int g = 0; g < kNumGroups; ++g) {
        expected += count * BinomialBaseline(n, marginal[g], config.t);
      }
    }
  }
  const bool pass = r->race().violations == 0 && r->income().violations == 0 &&
                    static_cast<int64_t>(r->cohort_sizes.size()) == config.num_cohorts;
  return {pass, absl::StrFormat(
                    "%d cohorts, %d members: race %d, income %d violating; max excess "
                    "%.4f / %.4f; binomial expectation %.2e",
                    config.num_cohorts, r->total_members, r->race().violations,
                    r->income().violations, r->race().max_excess,
                    r->income().max_excess, expected)};
}

// --- 9 --------------------------------------------------------------------

Outcome ChiSquareEngine() {
  const std::vector<double> agg = {40, 25, 17, 9, 3};
  std::vector<double> obs;
  for (double a : agg) obs.push_back(3 * a);
  const ChiSquareResult prop = *ChiSquareTest(obs, agg);
  const std::vector<double> o = {10, 20}, e = {15, 15};
  const ChiSquareResult hand = *ChiSquareTest(o, e);
  // Reference: chi-square(1) survival = erfc(sqrt(x / 2)).
  const double reference = std::erfc(std::sqrt(hand.statistic / 2.0));
  const bool exact = prop.statistic == 0.0 && prop.p_value == 1.0 &&
                     std::fabs(hand.statistic - 10.0 / 3.0) <= 1e-10 &&
                     std::fabs(hand.p_value - 0.0679) <= 1e-4 &&
                     std::fabs(hand.p_value - reference) <= 1e-12;

  const std::vector<int> d = {50};
  int all_significant = 0, race_significant = 0, control_null = 0;
  double worst_group_p = 0.0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    SynthConfig c;
    c.n_machines = 20000;
    c.n_weeks = 4;
    c.skew = 0.5;
    c.target = Cps();
    c.seed = 900 + seed;
    const SynthPopulation pop = *GeneratePopulation(c);
    bool races = true, groups = true;
    for (const ChiSquareRow& r : *BrowsingDifference(pop.machine_weeks, d, seed)) {
      if (r.attribute == "control") {
        control_null += r.p_value > 0.05;
        continue;
      }
      worst_group_p = std::max(worst_group_p, r.p_value);
      groups = groups && r.p_value < 1e-4;
      if (r.attribute == "race") races = races && r.p_value < 1e-4;
    }
    race_significant += races;
    all_significant += groups;
  }
  const bool pass = exact && race_significant == 50 && control_null >= 45;
  return {pass, absl::StrFormat(
                    "proportional: stat %g p %g; (10,20) vs (15,15): stat %.12f p %.6f; "
                    "50 runs at skew 0.5, D=50: every race group p<1e-4 in %d, every "
                    "race and income group in %d (max p %.1e); random quarter p>0.05 "
                    "in %d",
                    prop.statistic, prop.p_value, hand.statistic, hand.p_value,
                    race_significant, all_significant, worst_group_p, control_null)};
}

// --- 10 -------------------------------------------------------------------

std::map<std::string, std::string> Tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), dir).string()] = ReadFile(e.path().string());
    }
  }
  return files;
}

Outcome CliDeterminism() {
  const fs::path root = Scratch("c10");
  const std::string r = root.string();
  auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  struct Step {
    std::string name;
    std::string args;
  };
  const fs::path synth = root / "synth";
  const std::vector<Step> steps = {
      {"synth", "synth --seed 7 --machines 4000 --weeks 8 --sessions true"},
      {"preprocess", "preprocess --sessions " + q(synth / "sessions.tsv")},
      {"cohorts", "cohorts --k 200 --input " + q(root / "preprocess")},
      {"unicity", "unicity --k 200 --input " + q(root / "cohorts")},
      {"sweep-n", "sweep-n --k 200 --n-grid 1000,3000,5000 --seed 4 --input " + q(synth)},
      {"sweep-k", "sweep-k --k-grid 100,200,400 --n 5000 --seed 4 --input " + q(synth)},
      {"t-closeness", "t-closeness --panels 10 --weeks 4 --k 30 --seed 5 --input " + q(synth)},
      {"chisq", "chisq --seed 6 --input " + q(synth)},
      {"ot-control", "ot-control --cohorts 500 --k 200 --seed 9"},
      {"report", "report --runs " + q(root / "unicity") + "," + q(root / "t-closeness") +
                     "," + q(root / "ot-control")},
  };
  std::vector<std::string> failures;
  int compared = 0;
  for (const Step& s : steps) {
    const fs::path first = root / s.name;
    const fs::path again = root / (s.name + ".rerun");
    if (RunCli(s.args + " --out " + q(first), r + "/" + s.name + ".log") != 0) {
      failures.push_back(s.name + " failed: " + ReadFile(r + "/" + s.name + ".log"));
      continue;
    }
    const std::string rerun = s.name + " --config " + q(first / "manifest.json") +
                              " --workers 1 --out " + q(again);
    if (RunCli(rerun, r + "/" + s.name + ".rerun.log") != 0) {
      failures.push_back(s.name + " rerun failed: " +
                         ReadFile(r + "/" + s.name + ".rerun.log"));
      continue;
    }
    const auto a = Tree(first), b = Tree(again);
    if (a != b || a.empty()) {
      failures.push_back(s.name + " outputs differ");
    } else {
      compared += static_cast<int>(a.size());
    }
  }
  // The t-closeness smoke run must produce JSON and CSV curves plus a manifest.
  for (const char* f : {"t_closeness_race.json", "t_closeness_race.csv",
                        "t_closeness_income.json", "t_closeness_income.csv",
                        "manifest.json"}) {
    if (!fs::exists(root / "t-closeness" / f)) {
      failures.push_back(std::string("missing t-closeness/") + f);
    }
  }
  if (!failures.empty()) return {false, absl::StrJoin(failures, "; ")};
  return {true, absl::StrFormat("%d subcommands rerun from their manifests, %d files "
                                "byte-identical",
                                steps.size(), compared)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

int Main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "toy sequence example", ToyExample},
      {2, "PrefixLSH k-anonymity properties", PrefixLshProperties},
      {3, "unicity monotonicity", UnicityMonotonicity},
      {4, "unicity trends in N and k", UnicityTrends},
      {5, "binomial baseline exactness", BinomialExactness},
      {6, "shuffled panels vs binomial", ShuffleMatchesBinomial},
      {7, "t-closeness monotonicity", TClosenessMonotone},
      {8, "population-scale control", OtScale},
      {9, "chi-square engine", ChiSquareEngine},
      {10, "CLI determinism", CliDeterminism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    const Outcome o = c.run();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << absl::StrFormat("%s criterion %d (%s) [%.1f s]: %s\n",
                                 o.pass ? "PASS" : "FAIL", c.id, c.name, seconds,
                                 o.detail)
              << std::flush;
    failed += !o.pass;
  }
  fs::remove_all(fs::temp_directory_path() /
                 absl::StrCat("floc_acceptance_", ::getpid()));
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace floc

int main(int argc, char** argv) { return floc::Main(argc, argv); }
