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

// t-closeness of cohorts with respect to race or income.
//
// A cohort's anomalous category is the group whose share in the cohort
// most exceeds its share in the panel; the cohort violates t-closeness
// when that excess is strictly greater than t.

#ifndef FLOC_T_CLOSENESS_H_
#define FLOC_T_CLOSENESS_H_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "absl/container/flat_hash_map.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"
#include "floc/demographics.h"
#include "floc/panels.h"
#include "floc/random.h"
#include "floc/stats.h"
#include "json.hpp"

namespace floc {

// Absolute slack on the strict comparison, so that shares which equal
// p + t in exact arithmetic do not count as violations through rounding.
inline constexpr double kThresholdSlack = 1e-12;

inline std::vector<double> DefaultTGrid() {
  std::vector<double> grid;
  for (int i = 0; i <= 50; ++i) grid.push_back(i / 100.0);
  return grid;
}

struct AnomalousCategory {
  int category = 0;
  double excess = 0.0;
};

// Ties go to the lowest category index (race: White, Black, Asian, Other;
// income: ascending bands).
inline AnomalousCategory AnomalousCategoryOf(
    std::span<const int64_t> counts, std::span<const double> population) {
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  AnomalousCategory best{0, -2.0};
  for (size_t i = 0; i < counts.size() && i < population.size(); ++i) {
    const double share =
        total == 0 ? 0.0
                   : static_cast<double>(counts[i]) / static_cast<double>(total);
    const double excess = share - population[i];
    if (excess > best.excess) best = {static_cast<int>(i), excess};
  }
  return best;
}

inline bool ExceedsThreshold(double excess, double t) {
  return excess > t + kThresholdSlack;
}

// Per-cohort group counts and excesses for one panel and attribute.
struct CohortDemographics {
  std::array<double, kNumGroups> population{};
  std::vector<std::array<int64_t, kNumGroups>> counts;
  std::vector<int64_t> sizes;
  std::vector<AnomalousCategory> anomalous;

  // excess[c][r] = share of group r in cohort c minus its panel share.
  double Excess(size_t cohort, int group) const {
    return static_cast<double>(counts[cohort][group]) /
               static_cast<double>(sizes[cohort]) -
           population[group];
  }
};

inline absl::StatusOr<CohortDemographics> TabulateCohorts(const Panel& panel,
                                                          Attribute attribute) {
  if (panel.cohort_ids.size() != panel.members.size() ||
      panel.num_cohorts < 1) {
    return absl::FailedPreconditionError(
        absl::StrFormat("panel %d has not been clustered", panel.panel_id));
  }
  CohortDemographics t;
  t.counts.assign(panel.num_cohorts, {});
  t.sizes.assign(panel.num_cohorts, 0);
  std::array<int64_t, kNumGroups> totals{};
  for (size_t i = 0; i < panel.members.size(); ++i) {
    const int g = GroupIndex(panel.members[i].demographics, attribute);
    ++t.counts[panel.cohort_ids[i]][g];
    ++t.sizes[panel.cohort_ids[i]];
    ++totals[g];
  }
  for (int g = 0; g < kNumGroups; ++g) {
    t.population[g] = static_cast<double>(totals[g]) /
                      static_cast<double>(panel.members.size());
  }
  for (size_t c = 0; c < t.counts.size(); ++c) {
    t.anomalous.push_back(AnomalousCategoryOf(t.counts[c], t.population));
  }
  return t;
}

struct PanelViolations {
  double fraction = 0.0;
  std::vector<bool> flags;
  std::vector<AnomalousCategory> anomalous;
};

inline absl::StatusOr<PanelViolations> TViolations(const Panel& panel, double t,
                                                   Attribute attribute) {
  absl::StatusOr<CohortDemographics> tab = TabulateCohorts(panel, attribute);
  if (!tab.ok()) return tab.status();
  PanelViolations v;
  v.anomalous = tab->anomalous;
  int64_t flagged = 0;
  for (const AnomalousCategory& a : tab->anomalous) {
    v.flags.push_back(ExceedsThreshold(a.excess, t));
    flagged += v.flags.back();
  }
  v.fraction = static_cast<double>(flagged) /
               static_cast<double>(tab->anomalous.size());
  return v;
}

// 1 - F(floor(n (p + t)); n, p) for X ~ Binomial(n, p).
inline double BinomialBaseline(int64_t n, double p, double t) {
  const double x = static_cast<double>(n) * (p + t);
  const double k_r = std::floor(x + 1e-9 * std::max(1.0, std::fabs(x)));
  if (k_r >= static_cast<double>(n)) return 0.0;
  if (k_r < 0.0) return 1.0;
  return BinomialSurvival(static_cast<int64_t>(k_r), n, p);
}

// Violating fractions of one panel over a threshold grid: overall (by the
// anomalous category) and per group (cohorts in which that group's excess
// is above t). The size-matched columns hold the binomial expectation of
// the same fraction given each cohort's own size, and its variance.
struct PanelCurve {
  std::vector<double> overall;
  std::array<std::vector<double>, kNumGroups> by_group;
  std::vector<double> overall_expected;
  std::vector<double> overall_variance;
  std::array<std::vector<double>, kNumGroups> group_expected;
  std::array<std::vector<double>, kNumGroups> group_variance;
  std::array<double, kNumGroups> population{};
  int64_t members = 0;
  int64_t cohorts = 0;
};

inline absl::StatusOr<PanelCurve> PanelViolationCurve(
    const Panel& panel, std::span<const double> t_grid, Attribute attribute) {
  absl::StatusOr<CohortDemographics> tab = TabulateCohorts(panel, attribute);
  if (!tab.ok()) return tab.status();
  PanelCurve curve;
  curve.population = tab->population;
  curve.members = static_cast<int64_t>(panel.members.size());
  curve.cohorts = static_cast<int64_t>(tab->sizes.size());
  const double n = static_cast<double>(curve.cohorts);
  absl::flat_hash_map<int64_t, std::array<double, kNumGroups>> by_size;
  for (double t : t_grid) {
    int64_t overall = 0;
    std::array<int64_t, kNumGroups> groups{};
    for (size_t c = 0; c < tab->sizes.size(); ++c) {
      overall += ExceedsThreshold(tab->anomalous[c].excess, t);
      for (int g = 0; g < kNumGroups; ++g) {
        groups[g] += ExceedsThreshold(tab->Excess(c, g), t);
      }
    }
    curve.overall.push_back(static_cast<double>(overall) / n);
    for (int g = 0; g < kNumGroups; ++g) {
      curve.by_group[g].push_back(static_cast<double>(groups[g]) / n);
    }

    by_size.clear();
    double o_mean = 0.0, o_var = 0.0;
    std::array<double, kNumGroups> g_mean{}, g_var{};
    for (int64_t size : tab->sizes) {
      auto [it, inserted] = by_size.try_emplace(size);
      if (inserted) {
        for (int g = 0; g < kNumGroups; ++g) {
          it->second[g] = BinomialBaseline(size, curve.population[g], t);
        }
      }
      double none = 1.0;
      for (int g = 0; g < kNumGroups; ++g) {
        const double b = it->second[g];
        g_mean[g] += b;
        g_var[g] += b * (1.0 - b);
        none *= 1.0 - b;
      }
      o_mean += 1.0 - none;
      o_var += none * (1.0 - none);
    }
    curve.overall_expected.push_back(o_mean / n);
    curve.overall_variance.push_back(o_var / (n * n));
    for (int g = 0; g < kNumGroups; ++g) {
      curve.group_expected[g].push_back(g_mean[g] / n);
      curve.group_variance[g].push_back(g_var[g] / (n * n));
    }
  }
  return curve;
}

struct CurvePoint {
  double t = 0.0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::optional<double> shuffle_baseline;
  double binomial_baseline = 0.0;
  // Binomial expectation at each cohort's own size, and the standard
  // error of the mean under that model.
  double size_matched_baseline = 0.0;
  double size_matched_se = 0.0;
};

struct TClosenessReport {
  Attribute attribute = Attribute::kRace;
  int64_t n_panels = 0;
  double mean_panel_size = 0.0;
  double mean_cohort_size = 0.0;
  // n used by the binomial baseline.
  int64_t binomial_n = 0;
  std::array<double, kNumGroups> population{};
  std::vector<CurvePoint> overall;
  std::array<std::vector<CurvePoint>, kNumGroups> by_group;

  nlohmann::json ToJson() const {
    auto points = [](const std::vector<CurvePoint>& pts) {
      nlohmann::json j = nlohmann::json::array();
      for (const CurvePoint& p : pts) {
        nlohmann::json row = {{"t", p.t},
                              {"mean", p.mean},
                              {"ci_low", p.ci_low},
                              {"ci_high", p.ci_high},
                              {"binomial_baseline", p.binomial_baseline},
                              {"size_matched_baseline", p.size_matched_baseline},
                              {"size_matched_se", p.size_matched_se}};
        row["shuffle_baseline"] = p.shuffle_baseline
                                      ? nlohmann::json(*p.shuffle_baseline)
                                      : nlohmann::json(nullptr);
        j.push_back(row);
      }
      return j;
    };
    nlohmann::json groups = nlohmann::json::array();
    for (int g = 0; g < kNumGroups; ++g) {
      groups.push_back({{"group", GroupToken(attribute, g)},
                        {"label", GroupLabel(attribute, g)},
                        {"population_frequency", population[g]},
                        {"curve", points(by_group[g])}});
    }
    return {{"attribute", AttributeName(attribute)},
            {"n_panels", n_panels},
            {"mean_panel_size", mean_panel_size},
            {"mean_cohort_size", mean_cohort_size},
            {"binomial_n", binomial_n},
            {"overall", points(overall)},
            {"groups", groups}};
  }
};

namespace t_closeness_internal {

inline CurvePoint Summarize(double t, std::span<const double> values,
                            double t_quantile) {
  CurvePoint p;
  p.t = t;
  p.mean = Mean(values);
  const double half =
      t_quantile * std::sqrt(SampleVariance(values) /
                             static_cast<double>(values.size()));
  p.ci_low = p.mean - half;
  p.ci_high = p.mean + half;
  return p;
}

}  // namespace t_closeness_internal

// Mean violating fraction across panels with a two-sided 95% Student-t
// interval. The per-group binomial baseline uses n = round(mean cohort
// size); the overall baseline treats groups as independent.
inline absl::StatusOr<TClosenessReport> TClosenessCurve(
    std::span<const Panel> panels, std::span<const double> t_grid,
    Attribute attribute) {
  if (panels.size() < 2) {
    return absl::InvalidArgumentError(
        "t-closeness confidence intervals need at least 2 panels");
  }
  if (t_grid.empty()) return absl::InvalidArgumentError("empty t grid");
  std::vector<PanelCurve> curves;
  curves.reserve(panels.size());
  for (const Panel& panel : panels) {
    absl::StatusOr<PanelCurve> c = PanelViolationCurve(panel, t_grid, attribute);
    if (!c.ok()) return c.status();
    curves.push_back(*std::move(c));
  }
  TClosenessReport report;
  report.attribute = attribute;
  report.n_panels = static_cast<int64_t>(panels.size());
  int64_t members = 0;
  int64_t cohorts = 0;
  for (const PanelCurve& c : curves) {
    members += c.members;
    cohorts += c.cohorts;
    for (int g = 0; g < kNumGroups; ++g) report.population[g] += c.population[g];
  }
  for (int g = 0; g < kNumGroups; ++g) {
    report.population[g] /= static_cast<double>(curves.size());
  }
  report.mean_panel_size =
      static_cast<double>(members) / static_cast<double>(curves.size());
  report.mean_cohort_size =
      static_cast<double>(members) / static_cast<double>(cohorts);
  report.binomial_n =
      std::max<int64_t>(1, std::llround(report.mean_cohort_size));

  const double q = StudentTQuantile(0.975, static_cast<double>(curves.size() - 1));
  const double panels_n = static_cast<double>(curves.size());
  std::vector<double> values(curves.size());
  // Mean of the size-matched expectations and the standard error of the
  // mean of independent panels.
  auto size_matched = [&](CurvePoint& point, auto expected, auto variance) {
    double e = 0.0, v = 0.0;
    for (const PanelCurve& c : curves) {
      e += expected(c);
      v += variance(c);
    }
    point.size_matched_baseline = e / panels_n;
    point.size_matched_se = std::sqrt(v) / panels_n;
  };
  for (size_t ti = 0; ti < t_grid.size(); ++ti) {
    const double t = t_grid[ti];
    for (size_t i = 0; i < curves.size(); ++i) values[i] = curves[i].overall[ti];
    CurvePoint overall = t_closeness_internal::Summarize(t, values, q);
    size_matched(
        overall, [&](const PanelCurve& c) { return c.overall_expected[ti]; },
        [&](const PanelCurve& c) { return c.overall_variance[ti]; });
    double none = 1.0;
    for (int g = 0; g < kNumGroups; ++g) {
      for (size_t i = 0; i < curves.size(); ++i) {
        values[i] = curves[i].by_group[g][ti];
      }
      CurvePoint point = t_closeness_internal::Summarize(t, values, q);
      point.binomial_baseline =
          BinomialBaseline(report.binomial_n, report.population[g], t);
      size_matched(
          point, [&](const PanelCurve& c) { return c.group_expected[g][ti]; },
          [&](const PanelCurve& c) { return c.group_variance[g][ti]; });
      none *= 1.0 - point.binomial_baseline;
      report.by_group[g].push_back(point);
    }
    overall.binomial_baseline = 1.0 - none;
    report.overall.push_back(overall);
  }
  return report;
}

// Permutes the hash column against the demographics and re-clusters with
// the panel's k. `permutation[i]` is the member whose hash member i gets.
inline absl::StatusOr<Panel> ShuffleBaseline(
    const Panel& panel, std::span<const size_t> permutation) {
  if (permutation.size() != panel.members.size()) {
    return absl::InvalidArgumentError("permutation size does not match panel");
  }
  if (panel.k < 1) {
    return absl::FailedPreconditionError(
        absl::StrFormat("panel %d has not been clustered", panel.panel_id));
  }
  Panel shuffled = panel;
  for (size_t i = 0; i < permutation.size(); ++i) {
    if (permutation[i] >= panel.members.size()) {
      return absl::InvalidArgumentError("permutation index out of range");
    }
    shuffled.members[i].hash = panel.members[permutation[i]].hash;
  }
  if (absl::Status s = ClusterPanel(shuffled, panel.k, panel.bit_length);
      !s.ok()) {
    return s;
  }
  return shuffled;
}

inline absl::StatusOr<Panel> ShuffleBaseline(const Panel& panel, uint64_t seed) {
  std::vector<size_t> permutation(panel.members.size());
  for (size_t i = 0; i < permutation.size(); ++i) permutation[i] = i;
  Engine engine =
      MakeEngine(seed, "shuffle", static_cast<uint64_t>(panel.panel_id));
  Shuffle(std::span<size_t>(permutation), engine);
  return ShuffleBaseline(panel, permutation);
}

// Copies the shuffled curve means into `report` as its shuffle baseline.
inline absl::Status AttachShuffleBaseline(TClosenessReport& report,
                                          const TClosenessReport& shuffled) {
  if (shuffled.overall.size() != report.overall.size()) {
    return absl::InvalidArgumentError("shuffle curve has a different t grid");
  }
  for (size_t i = 0; i < report.overall.size(); ++i) {
    report.overall[i].shuffle_baseline = shuffled.overall[i].mean;
    for (int g = 0; g < kNumGroups; ++g) {
      report.by_group[g][i].shuffle_baseline = shuffled.by_group[g][i].mean;
    }
  }
  return absl::OkStatus();
}

namespace t_closeness_internal {

inline void WritePoint(std::ostream& out, const CurvePoint& p) {
  out << absl::StrFormat("%.4g,%.12g,%.12g,%.12g,", p.t, p.mean, p.ci_low,
                         p.ci_high);
  if (p.shuffle_baseline) out << absl::StrFormat("%.12g", *p.shuffle_baseline);
  out << absl::StrFormat(",%.12g,%.12g\n", p.binomial_baseline,
                         p.size_matched_baseline);
}

}  // namespace t_closeness_internal

inline void WriteTClosenessCsv(std::ostream& out,
                               const TClosenessReport& report) {
  out << "t,mean,ci_low,ci_high,shuffle_baseline,binomial_baseline,"
         "size_matched_baseline\n";
  for (const CurvePoint& p : report.overall) {
    t_closeness_internal::WritePoint(out, p);
  }
}

inline void WriteTClosenessGroupCsv(std::ostream& out,
                                    const TClosenessReport& report) {
  out << "group,t,mean,ci_low,ci_high,shuffle_baseline,binomial_baseline,"
         "size_matched_baseline\n";
  for (int g = 0; g < kNumGroups; ++g) {
    for (const CurvePoint& p : report.by_group[g]) {
      out << GroupToken(report.attribute, g) << ',';
      t_closeness_internal::WritePoint(out, p);
    }
  }
}

}  // namespace floc

#endif  // FLOC_T_CLOSENESS_H_
