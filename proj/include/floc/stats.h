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

// Special functions and small statistical routines used by the analyses.
//
// The incomplete gamma follows the usual split: the power series converges
// fast for x < a + 1, the Lentz continued fraction for x >= a + 1. The
// incomplete beta uses its continued fraction together with the symmetry
// I_x(a, b) = 1 - I_{1-x}(b, a) when x > (a + 1) / (a + b + 2). Binomial
// tails are summed in log space.

#ifndef FLOC_STATS_H_
#define FLOC_STATS_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"

namespace floc {
namespace stats_internal {

constexpr double kEpsilon = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 10000;

// P(a, x) by its power series. Valid for x < a + 1.
inline double GammaSeries(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEpsilon) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by modified Lentz on the continued fraction. Valid for x >= a + 1.
inline double GammaContinuedFraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEpsilon) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double BetaContinuedFraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxIterations; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEpsilon) break;
  }
  return h;
}

}  // namespace stats_internal

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
inline double RegularizedGammaP(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return stats_internal::GammaSeries(a, x);
  return 1.0 - stats_internal::GammaContinuedFraction(a, x);
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double RegularizedGammaQ(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - stats_internal::GammaSeries(a, x);
  return stats_internal::GammaContinuedFraction(a, x);
}

// Upper tail of the chi-square distribution with `df` degrees of freedom.
inline double ChiSquareSurvival(double statistic, double df) {
  return RegularizedGammaQ(df / 2.0, statistic / 2.0);
}

// Regularized incomplete beta I_x(a, b).
inline double RegularizedBeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) -
                           std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * stats_internal::BetaContinuedFraction(a, b, x) / a;
  }
  return 1.0 - front * stats_internal::BetaContinuedFraction(b, a, 1.0 - x) / b;
}

inline double StudentTCdf(double t, double df) {
  const double x = df / (df + t * t);
  const double tail = 0.5 * RegularizedBeta(df / 2.0, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

// Inverse of StudentTCdf by bracketing and bisection; p in (0, 1).
inline double StudentTQuantile(double p, double df) {
  double lo = -1.0;
  double hi = 1.0;
  while (StudentTCdf(lo, df) > p) lo *= 2.0;
  while (StudentTCdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::fabs(hi));
       ++i) {
    const double mid = 0.5 * (lo + hi);
    if (StudentTCdf(mid, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double LogBinomialCoefficient(int64_t n, int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

namespace stats_internal {

// log sum_{i=lo}^{hi} C(n,i) p^i (1-p)^(n-i), with 0 < p < 1 and lo <= hi.
inline double LogBinomialRangeMass(int64_t n, double p, int64_t lo,
                                   int64_t hi) {
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  double max_term = -std::numeric_limits<double>::infinity();
  for (int64_t i = lo; i <= hi; ++i) {
    const double term = LogBinomialCoefficient(n, i) + i * log_p +
                        static_cast<double>(n - i) * log_q;
    max_term = std::max(max_term, term);
  }
  double sum = 0.0;
  for (int64_t i = lo; i <= hi; ++i) {
    const double term = LogBinomialCoefficient(n, i) + i * log_p +
                        static_cast<double>(n - i) * log_q;
    sum += std::exp(term - max_term);
  }
  return max_term + std::log(sum);
}

}  // namespace stats_internal

// Pr(X > k) for X ~ Binomial(n, p). The smaller tail is always the one
// summed, so tiny upper tails keep full relative precision.
inline double BinomialSurvival(int64_t k, int64_t n, double p) {
  if (k < 0) return 1.0;
  if (k >= n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  if (static_cast<double>(k + 1) > n * p) {
    return std::exp(stats_internal::LogBinomialRangeMass(n, p, k + 1, n));
  }
  return -std::expm1(stats_internal::LogBinomialRangeMass(n, p, 0, k));
}

// Pr(X <= k) for X ~ Binomial(n, p).
inline double BinomialCdf(int64_t k, int64_t n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  if (static_cast<double>(k) < n * p) {
    return std::exp(stats_internal::LogBinomialRangeMass(n, p, 0, k));
  }
  return -std::expm1(stats_internal::LogBinomialRangeMass(n, p, k + 1, n));
}

inline double Mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

// Unbiased (n - 1) sample variance; 0 for fewer than two values.
inline double SampleVariance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = Mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size() - 1);
}

inline absl::StatusOr<double> PearsonCorrelation(std::span<const double> x,
                                                 std::span<const double> y) {
  if (x.size() != y.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "correlation inputs differ in length: %d vs %d", x.size(), y.size()));
  }
  if (x.size() < 2) {
    return absl::InvalidArgumentError("correlation needs at least 2 points");
  }
  const double mx = Mean(x);
  const double my = Mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    return absl::InvalidArgumentError(
        "correlation undefined for zero-variance input");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Two-sided p-value of a sample Pearson r over n points (t test, n - 2 df).
inline double PearsonPValue(double r, int64_t n) {
  if (n < 3) return 1.0;
  if (std::fabs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = r * std::sqrt(df / (1.0 - r * r));
  return 2.0 * StudentTCdf(-std::fabs(t), df);
}

// Ranks starting at 1; tied values share their average rank.
inline std::vector<double> AverageRanks(std::span<const double> values) {
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t m = i; m <= j; ++m) ranks[order[m]] = rank;
    i = j + 1;
  }
  return ranks;
}

// Pearson correlation of average ranks.
inline absl::StatusOr<double> SpearmanCorrelation(std::span<const double> x,
                                                  std::span<const double> y) {
  if (x.size() != y.size()) {
    return absl::InvalidArgumentError("correlation inputs differ in length");
  }
  const std::vector<double> rx = AverageRanks(x);
  const std::vector<double> ry = AverageRanks(y);
  return PearsonCorrelation(rx, ry);
}

}  // namespace floc

#endif  // FLOC_STATS_H_
