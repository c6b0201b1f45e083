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

#ifndef FLOC_REPRESENTATIVENESS_H_
#define FLOC_REPRESENTATIVENESS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "floc/stats.h"
#include "json.hpp"

namespace floc {

// Category label -> count (or share; only relative values matter).
using CategoricalHistogram = std::map<std::string, double>;

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;
  int64_t categories = 0;

  nlohmann::json ToJson() const {
    return {{"pearson_r", r}, {"p_value", p_value}, {"categories", categories}};
  }
};

// Pearson correlation of category shares between an observed sample and a
// reference population, with a two-sided p-value.
inline absl::StatusOr<CorrelationResult> Representativeness(
    const CategoricalHistogram& observed,
    const CategoricalHistogram& reference) {
  if (observed.size() != reference.size()) {
    return absl::InvalidArgumentError("histograms have different categories");
  }
  if (observed.size() < 3) {
    return absl::InvalidArgumentError("need at least 3 categories");
  }
  double observed_total = 0.0;
  double reference_total = 0.0;
  for (auto o = observed.begin(), r = reference.begin(); o != observed.end();
       ++o, ++r) {
    if (o->first != r->first) {
      return absl::InvalidArgumentError("category '" + o->first +
                                        "' missing from reference");
    }
    if (o->second < 0 || r->second < 0) {
      return absl::InvalidArgumentError("histogram counts must be >= 0");
    }
    observed_total += o->second;
    reference_total += r->second;
  }
  if (observed_total <= 0 || reference_total <= 0) {
    return absl::InvalidArgumentError("histogram has zero total");
  }
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [label, count] : observed) x.push_back(count / observed_total);
  for (const auto& [label, count] : reference) {
    y.push_back(count / reference_total);
  }
  absl::StatusOr<double> r = PearsonCorrelation(x, y);
  if (!r.ok()) return r.status();
  CorrelationResult result;
  result.r = *r;
  result.categories = static_cast<int64_t>(x.size());
  result.p_value = PearsonPValue(*r, result.categories);
  return result;
}

}  // namespace floc

#endif  // FLOC_REPRESENTATIVENESS_H_
