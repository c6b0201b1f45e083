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

#ifndef FLOC_DEMOGRAPHICS_H_
#define FLOC_DEMOGRAPHICS_H_

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_format.h"
#include "absl/strings/string_view.h"
#include "json.hpp"

namespace floc {

// Category order below is also the tie-break order for anomalous categories.
enum class Race : uint8_t { kWhite = 0, kBlack, kAsian, kOther };
enum class Income : uint8_t {
  kUnder25k = 0,
  k25kTo75k,
  k75kTo150k,
  k150kOrMore,
};

inline constexpr int kNumRaceGroups = 4;
inline constexpr int kNumIncomeGroups = 4;
inline constexpr int kNumCells = kNumRaceGroups * kNumIncomeGroups;
inline constexpr int kNumGroups = 4;

enum class Attribute : uint8_t { kRace, kIncome };

struct Demographics {
  Race race = Race::kWhite;
  Income income = Income::kUnder25k;

  friend bool operator==(const Demographics&, const Demographics&) = default;
};

inline int CellIndex(const Demographics& d) {
  return static_cast<int>(d.race) * kNumIncomeGroups +
         static_cast<int>(d.income);
}

inline Demographics CellDemographics(int cell) {
  return {static_cast<Race>(cell / kNumIncomeGroups),
          static_cast<Income>(cell % kNumIncomeGroups)};
}

inline int GroupIndex(const Demographics& d, Attribute attribute) {
  return attribute == Attribute::kRace ? static_cast<int>(d.race)
                                       : static_cast<int>(d.income);
}

// Short tokens used in text stores; labels are for reports.
inline constexpr std::array<absl::string_view, 4> kRaceTokens = {
    "white", "black", "asian", "other"};
inline constexpr std::array<absl::string_view, 4> kIncomeTokens = {
    "lt25k", "25k-75k", "75k-150k", "ge150k"};
inline constexpr std::array<absl::string_view, 4> kRaceLabels = {
    "White", "Black", "Asian", "Other"};
inline constexpr std::array<absl::string_view, 4> kIncomeLabels = {
    "less than $25,000", "$25,000 - $75,000", "$75,000 - $150,000",
    "$150,000 or more"};

inline absl::string_view RaceToken(Race r) {
  return kRaceTokens[static_cast<int>(r)];
}
inline absl::string_view IncomeToken(Income i) {
  return kIncomeTokens[static_cast<int>(i)];
}

inline absl::string_view AttributeName(Attribute a) {
  return a == Attribute::kRace ? "race" : "income";
}

inline absl::string_view GroupLabel(Attribute a, int group) {
  return a == Attribute::kRace ? kRaceLabels[group] : kIncomeLabels[group];
}

inline absl::string_view GroupToken(Attribute a, int group) {
  return a == Attribute::kRace ? kRaceTokens[group] : kIncomeTokens[group];
}

inline std::optional<Attribute> ParseAttribute(absl::string_view s) {
  if (s == "race") return Attribute::kRace;
  if (s == "income") return Attribute::kIncome;
  return std::nullopt;
}

// Accepts either the token or the label.
inline std::optional<Race> ParseRace(absl::string_view s) {
  for (int i = 0; i < kNumRaceGroups; ++i) {
    if (s == kRaceTokens[i] || s == kRaceLabels[i]) return static_cast<Race>(i);
  }
  return std::nullopt;
}

inline std::optional<Income> ParseIncome(absl::string_view s) {
  for (int i = 0; i < kNumIncomeGroups; ++i) {
    if (s == kIncomeTokens[i] || s == kIncomeLabels[i]) {
      return static_cast<Income>(i);
    }
  }
  return std::nullopt;
}

// Joint race x income distribution; rows are race, columns income.
class JointDistribution {
 public:
  using Grid = std::array<std::array<double, kNumIncomeGroups>, kNumRaceGroups>;

  static absl::StatusOr<JointDistribution> Create(const Grid& cells) {
    double total = 0.0;
    for (const auto& row : cells) {
      for (double p : row) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
          return absl::InvalidArgumentError(
              "joint distribution cells must be finite and non-negative");
        }
        total += p;
      }
    }
    if (std::fabs(total - 1.0) > 1e-9) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "joint distribution must sum to 1 within 1e-9, got %.12f", total));
    }
    return JointDistribution(cells);
  }

  static JointDistribution Uniform() {
    Grid g;
    for (auto& row : g) row.fill(1.0 / kNumCells);
    return JointDistribution(g);
  }

  // {"race_labels": [...], "income_labels": [...], "probabilities": [[...]]}
  // Label arrays are optional; when present they must match the fixed order.
  static absl::StatusOr<JointDistribution> FromJson(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("probabilities")) {
      return absl::InvalidArgumentError(
          "joint distribution JSON needs a 'probabilities' grid");
    }
    if (j.contains("race_labels")) {
      const auto& labels = j["race_labels"];
      if (!labels.is_array() || labels.size() != kNumRaceGroups) {
        return absl::InvalidArgumentError("race_labels must list 4 groups");
      }
      for (int i = 0; i < kNumRaceGroups; ++i) {
        auto r = ParseRace(labels[i].get<std::string>());
        if (!r || static_cast<int>(*r) != i) {
          return absl::InvalidArgumentError(absl::StrFormat(
              "race_labels[%d] must be '%s'", i, kRaceLabels[i]));
        }
      }
    }
    if (j.contains("income_labels")) {
      const auto& labels = j["income_labels"];
      if (!labels.is_array() || labels.size() != kNumIncomeGroups) {
        return absl::InvalidArgumentError("income_labels must list 4 groups");
      }
      for (int i = 0; i < kNumIncomeGroups; ++i) {
        auto v = ParseIncome(labels[i].get<std::string>());
        if (!v || static_cast<int>(*v) != i) {
          return absl::InvalidArgumentError(absl::StrFormat(
              "income_labels[%d] must be '%s'", i, kIncomeLabels[i]));
        }
      }
    }
    const auto& rows = j["probabilities"];
    if (!rows.is_array() || rows.size() != kNumRaceGroups) {
      return absl::InvalidArgumentError("probabilities must have 4 rows");
    }
    Grid g;
    for (int r = 0; r < kNumRaceGroups; ++r) {
      if (!rows[r].is_array() || rows[r].size() != kNumIncomeGroups) {
        return absl::InvalidArgumentError(
            absl::StrFormat("probabilities row %d must have 4 columns", r));
      }
      for (int i = 0; i < kNumIncomeGroups; ++i) {
        if (!rows[r][i].is_number()) {
          return absl::InvalidArgumentError("probabilities must be numbers");
        }
        g[r][i] = rows[r][i].get<double>();
      }
    }
    return Create(g);
  }

  static absl::StatusOr<JointDistribution> LoadFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) return absl::NotFoundError("cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) {
      return absl::InvalidArgumentError("malformed JSON in " + path);
    }
    return FromJson(j);
  }

  nlohmann::json ToJson() const {
    nlohmann::json j;
    j["race_labels"] = kRaceLabels;
    j["income_labels"] = kIncomeLabels;
    j["probabilities"] = cells_;
    return j;
  }

  double cell(Race r, Income i) const {
    return cells_[static_cast<int>(r)][static_cast<int>(i)];
  }
  double cell(int index) const {
    return cells_[index / kNumIncomeGroups][index % kNumIncomeGroups];
  }
  const Grid& cells() const { return cells_; }

  std::array<double, kNumGroups> Marginal(Attribute attribute) const {
    std::array<double, kNumGroups> m{};
    for (int r = 0; r < kNumRaceGroups; ++r) {
      for (int i = 0; i < kNumIncomeGroups; ++i) {
        m[attribute == Attribute::kRace ? r : i] += cells_[r][i];
      }
    }
    return m;
  }

 private:
  explicit JointDistribution(const Grid& cells) : cells_(cells) {}

  Grid cells_;
};

// Maps raw categorical codes in session files to demographic groups.
class DemographicCodeMap {
 public:
  // comScore Web Behavior Database household codes: race 1 White, 2 Black,
  // 3 Asian, 5 Other; income 11-12 under $25k, 13-15 $25k-$75k,
  // 16-17 $75k-$150k, 18 $150k and up.
  static DemographicCodeMap ComscoreDefault() {
    DemographicCodeMap m;
    m.race_ = {{"1", Race::kWhite},
               {"2", Race::kBlack},
               {"3", Race::kAsian},
               {"5", Race::kOther}};
    m.income_ = {{"11", Income::kUnder25k},  {"12", Income::kUnder25k},
                 {"13", Income::k25kTo75k},  {"14", Income::k25kTo75k},
                 {"15", Income::k25kTo75k},  {"16", Income::k75kTo150k},
                 {"17", Income::k75kTo150k}, {"18", Income::k150kOrMore}};
    return m;
  }

  // {"race": {"1": "White", ...}, "income": {"11": "lt25k", ...}}; values
  // may be tokens or labels.
  static absl::StatusOr<DemographicCodeMap> FromJson(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("race") || !j.contains("income") ||
        !j["race"].is_object() || !j["income"].is_object()) {
      return absl::InvalidArgumentError(
          "demographic code map needs 'race' and 'income' objects");
    }
    DemographicCodeMap m;
    for (const auto& [code, value] : j["race"].items()) {
      if (!value.is_string()) {
        return absl::InvalidArgumentError("race code values must be strings");
      }
      auto r = ParseRace(value.get<std::string>());
      if (!r) {
        return absl::InvalidArgumentError(
            "unknown race group '" + value.get<std::string>() + "'");
      }
      m.race_[code] = *r;
    }
    for (const auto& [code, value] : j["income"].items()) {
      if (!value.is_string()) {
        return absl::InvalidArgumentError(
            "income code values must be strings");
      }
      auto v = ParseIncome(value.get<std::string>());
      if (!v) {
        return absl::InvalidArgumentError(
            "unknown income group '" + value.get<std::string>() + "'");
      }
      m.income_[code] = *v;
    }
    return m;
  }

  static absl::StatusOr<DemographicCodeMap> LoadFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) return absl::NotFoundError("cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) {
      return absl::InvalidArgumentError("malformed JSON in " + path);
    }
    return FromJson(j);
  }

  std::optional<Race> race(absl::string_view code) const {
    auto it = race_.find(std::string(code));
    if (it == race_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<Income> income(absl::string_view code) const {
    auto it = income_.find(std::string(code));
    if (it == income_.end()) return std::nullopt;
    return it->second;
  }

  // Smallest code (in map order) for a group; used when writing sessions.
  std::string RaceCode(Race r) const {
    for (const auto& [code, value] : race_) {
      if (value == r) return code;
    }
    return std::string(RaceToken(r));
  }
  std::string IncomeCode(Income i) const {
    for (const auto& [code, value] : income_) {
      if (value == i) return code;
    }
    return std::string(IncomeToken(i));
  }

 private:
  std::map<std::string, Race> race_;
  std::map<std::string, Income> income_;
};

}  // namespace floc

#endif  // FLOC_DEMOGRAPHICS_H_
