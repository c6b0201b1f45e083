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

#ifndef FLOC_ZIP_STATE_H_
#define FLOC_ZIP_STATE_H_

#include <algorithm>
#include <array>
#include <cctype>
#include <string>

#include "absl/strings/string_view.h"

namespace floc {

// Sentinel for machines whose zip code has no state mapping.
inline constexpr absl::string_view kUnknownState = "??";

namespace zip_internal {

struct Zip3Range {
  int first;
  int last;
  absl::string_view state;
};

// USPS 3-digit zip prefixes, inclusive ranges, sorted by prefix. Military
// (AA/AE/AP) and unassigned prefixes are absent and map to kUnknownState.
inline constexpr std::array<Zip3Range, 64> kZip3Ranges = {{
    {5, 5, "NY"},     {6, 9, "PR"},     {10, 27, "MA"},   {28, 29, "RI"},
    {30, 38, "NH"},   {39, 49, "ME"},   {50, 54, "VT"},   {55, 55, "MA"},
    {56, 59, "VT"},   {60, 69, "CT"},   {70, 89, "NJ"},   {100, 149, "NY"},
    {150, 196, "PA"}, {197, 199, "DE"}, {200, 200, "DC"}, {201, 201, "VA"},
    {202, 205, "DC"}, {206, 219, "MD"}, {220, 246, "VA"}, {247, 268, "WV"},
    {270, 289, "NC"}, {290, 299, "SC"}, {300, 319, "GA"}, {320, 339, "FL"},
    {341, 349, "FL"}, {350, 369, "AL"}, {370, 385, "TN"}, {386, 397, "MS"},
    {398, 399, "GA"}, {400, 427, "KY"}, {430, 459, "OH"}, {460, 479, "IN"},
    {480, 499, "MI"}, {500, 528, "IA"}, {530, 549, "WI"}, {550, 567, "MN"},
    {569, 569, "DC"}, {570, 577, "SD"}, {580, 588, "ND"}, {590, 599, "MT"},
    {600, 629, "IL"}, {630, 658, "MO"}, {660, 679, "KS"}, {680, 693, "NE"},
    {700, 714, "LA"}, {716, 729, "AR"}, {730, 732, "OK"}, {733, 733, "TX"},
    {734, 749, "OK"}, {750, 799, "TX"}, {800, 816, "CO"}, {820, 831, "WY"},
    {832, 838, "ID"}, {840, 847, "UT"}, {850, 865, "AZ"}, {870, 884, "NM"},
    {885, 885, "TX"}, {889, 898, "NV"}, {900, 961, "CA"}, {967, 968, "HI"},
    {969, 969, "GU"}, {970, 979, "OR"}, {980, 994, "WA"}, {995, 999, "AK"},
}};

}  // namespace zip_internal

// Pads numeric zips that lost leading zeros ("2134" -> "02134"). Returns
// an empty string for anything that is not 1-5 digits.
inline std::string NormalizeZip(absl::string_view zip) {
  if (zip.empty() || zip.size() > 5) return {};
  if (!std::all_of(zip.begin(), zip.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
      })) {
    return {};
  }
  return std::string(5 - zip.size(), '0') + std::string(zip);
}

// Two-letter state code for a 5-digit zip, or kUnknownState.
inline absl::string_view StateForZip(absl::string_view zip) {
  const std::string z = NormalizeZip(zip);
  if (z.empty()) return kUnknownState;
  const int prefix = (z[0] - '0') * 100 + (z[1] - '0') * 10 + (z[2] - '0');
  for (const auto& range : zip_internal::kZip3Ranges) {
    if (prefix >= range.first && prefix <= range.last) return range.state;
  }
  return kUnknownState;
}

}  // namespace floc

#endif  // FLOC_ZIP_STATE_H_
