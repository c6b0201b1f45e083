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

// Registrable-domain (eTLD+1) lookup against a public suffix list.
//
// Rules follow the standard list format: one rule per line, "//" comments,
// "*." wildcards and "!" exceptions. An exception rule beats every other
// match; otherwise the matching rule with the most labels prevails. Hosts
// with no matching rule are rejected instead of falling back to the
// implicit "*" rule, so unknown TLDs never count as valid eTLD+1s.

#ifndef FLOC_PUBLIC_SUFFIX_H_
#define FLOC_PUBLIC_SUFFIX_H_

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "absl/container/flat_hash_set.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/ascii.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/string_view.h"

namespace floc {

// Lowercases and strips a port and trailing dot. Returns nullopt for hosts
// that cannot be registrable domains: empty labels, IP literals, or
// characters outside [a-z0-9-_].
inline std::optional<std::string> NormalizeHost(absl::string_view host) {
  std::string h = absl::AsciiStrToLower(absl::StripAsciiWhitespace(host));
  if (h.empty() || h.front() == '[') return std::nullopt;  // IPv6 literal
  if (std::count(h.begin(), h.end(), ':') > 1) return std::nullopt;
  if (auto colon = h.find(':'); colon != std::string::npos) {
    const absl::string_view port(h.data() + colon + 1, h.size() - colon - 1);
    if (port.empty() || !std::all_of(port.begin(), port.end(), [](char c) {
          return std::isdigit(static_cast<unsigned char>(c));
        })) {
      return std::nullopt;
    }
    h.resize(colon);
  }
  if (!h.empty() && h.back() == '.') h.pop_back();
  if (h.empty()) return std::nullopt;
  bool all_numeric = true;
  size_t label_length = 0;
  for (char c : h) {
    if (c == '.') {
      if (label_length == 0) return std::nullopt;
      label_length = 0;
      continue;
    }
    ++label_length;
    if (!(std::islower(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '-' ||
          c == '_')) {
      return std::nullopt;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) all_numeric = false;
  }
  if (label_length == 0) return std::nullopt;
  if (all_numeric) return std::nullopt;  // IPv4 literal or bare number
  return h;
}

class SuffixSet {
 public:
  SuffixSet() = default;

  static SuffixSet FromRules(const std::vector<std::string>& rules) {
    SuffixSet set;
    for (const auto& rule : rules) set.AddRule(rule);
    return set;
  }

  static absl::StatusOr<SuffixSet> Parse(std::istream& in) {
    SuffixSet set;
    std::string line;
    while (std::getline(in, line)) {
      absl::string_view view = absl::StripAsciiWhitespace(line);
      if (view.empty() || view.substr(0, 2) == "//") continue;
      // Only the first whitespace-delimited token is the rule.
      const size_t end = view.find_first_of(" \t");
      set.AddRule(view.substr(0, end));
    }
    if (in.bad()) return absl::DataLossError("error reading suffix list");
    if (set.size() == 0) {
      return absl::InvalidArgumentError("suffix list contains no rules");
    }
    return set;
  }

  static absl::StatusOr<SuffixSet> LoadFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) return absl::NotFoundError("cannot open suffix list " + path);
    return Parse(in);
  }

  size_t size() const {
    return exact_.size() + wildcard_.size() + exception_.size();
  }

  // Returns the registrable domain for `host`, or nullopt if the host is
  // invalid, is itself a public suffix, or has no known suffix.
  std::optional<std::string> RegistrableDomain(absl::string_view host) const {
    auto normalized = NormalizeHost(host);
    if (!normalized) return std::nullopt;
    const std::vector<absl::string_view> labels =
        absl::StrSplit(*normalized, '.');
    const size_t n = labels.size();
    auto suffix_from = [&](size_t i) {
      return absl::StrJoin(labels.begin() + i, labels.end(), ".");
    };

    // suffix_start: index of the first label of the public suffix.
    std::optional<size_t> suffix_start;
    for (size_t i = 0; i < n && !suffix_start; ++i) {
      if (exception_.contains(suffix_from(i))) suffix_start = i + 1;
    }
    for (size_t i = 0; i < n && !suffix_start; ++i) {
      if (exact_.contains(suffix_from(i)) ||
          (i + 1 < n && wildcard_.contains(suffix_from(i + 1)))) {
        suffix_start = i;
      }
    }
    if (!suffix_start || *suffix_start == 0) return std::nullopt;
    return suffix_from(*suffix_start - 1);
  }

 private:
  void AddRule(absl::string_view rule) {
    std::string r = absl::AsciiStrToLower(rule);
    if (r.empty()) return;
    if (r.front() == '!') {
      exception_.insert(r.substr(1));
    } else if (r.size() > 2 && r.substr(0, 2) == "*.") {
      wildcard_.insert(r.substr(2));
    } else {
      exact_.insert(std::move(r));
    }
  }

  absl::flat_hash_set<std::string> exact_;
  // Stored without the leading "*."; "*.ck" is kept as "ck".
  absl::flat_hash_set<std::string> wildcard_;
  // Stored without the leading "!".
  absl::flat_hash_set<std::string> exception_;
};

}  // namespace floc

#endif  // FLOC_PUBLIC_SUFFIX_H_
