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

// Delimiter-separated browsing-session input.

#ifndef FLOC_SESSIONS_H_
#define FLOC_SESSIONS_H_

#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/ascii.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "absl/strings/string_view.h"
#include "floc/demographics.h"
#include "floc/zip_state.h"

namespace floc {

struct SessionRecord {
  int64_t machine_id = 0;
  int64_t session_id = 0;
  std::string domain;
  std::chrono::year_month_day date;
  int32_t seconds_of_day = 0;
  int64_t pages = 0;
  int64_t duration_seconds = 0;
  Demographics demographics;
  std::string zip;

  friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

// Column names as they appear in the header. Matching is case-insensitive.
struct SessionColumns {
  std::string machine_id = "machine_id";
  std::string session_id = "session_id";
  std::string domain = "domain";
  std::string date = "date";
  std::string time = "time";
  std::string pages = "pages";
  std::string duration = "duration";
  std::string income = "income";
  std::string race = "race";
  std::string zip = "zip";
};

struct SessionFormat {
  char delimiter = '\t';
  SessionColumns columns;
  DemographicCodeMap codes = DemographicCodeMap::ComscoreDefault();
};

struct RowReject {
  int64_t line = 0;
  std::string reason;
};

struct SessionParseResult {
  std::vector<SessionRecord> records;
  std::vector<RowReject> rejects;
  int64_t rows_read = 0;
};

namespace sessions_internal {

template <typename T>
bool ParseInt(absl::string_view s, T& out) {
  s = absl::StripAsciiWhitespace(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// YYYYMMDD or YYYY-MM-DD.
inline std::optional<std::chrono::year_month_day> ParseDate(
    absl::string_view s) {
  s = absl::StripAsciiWhitespace(s);
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (s.size() == 8) {
    if (!ParseInt(s.substr(0, 4), y) || !ParseInt(s.substr(4, 2), m) ||
        !ParseInt(s.substr(6, 2), d)) {
      return std::nullopt;
    }
  } else if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    if (!ParseInt(s.substr(0, 4), y) || !ParseInt(s.substr(5, 2), m) ||
        !ParseInt(s.substr(8, 2), d)) {
      return std::nullopt;
    }
  } else {
    return std::nullopt;
  }
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                  std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

// H:MM:SS, seconds since midnight.
inline std::optional<int32_t> ParseTime(absl::string_view s) {
  const std::vector<absl::string_view> parts = absl::StrSplit(s, ':');
  if (parts.size() != 3) return std::nullopt;
  int h = 0;
  int m = 0;
  int sec = 0;
  if (!ParseInt(parts[0], h) || !ParseInt(parts[1], m) ||
      !ParseInt(parts[2], sec)) {
    return std::nullopt;
  }
  if (h < 0 || h > 23 || m < 0 || m > 59 || sec < 0 || sec > 60) {
    return std::nullopt;
  }
  return h * 3600 + m * 60 + sec;
}

}  // namespace sessions_internal

inline std::string FormatDate(const std::chrono::year_month_day& d) {
  return absl::StrFormat("%04d%02u%02u", static_cast<int>(d.year()),
                         static_cast<unsigned>(d.month()),
                         static_cast<unsigned>(d.day()));
}

inline std::string FormatTime(int32_t seconds_of_day) {
  return absl::StrFormat("%d:%02d:%02d", seconds_of_day / 3600,
                         (seconds_of_day / 60) % 60, seconds_of_day % 60);
}

// Parses a session table. Fatal errors: unreadable stream, missing header,
// missing required column. Bad rows are listed in `rejects` and skipped.
// Required columns: machine_id, domain, date, income, race, zip. The rest
// default to 0 when absent.
inline absl::StatusOr<SessionParseResult> ParseSessions(
    std::istream& in, const SessionFormat& format) {
  using sessions_internal::ParseInt;
  if (!in.good()) return absl::UnavailableError("session stream unreadable");

  std::string line;
  if (!std::getline(in, line)) {
    if (in.bad()) return absl::DataLossError("error reading session stream");
    return absl::InvalidArgumentError("session stream has no header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header =
      absl::StrSplit(line, format.delimiter);

  auto find_column = [&](const std::string& name) -> int {
    for (size_t i = 0; i < header.size(); ++i) {
      if (absl::EqualsIgnoreCase(absl::StripAsciiWhitespace(header[i]),
                                 name)) {
        return static_cast<int>(i);
      }
    }
    return -1;
  };
  const SessionColumns& c = format.columns;
  struct Column {
    const std::string* name;
    bool required;
    int index = -1;
  };
  Column machine_id{&c.machine_id, true}, session_id{&c.session_id, false},
      domain{&c.domain, true}, date{&c.date, true}, time{&c.time, false},
      pages{&c.pages, false}, duration{&c.duration, false},
      income{&c.income, true}, race{&c.race, true}, zip{&c.zip, true};
  for (Column* col : {&machine_id, &session_id, &domain, &date, &time, &pages,
                      &duration, &income, &race, &zip}) {
    col->index = find_column(*col->name);
    if (col->required && col->index < 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("session header is missing required column '",
                       *col->name, "'"));
    }
  }

  SessionParseResult result;
  int64_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (absl::StripAsciiWhitespace(line).empty()) continue;
    ++result.rows_read;
    const std::vector<absl::string_view> fields =
        absl::StrSplit(line, format.delimiter);
    auto reject = [&](std::string reason) {
      result.rejects.push_back({line_number, std::move(reason)});
    };
    if (fields.size() != header.size()) {
      reject(absl::StrFormat("expected %d fields, found %d", header.size(),
                             fields.size()));
      continue;
    }
    auto field = [&](const Column& col) -> absl::string_view {
      return col.index < 0 ? absl::string_view()
                           : absl::StripAsciiWhitespace(fields[col.index]);
    };

    SessionRecord r;
    if (!ParseInt(field(machine_id), r.machine_id)) {
      reject("bad machine_id");
      continue;
    }
    if (session_id.index >= 0 && !ParseInt(field(session_id), r.session_id)) {
      reject("bad session_id");
      continue;
    }
    r.domain = std::string(field(domain));
    if (r.domain.empty()) {
      reject("empty domain");
      continue;
    }
    auto d = sessions_internal::ParseDate(field(date));
    if (!d) {
      reject("bad date");
      continue;
    }
    r.date = *d;
    if (time.index >= 0) {
      auto t = sessions_internal::ParseTime(field(time));
      if (!t) {
        reject("bad time");
        continue;
      }
      r.seconds_of_day = *t;
    }
    if (pages.index >= 0 &&
        (!ParseInt(field(pages), r.pages) || r.pages < 0)) {
      reject("bad pages");
      continue;
    }
    if (duration.index >= 0 &&
        (!ParseInt(field(duration), r.duration_seconds) ||
         r.duration_seconds < 0)) {
      reject("bad duration");
      continue;
    }
    auto inc = format.codes.income(field(income));
    if (!inc) {
      reject(absl::StrCat("unknown income code '", field(income), "'"));
      continue;
    }
    auto rc = format.codes.race(field(race));
    if (!rc) {
      reject(absl::StrCat("unknown race code '", field(race), "'"));
      continue;
    }
    r.demographics = {*rc, *inc};
    r.zip = NormalizeZip(field(zip));
    if (r.zip.empty()) {
      reject("bad zip");
      continue;
    }
    result.records.push_back(std::move(r));
  }
  if (in.bad()) return absl::DataLossError("error reading session stream");
  return result;
}

inline absl::StatusOr<SessionParseResult> ParseSessionsFile(
    const std::string& path, const SessionFormat& format) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError("cannot open session file " + path);
  return ParseSessions(in, format);
}

inline void WriteSessions(std::ostream& out,
                          const std::vector<SessionRecord>& records,
                          const SessionFormat& format) {
  const SessionColumns& c = format.columns;
  const char d = format.delimiter;
  out << c.machine_id << d << c.session_id << d << c.domain << d << c.date
      << d << c.time << d << c.pages << d << c.duration << d << c.income << d
      << c.race << d << c.zip << '\n';
  for (const auto& r : records) {
    out << r.machine_id << d << r.session_id << d << r.domain << d
        << FormatDate(r.date) << d << FormatTime(r.seconds_of_day) << d
        << r.pages << d << r.duration_seconds << d
        << format.codes.IncomeCode(r.demographics.income) << d
        << format.codes.RaceCode(r.demographics.race) << d << r.zip << '\n';
  }
}

}  // namespace floc

#endif  // FLOC_SESSIONS_H_
