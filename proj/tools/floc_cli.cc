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

// floc: batch driver for cohort computation, unicity and sensitivity runs.
//
//   floc <subcommand> --out DIR [flags]
//
// Every run writes DIR/manifest.json holding the resolved configuration.
// Passing that manifest back through --config reproduces the run.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/string_view.h"
#include "floc/browsing_difference.h"
#include "floc/cohorts.h"
#include "floc/demographics.h"
#include "floc/machine_week.h"
#include "floc/ot_control.h"
#include "floc/panels.h"
#include "floc/public_suffix.h"
#include "floc/random.h"
#include "floc/representativeness.h"
#include "floc/sessions.h"
#include "floc/simhash.h"
#include "floc/synth.h"
#include "floc/t_closeness.h"
#include "floc/unicity.h"
#include "json.hpp"

namespace floc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr char kToolVersion[] = "1.0.0";
constexpr int kExitPipeline = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string DataPath(const std::string& file) {
  const char* env = std::getenv("FLOC_DATA_DIR");
  return (env != nullptr && *env != '\0' ? std::string(env)
                                         : std::string(FLOC_DATA_DIR)) +
         "/" + file;
}

std::string DefaultTarget() {
  return DataPath("joint_distribution_cps2017_illustrative.json");
}

// --- config plumbing ------------------------------------------------------

// Options of one subcommand. Every option except the run-local ones (out,
// config, workers) is echoed into the manifest.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* Add(const std::string& name, T* value, const std::string& help) {
    entries_.emplace_back(name, [value] { return json(*value); });
    return app_->add_option("--" + name, *value, help)->capture_default_str();
  }

  // A path option; stored absolute so manifests work from any directory.
  CLI::Option* AddPath(const std::string& name, std::string* value,
                       const std::string& help) {
    return Add(name, value, help)
        ->check(CLI::ExistingPath)
        ->transform([](std::string path) {
          return fs::absolute(path).lexically_normal().string();
        });
  }

  json Resolved() const {
    json j = json::object();
    for (const auto& [name, get] : entries_) {
      std::string key = name;
      std::replace(key.begin(), key.end(), '-', '_');
      j[key] = get();
    }
    return j;
  }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<json()>>> entries_;
};

std::string ConfigValue(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_array()) {
    std::vector<std::string> parts;
    for (const json& e : v) parts.push_back(ConfigValue(e));
    return absl::StrJoin(parts, ",");
  }
  return v.dump();
}

// Expands --config FILE into flags placed ahead of the command-line flags,
// so the latter win. FILE is either a flat object of flag values or a
// manifest written by an earlier run.
std::vector<std::string> ExpandConfig(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::string path;
  for (size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (absl::StartsWith(args[i], "--config=")) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (!j.is_object()) throw UsageError("config file is not a JSON object: " + path);
  if (j.contains("subcommand") && j.contains("config")) {
    if (j["subcommand"] != args[0]) {
      throw UsageError(absl::StrFormat(
          "config %s is a manifest for '%s', not '%s'", path,
          j["subcommand"].get<std::string>(), args[0]));
    }
    j = j["config"];
  }
  std::vector<std::string> out = {args[0]};
  for (const auto& [key, value] : j.items()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    out.push_back("--" + flag + "=" + ConfigValue(value));
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

template <typename T>
std::vector<T> ParseList(const std::string& text, const std::string& flag) {
  std::vector<T> values;
  for (absl::string_view part : absl::StrSplit(text, ',', absl::SkipEmpty())) {
    T v;
    bool ok;
    if constexpr (std::is_floating_point_v<T>) {
      ok = absl::SimpleAtod(absl::StripAsciiWhitespace(part), &v);
    } else {
      ok = absl::SimpleAtoi(absl::StripAsciiWhitespace(part), &v);
    }
    if (!ok) {
      throw UsageError(absl::StrFormat("--%s: '%s' is not a number", flag,
                                       std::string(part)));
    }
    values.push_back(v);
  }
  if (values.empty()) throw UsageError("--" + flag + " is empty");
  return values;
}

template <typename T>
std::string JoinList(const std::vector<T>& values) {
  std::vector<std::string> parts;
  for (T v : values) {
    if constexpr (std::is_floating_point_v<T>) {
      parts.push_back(absl::StrFormat("%.10g", v));
    } else {
      parts.push_back(absl::StrCat(v));
    }
  }
  return absl::StrJoin(parts, ",");
}

// --- files ----------------------------------------------------------------

std::string Fnv1a64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h = (h ^ static_cast<unsigned char>(buf[i])) * 1099511628211ULL;
    }
  }
  return absl::StrFormat("%016x", h);
}

class Run {
 public:
  Run(std::string subcommand, std::string out_dir)
      : subcommand_(std::move(subcommand)), out_(std::move(out_dir)) {}

  absl::Status Open() {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) {
      return absl::PermissionDeniedError("cannot create output directory " +
                                         out_ + ": " + ec.message());
    }
    return absl::OkStatus();
  }

  void Input(const std::string& role, const std::string& path) {
    inputs_[role] = {{"path", path},
                     {"bytes", fs::file_size(path)},
                     {"fnv1a64", Fnv1a64(path)}};
  }

  absl::Status Write(const std::string& name,
                     const std::function<void(std::ostream&)>& body) {
    const std::string path = out_ + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) return absl::PermissionDeniedError("cannot write " + path);
    body(out);
    out.close();
    if (!out) return absl::DataLossError("failed writing " + path);
    outputs_.insert(name);
    return absl::OkStatus();
  }

  absl::Status WriteJson(const std::string& name, const json& j) {
    return Write(name, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
  }

  absl::Status Finish(const json& config) {
    json manifest = {{"tool", "floc"},
                     {"version", kToolVersion},
                     {"subcommand", subcommand_},
                     {"config", config},
                     {"inputs", inputs_},
                     {"outputs", std::vector<std::string>(outputs_.begin(),
                                                          outputs_.end())}};
    return WriteJson("manifest.json", manifest);
  }

 private:
  std::string subcommand_;
  std::string out_;
  json inputs_ = json::object();
  std::set<std::string> outputs_;
};

#define FLOC_RETURN_IF_ERROR(expr)             \
  do {                                         \
    if (absl::Status _s = (expr); !_s.ok()) {  \
      return _s;                               \
    }                                          \
  } while (0)

#define FLOC_ASSIGN_OR_RETURN(lhs, expr)            \
  auto lhs##_or = (expr);                           \
  if (!lhs##_or.ok()) return lhs##_or.status();     \
  auto lhs = *std::move(lhs##_or)

// A machine-week TSV, or an output directory holding one (directly or as
// the recorded input of a cohorts run).
std::string ResolveMachineWeeks(const std::string& input) {
  if (!fs::is_directory(input)) return input;
  const std::string direct = input + "/machine_weeks.tsv";
  if (fs::exists(direct)) return direct;
  std::ifstream in(input + "/manifest.json");
  if (in) {
    const json m = json::parse(in, nullptr, false);
    if (m.is_object() && m.contains("inputs") &&
        m["inputs"].contains("machine_weeks")) {
      return m["inputs"]["machine_weeks"]["path"].get<std::string>();
    }
  }
  throw UsageError("no machine_weeks.tsv in " + input);
}

absl::StatusOr<std::vector<MachineWeek>> LoadMachineWeeks(
    Run& run, const std::string& input) {
  const std::string path = ResolveMachineWeeks(input);
  if (!fs::exists(path)) throw UsageError("input not found: " + path);
  run.Input("machine_weeks", path);
  return ReadMachineWeeksFile(path);
}

absl::StatusOr<JointDistribution> LoadTarget(Run& run, const std::string& path) {
  run.Input("target", path);
  return JointDistribution::LoadFile(path);
}

// --- subcommands ----------------------------------------------------------

struct Common {
  std::string out;
  int workers = 0;
};

class Command {
 public:
  virtual ~Command() = default;
  virtual absl::Status Execute(Run& run, const Common& common) = 0;
  OptionSet* options = nullptr;
};

struct HashFlags {
  int bits = kDefaultSimHashBits;
  uint64_t hash_seed = 0;

  void Register(OptionSet& o) {
    o.Add("bits", &bits, "SimHash bit length");
    o.Add("hash-seed", &hash_seed, "SimHash Gaussian seed");
  }
  SimHashConfig Config() const { return {bits, hash_seed}; }
};

class Preprocess : public Command {
 public:
  void Register(OptionSet& o) {
    o.AddPath("sessions", &sessions, "session table")->required();
    o.AddPath("psl", &psl, "public suffix list");
    o.AddPath("codes", &codes, "demographic code map JSON");
    o.AddPath("target", &target, "reference joint distribution");
    o.Add("delimiter", &delimiter, "field delimiter: tab, comma or one character");
    o.Add("epoch", &epoch, "first day of week 0 (YYYY-MM-DD)");
    o.Add("n-weeks", &n_weeks, "number of weeks kept");
  }

  absl::Status Execute(Run& run, const Common&) override {
    SessionFormat format;
    if (delimiter == "tab") {
      format.delimiter = '\t';
    } else if (delimiter == "comma") {
      format.delimiter = ',';
    } else if (delimiter.size() == 1) {
      format.delimiter = delimiter[0];
    } else {
      throw UsageError("--delimiter must be tab, comma or one character");
    }
    auto epoch_date = sessions_internal::ParseDate(epoch);
    if (!epoch_date) throw UsageError("--epoch is not a date: " + epoch);
    if (n_weeks < 1) throw UsageError("--n-weeks must be >= 1");
    WeekConfig weeks{*epoch_date, n_weeks};

    run.Input("codes", codes);
    FLOC_ASSIGN_OR_RETURN(code_map, DemographicCodeMap::LoadFile(codes));
    format.codes = code_map;
    run.Input("psl", psl);
    FLOC_ASSIGN_OR_RETURN(suffixes, SuffixSet::LoadFile(psl));
    FLOC_ASSIGN_OR_RETURN(reference, LoadTarget(run, target));
    run.Input("sessions", sessions);
    FLOC_ASSIGN_OR_RETURN(parsed, ParseSessionsFile(sessions, format));
    const AggregationResult agg =
        BuildMachineWeeks(parsed.records, weeks, suffixes);

    FLOC_RETURN_IF_ERROR(run.Write("machine_weeks.tsv", [&](std::ostream& out) {
      WriteMachineWeeks(out, agg.machine_weeks);
    }));
    FLOC_RETURN_IF_ERROR(run.Write("rejects.tsv", [&](std::ostream& out) {
      out << "line\treason\n";
      for (const RowReject& r : parsed.rejects) {
        out << r.line << '\t' << r.reason << '\n';
      }
    }));

    json report = {{"rows_read", parsed.rows_read},
                   {"rows_rejected", parsed.rejects.size()},
                   {"aggregation", agg.report.ToJson()}};
    // Panel representativeness: machine demographics against the
    // reference marginals.
    std::map<int64_t, Demographics> machines;
    for (const MachineWeek& mw : agg.machine_weeks) {
      machines.emplace(mw.machine_id, mw.demographics);
    }
    report["machines"] = machines.size();
    json repr = json::object();
    for (Attribute a : {Attribute::kRace, Attribute::kIncome}) {
      CategoricalHistogram observed, expected;
      const auto marginal = reference.Marginal(a);
      for (int g = 0; g < kNumGroups; ++g) {
        observed[std::string(GroupToken(a, g))] = 0;
        expected[std::string(GroupToken(a, g))] = marginal[g];
      }
      for (const auto& [id, d] : machines) {
        observed[std::string(GroupToken(a, GroupIndex(d, a)))] += 1;
      }
      absl::StatusOr<CorrelationResult> r = Representativeness(observed, expected);
      repr[std::string(AttributeName(a))] =
          r.ok() ? r->ToJson() : json{{"error", std::string(r.status().message())}};
    }
    report["representativeness"] = repr;
    return run.WriteJson("preprocess_report.json", report);
  }

  std::string sessions;
  std::string psl = DataPath("public_suffix_list.dat");
  std::string codes = DataPath("demographic_codes.json");
  std::string target = DefaultTarget();
  std::string delimiter = "tab";
  std::string epoch = "2017-01-01";
  int n_weeks = 52;
};

class Synth : public Command {
 public:
  void Register(OptionSet& o) {
    o.Add("machines", &config.n_machines, "number of machines");
    o.Add("weeks", &config.n_weeks, "number of weeks");
    o.Add("vocabulary", &config.vocabulary_size, "domain vocabulary size");
    o.Add("zipf", &config.zipf_exponent, "Zipf exponent of domain popularity");
    o.Add("top-stratum", &config.top_stratum, "ranks reordered per group");
    o.Add("min-domains", &config.min_domains, "minimum domains per week");
    o.Add("mean-domains", &config.mean_domains, "mean domains per week");
    o.Add("max-domains", &config.max_domains, "maximum domains per week");
    o.Add("presence", &config.week_presence, "probability a machine is active in a week");
    o.Add("unknown-zip", &config.unknown_zip_fraction, "share of machines without a state");
    o.Add("skew", &config.skew, "group preference skew in [0, 1]");
    o.Add("seed", &config.seed, "root seed");
    o.AddPath("target", &target, "joint distribution of demographics");
    o.Add("sessions", &write_sessions, "also write a session table");
  }

  absl::Status Execute(Run& run, const Common& common) override {
    FLOC_ASSIGN_OR_RETURN(joint, LoadTarget(run, target));
    config.target = joint;
    FLOC_ASSIGN_OR_RETURN(pop, GeneratePopulation(config, common.workers));
    FLOC_RETURN_IF_ERROR(run.Write("machine_weeks.tsv", [&](std::ostream& out) {
      WriteMachineWeeks(out, pop.machine_weeks);
    }));
    FLOC_RETURN_IF_ERROR(run.Write("machines.tsv", [&](std::ostream& out) {
      out << "machine_id\trace_group\tincome_group\tzip\tstate\n";
      for (const MachineProfile& m : pop.machines) {
        out << m.machine_id << '\t' << RaceToken(m.demographics.race) << '\t'
            << IncomeToken(m.demographics.income) << '\t' << m.zip << '\t'
            << m.state << '\n';
      }
    }));
    if (write_sessions) {
      const std::vector<SessionRecord> records =
          ToSessionRecords(pop, WeekConfig{}, config.seed);
      FLOC_RETURN_IF_ERROR(run.Write("sessions.tsv", [&](std::ostream& out) {
        WriteSessions(out, records, SessionFormat{});
      }));
    }
    return run.WriteJson("synth_summary.json",
                         {{"config", config.ToJson()},
                          {"machines", pop.machines.size()},
                          {"machine_weeks", pop.machine_weeks.size()}});
  }

  SynthConfig config;
  std::string target = DefaultTarget();
  bool write_sessions = false;
};

class Cohorts : public Command {
 public:
  void Register(OptionSet& o) {
    o.AddPath("input", &input, "machine-week TSV or output directory")->required();
    o.Add("k", &k, "minimum cohort size");
    hash.Register(o);
  }

  absl::Status Execute(Run& run, const Common& common) override {
    FLOC_ASSIGN_OR_RETURN(mws, LoadMachineWeeks(run, input));
    FLOC_ASSIGN_OR_RETURN(weekly,
                          ComputeWeeklyCohorts(mws, k, hash.Config(), common.workers));
    FLOC_RETURN_IF_ERROR(run.Write("cohorts.tsv", [&](std::ostream& out) {
      WriteAssignments(out, weekly.assignments);
    }));
    FLOC_RETURN_IF_ERROR(
        run.WriteJson("cohort_maps.json", WeeklyMapsToJson(weekly.maps)));
    std::map<std::pair<int32_t, int32_t>, int64_t> sizes;
    for (const CohortAssignment& a : weekly.assignments) {
      ++sizes[{a.week_index, a.cohort_id}];
    }
    json weeks = json::array();
    for (const auto& [week, map] : weekly.maps) {
      int64_t lo = INT64_MAX, hi = 0, total = 0;
      for (int32_t c = 0; c < static_cast<int32_t>(map.num_cohorts()); ++c) {
        const int64_t n = sizes[{week, c}];
        lo = std::min(lo, n);
        hi = std::max(hi, n);
        total += n;
      }
      weeks.push_back({{"week_index", week},
                       {"machine_weeks", total},
                       {"cohorts", map.num_cohorts()},
                       {"min_cohort_size", lo},
                       {"max_cohort_size", hi}});
    }
    return run.WriteJson("cohorts_summary.json", {{"k", k}, {"weeks", weeks}});
  }

  std::string input;
  int k = 2000;
  HashFlags hash;
};

absl::StatusOr<std::vector<SequenceSample>> LoadSequences(
    Run& run, const std::string& input, int window, const HashFlags& hash,
    std::vector<MachineWeek>& mws) {
  FLOC_ASSIGN_OR_RETURN(loaded, LoadMachineWeeks(run, input));
  mws = std::move(loaded);
  if (window < 1) throw UsageError("--window must be >= 1");
  std::vector<SequenceSample> samples = BuildSequences(mws, window);
  FLOC_RETURN_IF_ERROR(HashSequences(samples, mws, hash.Config()));
  return samples;
}

class Unicity : public Command {
 public:
  void Register(OptionSet& o) {
    o.AddPath("input", &input, "machine-week TSV or output directory")->required();
    o.Add("k", &k, "minimum cohort size");
    o.Add("window", &window, "weeks per sequence");
    hash.Register(o);
  }

  absl::Status Execute(Run& run, const Common&) override {
    std::vector<MachineWeek> mws;
    FLOC_ASSIGN_OR_RETURN(samples, LoadSequences(run, input, window, hash, mws));
    FLOC_ASSIGN_OR_RETURN(report, ComputeUnicity(samples, k, hash.bits));
    FLOC_RETURN_IF_ERROR(run.Write("unicity.csv", [&](std::ostream& out) {
      WriteUnicityCsv(out, report);
    }));
    return run.WriteJson("unicity.json", report.ToJson());
  }

  std::string input;
  int k = 2000;
  int window = kDefaultWindow;
  HashFlags hash;
};

class SweepN : public Command {
 public:
  void Register(OptionSet& o) {
    o.AddPath("input", &input, "machine-week TSV or output directory")->required();
    o.Add("k", &k, "minimum cohort size");
    o.Add("n-grid", &n_grid, "comma-separated sample sizes")->required();
    o.Add("window", &window, "weeks per sequence");
    o.Add("seed", &seed, "root seed for subsampling");
    hash.Register(o);
  }

  absl::Status Execute(Run& run, const Common& common) override {
    const std::vector<int64_t> grid = ParseList<int64_t>(n_grid, "n-grid");
    n_grid = JoinList(grid);
    std::vector<MachineWeek> mws;
    FLOC_ASSIGN_OR_RETURN(samples, LoadSequences(run, input, window, hash, mws));
    FLOC_ASSIGN_OR_RETURN(points, SweepPopulation(samples, k, grid, seed,
                                                  hash.bits, common.workers));
    FLOC_RETURN_IF_ERROR(run.Write("sweep_n.csv", [&](std::ostream& out) {
      WriteSweepCsv(out, points);
    }));
    return run.WriteJson("sweep_n.json", SweepToJson("N", points));
  }

  std::string input;
  int k = 2000;
  std::string n_grid;
  int window = kDefaultWindow;
  uint64_t seed = 0;
  HashFlags hash;
};

class SweepKCommand : public Command {
 public:
  void Register(OptionSet& o) {
    o.AddPath("input", &input, "machine-week TSV or output directory")->required();
    o.Add("k-grid", &k_grid, "comma-separated k values")->required();
    o.Add("n", &n, "subsample size (0 keeps every sequence)");
    o.Add("window", &window, "weeks per sequence");
    o.Add("seed", &seed, "root seed for subsampling");
    hash.Register(o);
  }

  absl::Status Execute(Run& run, const Common& common) override {
    const std::vector<int> grid = ParseList<int>(k_grid, "k-grid");
    k_grid = JoinList(grid);
    std::vector<MachineWeek> mws;
    FLOC_ASSIGN_OR_RETURN(samples, LoadSequences(run, input, window, hash, mws));
    if (n > 0) {
      if (n > static_cast<int64_t>(samples.size())) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "--n=%d exceeds the %d available sequences", n, samples.size()));
      }
      Engine engine = MakeEngine(seed, "sweep-k-sample");
      std::vector<SequenceSample> subset;
      for (size_t i : SampleWithoutReplacement(samples.size(),
                                               static_cast<size_t>(n), engine)) {
        subset.push_back(samples[i]);
      }
      samples = std::move(subset);
    }
    FLOC_ASSIGN_OR_RETURN(points, SweepK(samples, grid, hash.bits, common.workers));
    FLOC_RETURN_IF_ERROR(run.Write("sweep_k.csv", [&](std::ostream& out) {
      WriteSweepCsv(out, points);
    }));
    return run.WriteJson("sweep_k.json", SweepToJson("k", points));
  }

  std::string input;
  std::string k_grid;
  int64_t n = 0;
  int window = kDefaultWindow;
  uint64_t seed = 0;
  HashFlags hash;
};

std::vector<Attribute> ParseAttributes(const std::string& text) {
  if (text == "both") return {Attribute::kRace, Attribute::kIncome};
  if (std::optional<Attribute> a = ParseAttribute(text)) return {*a};
  throw UsageError("--attribute must be race, income or both");
}

class TCloseness : public Command {
 public:
  void Register(OptionSet& o) {
    o.AddPath("input", &input, "machine-week TSV or output directory")->required();
    o.Add("k", &k, "minimum cohort size within a panel");
    o.Add("panels", &panels, "panels per week");
    o.Add("weeks", &weeks, "use only the first N weeks present (0 = all)");
    o.AddPath("target", &target, "joint distribution panels are matched to");
    o.Add("t-grid", &t_grid, "comma-separated thresholds");
    o.Add("attribute", &attribute, "race, income or both");
    o.Add("shuffle", &shuffle, "also compute the shuffled-hash baseline");
    o.Add("seed", &seed, "root seed");
    hash.Register(o);
  }

  absl::Status Execute(Run& run, const Common& common) override {
    const std::vector<double> grid = ParseList<double>(t_grid, "t-grid");
    t_grid = JoinList(grid);
    const std::vector<Attribute> attributes = ParseAttributes(attribute);
    if (weeks < 0) throw UsageError("--weeks must be >= 0");
    FLOC_ASSIGN_OR_RETURN(joint, LoadTarget(run, target));
    FLOC_ASSIGN_OR_RETURN(all, LoadMachineWeeks(run, input));
    std::set<int32_t> present;
    for (const MachineWeek& mw : all) present.insert(mw.week_index);
    std::set<int32_t> kept;
    for (int32_t w : present) {
      if (weeks > 0 && static_cast<int>(kept.size()) == weeks) break;
      kept.insert(w);
    }
    std::vector<MachineWeek> mws;
    for (MachineWeek& mw : all) {
      if (kept.count(mw.week_index)) mws.push_back(std::move(mw));
    }
    FLOC_ASSIGN_OR_RETURN(hashes, HashMachineWeeks(mws, hash.Config(), common.workers));
    FLOC_ASSIGN_OR_RETURN(built, StratifiedPanels(mws, hashes, joint, panels, seed));
    std::vector<absl::Status> status(built.size());
    std::vector<Panel> shuffled(built.size());
    ParallelFor(built.size(), common.workers, [&](size_t i) {
      status[i] = ClusterPanel(built[i], k, hash.bits);
      if (status[i].ok() && shuffle) {
        absl::StatusOr<Panel> s = ShuffleBaseline(built[i], seed);
        if (s.ok()) {
          shuffled[i] = *std::move(s);
        } else {
          status[i] = s.status();
        }
      }
    });
    for (const absl::Status& s : status) FLOC_RETURN_IF_ERROR(s);

    json summaries = json::array();
    for (const Panel& p : built) summaries.push_back(PanelSummary(p));
    FLOC_RETURN_IF_ERROR(run.WriteJson("panels.json", {{"panels", summaries}}));
    for (Attribute a : attributes) {
      FLOC_ASSIGN_OR_RETURN(report, TClosenessCurve(built, grid, a));
      if (shuffle) {
        FLOC_ASSIGN_OR_RETURN(base, TClosenessCurve(shuffled, grid, a));
        FLOC_RETURN_IF_ERROR(AttachShuffleBaseline(report, base));
      }
      const std::string stem = "t_closeness_" + std::string(AttributeName(a));
      FLOC_RETURN_IF_ERROR(run.Write(stem + ".csv", [&](std::ostream& out) {
        WriteTClosenessCsv(out, report);
      }));
      FLOC_RETURN_IF_ERROR(run.Write(stem + "_groups.csv", [&](std::ostream& out) {
        WriteTClosenessGroupCsv(out, report);
      }));
      FLOC_RETURN_IF_ERROR(run.WriteJson(stem + ".json", report.ToJson()));
    }
    return absl::OkStatus();
  }

  std::string input;
  int k = kDefaultPanelK;
  int panels = kDefaultPanelsPerWeek;
  int weeks = 0;
  std::string target = DefaultTarget();
  std::string t_grid = JoinList(DefaultTGrid());
  std::string attribute = "both";
  bool shuffle = true;
  uint64_t seed = 0;
  HashFlags hash;
};

class ChiSquare : public Command {
 public:
  void Register(OptionSet& o) {
    o.AddPath("input", &input, "machine-week TSV or output directory")->required();
    o.Add("d-grid", &d_grid, "comma-separated numbers of top domains");
    o.Add("control-fraction", &control_fraction,
          "share of machines in the random control group");
    o.Add("seed", &seed, "root seed");
  }

  absl::Status Execute(Run& run, const Common&) override {
    const std::vector<int> grid = ParseList<int>(d_grid, "d-grid");
    d_grid = JoinList(grid);
    FLOC_ASSIGN_OR_RETURN(mws, LoadMachineWeeks(run, input));
    FLOC_ASSIGN_OR_RETURN(rows, BrowsingDifference(mws, grid, seed, control_fraction));
    FLOC_RETURN_IF_ERROR(run.Write("chisq.csv", [&](std::ostream& out) {
      WriteChiSquareCsv(out, rows);
    }));
    json j = json::array();
    for (const ChiSquareRow& r : rows) {
      j.push_back({{"attribute", r.attribute},
                   {"group", r.group},
                   {"D", r.d},
                   {"statistic", r.statistic},
                   {"df", r.df},
                   {"p_value", r.p_value},
                   {"truncated", r.truncated}});
    }
    int max_d = *std::max_element(grid.begin(), grid.end());
    json top = json::array();
    for (const DomainCount& d : TopDomains(mws, max_d).domains) {
      top.push_back({{"domain", d.domain}, {"count", d.count}});
    }
    return run.WriteJson("chisq.json", {{"tests", j}, {"top_domains", top}});
  }

  std::string input;
  std::string d_grid = JoinList(DefaultDGrid());
  double control_fraction = kDefaultControlFraction;
  uint64_t seed = 0;
};

class OtControl : public Command {
 public:
  void Register(OptionSet& o) {
    o.Add("cohorts", &config.num_cohorts, "number of cohorts");
    o.Add("k", &config.k, "minimum cohort size");
    o.Add("ratio", &config.cohort_size_ratio, "mean cohort size / k");
    o.Add("t", &config.t, "t-closeness threshold");
    o.Add("seed", &config.seed, "root seed");
    o.AddPath("target", &target, "joint distribution of demographics");
  }

  absl::Status Execute(Run& run, const Common& common) override {
    FLOC_ASSIGN_OR_RETURN(joint, LoadTarget(run, target));
    FLOC_ASSIGN_OR_RETURN(result, OtScaleControl(config, joint, common.workers));
    return run.WriteJson("ot_control.json", result.ToJson());
  }

  OtControlConfig config;
  std::string target = DefaultTarget();
};

// Collects the JSON results of earlier runs into one document.
class Report : public Command {
 public:
  void Register(OptionSet& o) {
    o.Add("runs", &runs, "comma-separated output directories")->required();
  }

  absl::Status Execute(Run& run, const Common&) override {
    static const std::set<std::string> kSkipped = {"manifest.json",
                                                   "cohort_maps.json",
                                                   "panels.json"};
    json collected = json::array();
    std::vector<std::string> lines;
    for (absl::string_view dir_view : absl::StrSplit(runs, ',', absl::SkipEmpty())) {
      const std::string dir(dir_view);
      const std::string manifest_path = dir + "/manifest.json";
      if (!fs::exists(manifest_path)) throw UsageError("no manifest in " + dir);
      run.Input("manifest:" + dir, manifest_path);
      std::ifstream in(manifest_path);
      json manifest = json::parse(in, nullptr, false);
      if (!manifest.is_object() || !manifest.contains("outputs")) {
        return absl::DataLossError("unreadable manifest " + manifest_path);
      }
      json results = json::object();
      for (const json& name : manifest["outputs"]) {
        const std::string file = name.get<std::string>();
        if (kSkipped.count(file) || !absl::EndsWith(file, ".json")) continue;
        std::ifstream f(dir + "/" + file);
        results[file] = json::parse(f, nullptr, false);
      }
      lines.push_back(absl::StrFormat("%s\t%s\t%d result files", dir,
                                      manifest["subcommand"].get<std::string>(),
                                      results.size()));
      collected.push_back({{"run", dir},
                           {"subcommand", manifest["subcommand"]},
                           {"config", manifest["config"]},
                           {"results", results}});
    }
    FLOC_RETURN_IF_ERROR(run.Write("report.txt", [&](std::ostream& out) {
      out << "run\tsubcommand\tcontents\n";
      for (const std::string& l : lines) out << l << '\n';
    }));
    return run.WriteJson("report.json", {{"runs", collected}});
  }

  std::string runs;
};

void PrintError(const std::string& subcommand, const std::string& code,
                absl::string_view message) {
  std::cerr << json{{"error", {{"subcommand", subcommand},
                               {"code", code},
                               {"message", std::string(message)}}}}
                   .dump()
            << '\n';
}

int Main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  CLI::App app{"FLoC cohort computation and privacy analyses"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;
  std::string config_path;
  std::vector<std::pair<CLI::App*, std::unique_ptr<OptionSet>>> sets;
  std::map<CLI::App*, Command*> commands;

  Preprocess preprocess;
  Synth synth;
  Cohorts cohorts;
  Unicity unicity;
  SweepN sweep_n;
  SweepKCommand sweep_k;
  TCloseness t_closeness;
  ChiSquare chisq;
  OtControl ot_control;
  Report report;

  auto add = [&](const std::string& name, const std::string& help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--out", common.out, "output directory")->required();
    sub->add_option("--config", config_path, "JSON config or manifest");
    sub->add_option("--workers", common.workers,
                    "worker threads (0 = all cores); does not change outputs")
        ->capture_default_str();
    auto set = std::make_unique<OptionSet>(sub);
    cmd.Register(*set);
    cmd.options = set.get();
    commands[sub] = &cmd;
    sets.emplace_back(sub, std::move(set));
  };
  add("preprocess", "sessions -> machine-weeks of registrable domains", preprocess);
  add("synth", "generate a synthetic population", synth);
  add("cohorts", "weekly SimHash + PrefixLSH cohorts", cohorts);
  add("unicity", "cohort-ID sequence unicity", unicity);
  add("sweep-n", "unicity against population size", sweep_n);
  add("sweep-k", "unicity against k", sweep_k);
  add("t-closeness", "demographic t-closeness of panel cohorts", t_closeness);
  add("chisq", "browsing differences between demographic groups", chisq);
  add("ot-control", "population-scale i.i.d. control", ot_control);
  add("report", "collect results of earlier runs", report);

  std::string subcommand = args.empty() ? "" : args[0];
  try {
    args = ExpandConfig(args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    PrintError(subcommand, "USAGE", e.what());
    return kExitUsage;
  } catch (const UsageError& e) {
    PrintError(subcommand, "USAGE", e.what());
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  Command* command = commands.at(chosen);
  Run run(chosen->get_name(), common.out);
  absl::Status status;
  try {
    status = run.Open();
    if (status.ok()) status = command->Execute(run, common);
    if (status.ok()) status = run.Finish(command->options->Resolved());
  } catch (const UsageError& e) {
    PrintError(chosen->get_name(), "USAGE", e.what());
    return kExitUsage;
  }
  if (!status.ok()) {
    PrintError(chosen->get_name(), absl::StatusCodeToString(status.code()),
               status.message());
    return kExitPipeline;
  }
  return 0;
}

}  // namespace
}  // namespace floc

int main(int argc, char** argv) { return floc::Main(argc, argv); }
