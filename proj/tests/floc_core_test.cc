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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "floc/cohorts.h"
#include "floc/machine_week.h"
#include "floc/prefix_lsh.h"
#include "floc/random.h"
#include "floc/simhash.h"
#include "floc/stats.h"
#include "gtest/gtest.h"

namespace floc {
namespace {

std::vector<SimHashValue> Values(std::initializer_list<uint64_t> bits) {
  std::vector<SimHashValue> out;
  for (uint64_t b : bits) out.push_back({b});
  return out;
}

// Split rule evaluated by counting over the full multiset at every node.
void BruteForceSplit(const std::vector<SimHashValue>& hashes, uint64_t prefix,
                     int length, int k, int bits,
                     std::vector<CohortEntry>& out) {
  auto count = [&](uint64_t p, int len) {
    int64_t n = 0;
    for (SimHashValue h : hashes) n += (h.bits >> (bits - len)) == p;
    return n;
  };
  if (length < bits && count(prefix << 1, length + 1) >= k &&
      count((prefix << 1) | 1, length + 1) >= k) {
    BruteForceSplit(hashes, prefix << 1, length + 1, k, bits, out);
    BruteForceSplit(hashes, (prefix << 1) | 1, length + 1, k, bits, out);
    return;
  }
  out.push_back({prefix, length, static_cast<int32_t>(out.size())});
}

std::vector<std::string> RandomDomains(Engine& engine, int n, int vocab) {
  std::set<std::string> s;
  while (static_cast<int>(s.size()) < n) {
    s.insert("site" + std::to_string(UniformIndex(engine, vocab)) + ".com");
  }
  return {s.begin(), s.end()};
}

TEST(SimHashTest, DeterministicAndInRange) {
  const std::vector<std::string> set = {"a.com", "b.org", "c.net"};
  absl::StatusOr<SimHashValue> h1 = SimHash(set, SimHashConfig{});
  absl::StatusOr<SimHashValue> h2 = SimHash(set, SimHashConfig{});
  ASSERT_TRUE(h1.ok());
  EXPECT_EQ(*h1, *h2);
  const std::vector<std::string> one = {"a.com"};
  EXPECT_LT(SimHash(one, SimHashConfig{})->bits, uint64_t{1} << 50);
  SimHasher hasher(SimHashConfig{});
  EXPECT_EQ(*hasher.Hash(set), *h1);
  EXPECT_EQ(*hasher.Hash(set), *h1);
}

TEST(SimHashTest, Errors) {
  EXPECT_FALSE(SimHash({}, SimHashConfig{}).ok());
  const std::vector<std::string> one = {"a.com"};
  EXPECT_FALSE(SimHash(one, SimHashConfig{0, 0}).ok());
  EXPECT_FALSE(SimHash(one, SimHashConfig{65, 0}).ok());
  EXPECT_TRUE(SimHash(one, SimHashConfig{64, 0}).ok());
}

TEST(SimHashTest, TieYieldsZeroBit) {
  const std::vector<double> sums = {0.0, 1.0, -1.0};
  EXPECT_EQ(SimHashFromSums(sums).bits, 0b010u);
}

TEST(SimHashTest, SingleDomainBitsAreFeatureSigns) {
  const std::vector<std::string> one = {"example.com"};
  const SimHashValue h = *SimHash(one, SimHashConfig{16, 9});
  for (int b = 0; b < 16; ++b) {
    EXPECT_EQ(HashBit(h, b, 16), GaussianFeature("example.com", b, 9) > 0.0);
  }
}

TEST(GaussianFeatureTest, MomentsAndSeedDecorrelation) {
  std::vector<double> a;
  std::vector<double> b;
  for (int i = 0; i < 100000; ++i) {
    const std::string d = "d" + std::to_string(i) + ".com";
    a.push_back(GaussianFeature(d, i % 50, 1));
    b.push_back(GaussianFeature(d, i % 50, 2));
    EXPECT_EQ(a.back(), GaussianFeature(d, i % 50, 1));
  }
  EXPECT_NEAR(Mean(a), 0.0, 0.02);
  EXPECT_NEAR(SampleVariance(a), 1.0, 0.05);
  EXPECT_LT(std::fabs(*PearsonCorrelation(a, b)), 0.02);
}

TEST(SimHashTest, LocalityOverRandomPairs) {
  Engine engine = MakeEngine(11, "locality");
  std::vector<double> jaccard;
  std::vector<double> hamming;
  double near_sum = 0, far_sum = 0;
  int near_n = 0, far_n = 0;
  for (int i = 0; i < 10000; ++i) {
    const int size = 10 + static_cast<int>(UniformIndex(engine, 30));
    std::vector<std::string> pool = RandomDomains(engine, 2 * size, 100000);
    // Keep `shared` domains in common and give each side its own rest.
    const int shared = static_cast<int>(UniformIndex(engine, size + 1));
    std::vector<std::string> x(pool.begin(), pool.begin() + size);
    std::vector<std::string> y(pool.begin(), pool.begin() + shared);
    y.insert(y.end(), pool.begin() + size, pool.begin() + 2 * size - shared);
    const double j = static_cast<double>(shared) / (2 * size - shared);
    const int h = HammingDistance(*SimHash(x, SimHashConfig{}),
                                  *SimHash(y, SimHashConfig{}));
    jaccard.push_back(j);
    hamming.push_back(h);
    if (j >= 0.9) near_sum += h, ++near_n;
    if (j <= 0.1) far_sum += h, ++far_n;
  }
  ASSERT_GT(near_n, 0);
  ASSERT_GT(far_n, 0);
  EXPECT_LT(near_sum / near_n, far_sum / far_n);
  EXPECT_LT(*SpearmanCorrelation(jaccard, hamming), -0.5);
}

TEST(PrefixLshTest, SixHashesTwoCohorts) {
  const auto hashes = Values({0b000, 0b001, 0b010, 0b101, 0b110, 0b111});
  absl::StatusOr<CohortMap> map = BuildCohortMap(hashes, 3, 3);
  ASSERT_TRUE(map.ok());
  ASSERT_EQ(map->num_cohorts(), 2);
  EXPECT_EQ(map->entries()[0], (CohortEntry{0, 1, 0}));
  EXPECT_EQ(map->entries()[1], (CohortEntry{1, 1, 1}));
  EXPECT_EQ(map->CohortSizes(hashes), (std::vector<int64_t>{3, 3}));
  EXPECT_EQ(map->Assign({0b010}), 0);
}

TEST(PrefixLshTest, KEqualsNGivesOneCohort) {
  const auto hashes = Values({0b000, 0b011, 0b101, 0b111});
  absl::StatusOr<CohortMap> map = BuildCohortMap(hashes, 4, 3);
  ASSERT_TRUE(map.ok());
  ASSERT_EQ(map->num_cohorts(), 1);
  EXPECT_EQ(map->entries()[0].prefix_length, 0);
  EXPECT_EQ(map->Assign({0b111}), 0);
}

TEST(PrefixLshTest, UnbalancedSplitIsRefused) {
  const auto hashes = Values({0b000, 0b000, 0b000, 0b111});
  EXPECT_EQ(BuildCohortMap(hashes, 2, 3)->num_cohorts(), 1);
}

TEST(PrefixLshTest, Errors) {
  const auto hashes = Values({1, 2});
  EXPECT_EQ(BuildCohortMap(hashes, 3, 3).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_FALSE(BuildCohortMap(hashes, 0, 3).ok());
  EXPECT_FALSE(BuildCohortMap(Values({8}), 1, 3).ok());
}

TEST(PrefixLshTest, MatchesBruteForceAndIsMonotoneInK) {
  Engine engine = MakeEngine(5, "prefix-brute");
  for (int trial = 0; trial < 200; ++trial) {
    const int bits = 1 + static_cast<int>(UniformIndex(engine, 12));
    const int n = 1 + static_cast<int>(UniformIndex(engine, 300));
    std::vector<SimHashValue> hashes;
    for (int i = 0; i < n; ++i) {
      hashes.push_back({UniformIndex(engine, uint64_t{1} << bits)});
    }
    int previous = n + 1;
    for (int k = 1; k <= n; k += 1 + n / 10) {
      absl::StatusOr<CohortMap> map = BuildCohortMap(hashes, k, bits);
      ASSERT_TRUE(map.ok());
      std::vector<CohortEntry> expected;
      BruteForceSplit(hashes, 0, 0, k, bits, expected);
      ASSERT_EQ(std::vector<CohortEntry>(map->entries().begin(),
                                         map->entries().end()),
                expected);
      for (size_t i = 0; i < hashes.size(); ++i) {
        const CohortEntry& e = map->entries()[map->Assign(hashes[i])];
        EXPECT_EQ(hashes[i].bits >> (bits - e.prefix_length), e.prefix);
      }
      EXPECT_LE(map->num_cohorts(), previous);
      previous = map->num_cohorts();
    }
  }
}

TEST(PrefixLshTest, CohortCountGrowsWithNestedSamples) {
  Engine engine = MakeEngine(6, "prefix-nested");
  std::vector<SimHashValue> all;
  for (int i = 0; i < 20000; ++i) {
    all.push_back({UniformIndex(engine, uint64_t{1} << 50)});
  }
  std::vector<double> sizes;
  std::vector<double> counts;
  for (int step = 1; step <= 10; ++step) {
    std::span<const SimHashValue> prefix(all.data(), step * 2000);
    sizes.push_back(static_cast<double>(prefix.size()));
    counts.push_back(BuildCohortMap(prefix, 100, 50)->num_cohorts());
  }
  EXPECT_GT(*SpearmanCorrelation(sizes, counts), 0.9);
}

TEST(CohortMapTest, JsonRoundTripAndValidation) {
  const auto hashes = Values({0, 1, 2, 3, 4, 5, 6, 7, 9, 12, 15});
  const CohortMap map = *BuildCohortMap(hashes, 2, 4);
  const nlohmann::json j = map.ToJson();
  absl::StatusOr<CohortMap> back = CohortMap::FromJson(j);
  ASSERT_TRUE(back.ok()) << back.status();
  EXPECT_EQ(*back, map);
  EXPECT_EQ(back->ToJson().dump(), j.dump());

  EXPECT_FALSE(CohortMap::Create(2, 3, {{0, 1, 0}}).ok());               // gap
  EXPECT_FALSE(CohortMap::Create(2, 3, {{0, 1, 0}, {0, 1, 1}}).ok());    // overlap
  EXPECT_FALSE(CohortMap::Create(2, 3, {{0, 1, 1}, {1, 1, 0}}).ok());    // ids
  EXPECT_TRUE(CohortMap::Create(2, 3, {{0, 1, 0}, {1, 1, 1}}).ok());
  EXPECT_TRUE(CohortMap::Create(1, 64, {{0, 0, 0}}).ok());
}

// Searches for domain sets whose 3-bit hashes equal `targets`.
std::vector<MachineWeek> EngineeredWeek(const std::vector<uint64_t>& targets,
                                        int32_t week,
                                        const SimHashConfig& config) {
  Engine engine = MakeEngine(3, "engineered");
  std::vector<MachineWeek> out;
  for (size_t m = 0; m < targets.size(); ++m) {
    while (true) {
      std::vector<std::string> domains = RandomDomains(engine, 7, 1000);
      if (SimHash(domains, config)->bits == targets[m]) {
        MachineWeek mw;
        mw.machine_id = static_cast<int64_t>(m) + 1;
        mw.week_index = week;
        mw.domains = domains;
        mw.state = "CA";
        out.push_back(mw);
        break;
      }
    }
  }
  return out;
}

TEST(WeeklyCohortsTest, EngineeredWeekMatchesMap) {
  const SimHashConfig config{3, 0};
  const std::vector<MachineWeek> week =
      EngineeredWeek({0b000, 0b001, 0b010, 0b101, 0b110, 0b111}, 0, config);
  absl::StatusOr<WeeklyCohorts> cohorts = ComputeWeeklyCohorts(week, 3, config, 1);
  ASSERT_TRUE(cohorts.ok()) << cohorts.status();
  ASSERT_EQ(cohorts->maps.at(0).num_cohorts(), 2);
  std::vector<int32_t> ids;
  for (const CohortAssignment& a : cohorts->assignments) ids.push_back(a.cohort_id);
  EXPECT_EQ(ids, (std::vector<int32_t>{0, 0, 0, 1, 1, 1}));
}

TEST(WeeklyCohortsTest, IdenticalWeeksAndWorkerInvariance) {
  const SimHashConfig config{3, 0};
  std::vector<MachineWeek> weeks =
      EngineeredWeek({0b000, 0b001, 0b010, 0b101, 0b110, 0b111}, 0, config);
  const size_t n = weeks.size();
  for (size_t i = 0; i < n; ++i) {
    MachineWeek copy = weeks[i];
    copy.week_index = 1;
    weeks.push_back(copy);
  }
  const WeeklyCohorts one = *ComputeWeeklyCohorts(weeks, 3, config, 1);
  const WeeklyCohorts four = *ComputeWeeklyCohorts(weeks, 3, config, 4);
  EXPECT_EQ(one.maps.at(0), one.maps.at(1));
  for (size_t i = 0; i < n; ++i) {
    EXPECT_EQ(one.assignments[i].cohort_id, one.assignments[i + n].cohort_id);
  }
  EXPECT_EQ(WeeklyMapsToJson(one.maps).dump(), WeeklyMapsToJson(four.maps).dump());
}

TEST(WeeklyCohortsTest, UnderpopulatedWeekIsNamed) {
  const SimHashConfig config{3, 0};
  std::vector<MachineWeek> weeks =
      EngineeredWeek({0b000, 0b001, 0b010, 0b101}, 0, config);
  weeks[3].week_index = 5;
  absl::StatusOr<WeeklyCohorts> r = ComputeWeeklyCohorts(weeks, 2, config, 1);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.status().message().find("week 5"), absl::string_view::npos);
}

}  // namespace
}  // namespace floc
