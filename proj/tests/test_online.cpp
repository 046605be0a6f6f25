#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "earlyscore/online.hpp"
#include "earlyscore/synthetic.hpp"
#include "oracle.hpp"

using namespace earlyscore;

namespace {

void expect_tables_equal(const ScoreTable& a, const ScoreTable& b, long double rel = 1e-9L) {
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [id, s] : a.scores()) {
    const auto* o = b.find(id);
    ASSERT_NE(o, nullptr) << id;
    EXPECT_EQ(s.cascade_count, o->cascade_count);
    const long double scale = std::max({std::fabs(s.total), std::fabs(o->total), 1e-12L});
    EXPECT_LE(std::fabs(s.total - o->total) / scale, rel) << id;
  }
}

std::vector<Cascade> synthetic_stream(std::uint64_t seed, std::size_t n = 400) {
  SyntheticSpec spec;
  spec.n_cascades = n;
  spec.pool_size = 200;
  spec.sizes = SizeDistribution::power_law;
  spec.cap = 100;
  spec.time_span = 1000;
  spec.cascade_duration = 30;
  spec.tie_fraction = 0.1;
  spec.seed = seed;
  return build_cascades(generate(spec));
}

ScoreTable table_of(std::initializer_list<std::pair<const char*, int>> members) {
  // Each listed participant leads a cascade of the given size whose followers
  // all tie at t = 1 (and so score 0); leaders score ln(size - 1).
  ScoreTable t;
  std::vector<EventRecord> evs;
  int c = 0;
  for (const auto& [id, len] : members) {
    const std::string cid = "c" + std::to_string(c++);
    evs.push_back({cid, id, 0, {}});
    for (int i = 1; i < len; ++i) evs.push_back({cid, cid + "_f" + std::to_string(i), 1.0, {}});
  }
  for (const auto& cs : build_cascades(evs)) t.add_cascade(cs, {});
  return t;
}

}  // namespace

TEST(Update, EmptyBaseEqualsScoreSet) {
  const auto cs = synthetic_stream(1);
  const auto acc = update(Accumulator{}, cs, {});
  expect_tables_equal(acc.table, score_set(cs, {}));
  ASSERT_TRUE(acc.watermark.has_value());
  double latest = 0;
  for (const auto& c : cs) latest = std::max(latest, c.last_time());
  EXPECT_EQ(*acc.watermark, latest);
}

TEST(Update, TwoBatchesEqualUnion) {
  const auto cs = synthetic_stream(2);
  const std::vector<Cascade> a(cs.begin(), cs.begin() + cs.size() / 3);
  const std::vector<Cascade> b(cs.begin() + cs.size() / 3, cs.end());
  const auto acc = update(update(Accumulator{}, a, {}), b, {});
  expect_tables_equal(acc.table, score_set(cs, {}));
}

TEST(Update, TwentyIntervalUpdatesEqualBulk) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto cs = synthetic_stream(100 + seed);
    const auto part = partition_intervals(cs, 20);
    const auto groups = group_by_interval(part, cs);
    Accumulator acc;
    for (const auto& g : groups) acc = update(std::move(acc), g, {});
    expect_tables_equal(acc.table, score_set(cs, {}));
  }
}

TEST(PartitionIntervals, EvenBoundaries) {
  std::vector<EventRecord> evs{{"a", "x", 0, {}}, {"b", "y", 100, {}}};
  const auto p = partition_intervals(evs, 4);
  const std::vector<double> expect{0, 25, 50, 75, 100};
  EXPECT_EQ(std::vector<double>(p.boundaries().begin(), p.boundaries().end()), expect);
  EXPECT_EQ(p.count(), 4u);
}

TEST(PartitionIntervals, HalfOpenAssignment) {
  std::vector<EventRecord> evs{{"a", "x", 0, {}}, {"b", "y", 100, {}}, {"c", "z", 25, {}},
                               {"c", "w", 60, {}}};
  const auto p = partition_intervals(evs, 4);
  const auto cs = build_cascades(evs);
  EXPECT_EQ(p.assign(cs[2]), 1u);  // first event at 25 -> [25, 50)
  EXPECT_EQ(p.interval_of(0), 0u);
  EXPECT_EQ(p.interval_of(24.999), 0u);
  EXPECT_EQ(p.interval_of(50), 2u);
  EXPECT_EQ(p.interval_of(100), 3u);  // last interval closed
  EXPECT_EQ(p.interval_of(-5), 0u);   // clamped
  EXPECT_EQ(p.interval_of(1e9), 3u);
}

TEST(PartitionIntervals, DegenerateSpan) {
  std::vector<EventRecord> evs{{"a", "x", 7, {}}, {"b", "y", 7, {}}, {"b", "z", 7, {}}};
  const auto p = partition_intervals(evs, 3);
  const auto b = p.boundaries();
  for (std::size_t i = 1; i < b.size(); ++i) EXPECT_LT(b[i - 1], b[i]);
  const auto groups = group_by_interval(p, build_cascades(evs));
  EXPECT_EQ(groups[0].size(), 2u);
  EXPECT_TRUE(groups[1].empty());
  EXPECT_TRUE(groups[2].empty());
}

TEST(PartitionIntervals, Errors) {
  EXPECT_THROW(partition_intervals(std::vector<EventRecord>{}, 3), ConfigError);
  std::vector<EventRecord> evs{{"a", "x", 0, {}}};
  EXPECT_THROW(partition_intervals(evs, 0), ConfigError);
}

TEST(PartitionIntervals, EveryCascadeAssignedOnce) {
  const auto cs = synthetic_stream(9);
  const auto part = partition_intervals(cs, 20);
  const auto groups = group_by_interval(part, cs);
  std::size_t total = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    total += groups[i].size();
    for (const auto& c : groups[i]) {
      EXPECT_GE(c.first_time(), part.boundaries()[i]);
      if (i + 1 < groups.size()) {
        EXPECT_LT(c.first_time(), part.boundaries()[i + 1]);
      }
    }
  }
  EXPECT_EQ(total, cs.size());
}

TEST(GroupByInterval, SplitModeRebuildsPieces) {
  std::vector<EventRecord> evs{{"c", "a", 0, {}}, {"c", "b", 10, {}}, {"c", "x", 60, {}},
                               {"c", "y", 70, {}}, {"c", "z", 100, {}}};
  const auto p = partition_intervals(evs, 2);
  const auto groups = group_by_interval(p, build_cascades(evs), AssignmentRule::split_by_interval);
  ASSERT_EQ(groups[0].size(), 1u);
  ASSERT_EQ(groups[1].size(), 1u);
  EXPECT_EQ(groups[0][0].size(), 2u);
  EXPECT_EQ(groups[1][0].size(), 3u);
  EXPECT_EQ(groups[1][0].entries()[0].participant_id, "x");
  EXPECT_EQ(groups[1][0].entries()[0].downstream, 2u);
}

TEST(RollingScores, WindowEqualsKGivesFullSet) {
  const auto cs = synthetic_stream(3);
  const auto part = partition_intervals(cs, 5);
  const auto tables = rolling_scores(part, group_by_interval(part, cs), 5, {});
  ASSERT_EQ(tables.size(), 1u);
  expect_tables_equal(tables[0], score_set(cs, {}));
}

TEST(RollingScores, WindowOneGivesPerIntervalTables) {
  const auto cs = synthetic_stream(4);
  const auto part = partition_intervals(cs, 6);
  const auto groups = group_by_interval(part, cs);
  const auto tables = rolling_scores(part, groups, 1, {});
  ASSERT_EQ(tables.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) expect_tables_equal(tables[i], score_set(groups[i], {}));
}

TEST(RollingScores, TwentyIntervalsWindowThreeMatchesBruteForce) {
  const auto cs = synthetic_stream(5, 1000);
  const auto part = partition_intervals(cs, 20);
  const auto groups = group_by_interval(part, cs);
  const auto tables = rolling_scores(part, groups, 3, {});
  ASSERT_EQ(tables.size(), 18u);
  for (std::size_t j = 0; j < tables.size(); ++j) {
    // Oracle: brute-force scoring of the window's cascades from raw entries.
    std::vector<EventRecord> evs;
    for (std::size_t i = j; i < j + 3; ++i)
      for (const auto& c : groups[i])
        for (const auto& e : c.entries()) evs.push_back({c.id(), e.participant_id, e.timestamp, {}});
    const auto ref = oracle::totals(oracle::brute_force(evs, 0.5L));
    ASSERT_EQ(ref.size(), tables[j].size());
    for (const auto& [id, total] : ref) {
      const long double got = tables[j].find(id)->total;
      const long double scale = std::max({std::fabs(got), std::fabs(total), 1e-12L});
      EXPECT_LE(std::fabs(got - total) / scale, 1e-9L);
    }
  }
}

TEST(RollingScores, Errors) {
  const auto cs = synthetic_stream(6);
  const auto part = partition_intervals(cs, 4);
  const auto groups = group_by_interval(part, cs);
  EXPECT_THROW(rolling_scores(part, groups, 5, {}), ConfigError);
  EXPECT_THROW(rolling_scores(part, groups, 0, {}), ConfigError);
  EXPECT_THROW(rolling_scores(part, {}, 2, {}), ConfigError);
}

TEST(TopKConsistency, IdenticalTables) {
  const auto t = table_of({{"a", 5}, {"b", 4}, {"c", 3}});
  std::vector<ScoreTable> ts{t, t, t};
  const auto s = topk_consistency(ts, 2, 2);
  ASSERT_EQ(s.points.size(), 2u);
  for (const auto& p : s.points) EXPECT_EQ(p.overlap, 1.0);
  EXPECT_EQ(s.points[0].window_end_interval, 3u);
}

TEST(TopKConsistency, DisjointTopSets) {
  std::vector<ScoreTable> ts{table_of({{"a", 9}, {"b", 8}}), table_of({{"x", 9}, {"y", 8}})};
  EXPECT_EQ(topk_consistency(ts, 2).points[0].overlap, 0.0);
}

TEST(TopKConsistency, FifteenOfTwenty) {
  std::vector<std::pair<std::string, int>> first, second;
  for (int i = 0; i < 20; ++i) first.push_back({"s" + std::to_string(i), 50 - i});
  for (int i = 0; i < 15; ++i) second.push_back({"s" + std::to_string(i), 50 - i});
  for (int i = 0; i < 5; ++i) second.push_back({"n" + std::to_string(i), 30 - i});
  auto build = [](const std::vector<std::pair<std::string, int>>& ms) {
    ScoreTable t;
    std::vector<EventRecord> evs;
    for (const auto& [id, len] : ms) {
      evs.push_back({id, id, 0, {}});
      for (int i = 1; i < len; ++i) evs.push_back({id, id + "_f" + std::to_string(i), 1.0, {}});
    }
    for (const auto& c : build_cascades(evs)) t.add_cascade(c, {});
    return t;
  };
  std::vector<ScoreTable> ts{build(first), build(second)};
  EXPECT_DOUBLE_EQ(topk_consistency(ts, 20).points[0].overlap, 0.75);
}

TEST(TopKConsistency, ClampsSmallTables) {
  std::vector<ScoreTable> ts{table_of({{"a", 2}}), table_of({{"a", 2}})};
  const auto s = topk_consistency(ts, 20);
  EXPECT_TRUE(s.points[0].clamped);
  EXPECT_EQ(s.points[0].effective_k, 2u);  // "a" plus its follower
  EXPECT_EQ(s.points[0].overlap, 1.0);
  EXPECT_EQ(s.clamped_count(), 1u);
}

TEST(TopKConsistency, Errors) {
  std::vector<ScoreTable> one{table_of({{"a", 2}})};
  EXPECT_THROW(topk_consistency(one, 3), ConfigError);
  std::vector<ScoreTable> two{one[0], one[0]};
  EXPECT_THROW(topk_consistency(two, 0), ConfigError);
}

TEST(TopKConsistency, InvariantUnderRelabeling) {
  const auto cs = synthetic_stream(8, 1000);
  const auto part = partition_intervals(cs, 10);
  const auto base = topk_consistency(rolling_scores(part, group_by_interval(part, cs), 3, {}), 10);

  // Relabel every participant with a consistent (order-scrambling) mapping.
  std::vector<EventRecord> evs;
  for (const auto& c : cs)
    for (const auto& e : c.entries()) {
      std::string id = e.participant_id;
      std::reverse(id.begin(), id.end());
      evs.push_back({c.id(), "r" + id, e.timestamp, {}});
    }
  const auto cs2 = build_cascades(evs);
  const auto again = topk_consistency(rolling_scores(part, group_by_interval(part, cs2), 3, {}), 10);
  ASSERT_EQ(base.points.size(), again.points.size());
  for (std::size_t i = 0; i < base.points.size(); ++i)
    EXPECT_EQ(base.points[i].overlap, again.points[i].overlap) << i;
}

TEST(ConsistencyCsv, Format) {
  ConsistencySeries s;
  s.points = {{3, 1.0, 20, false}, {4, 0.75, 20, false}};
  std::ostringstream os;
  write_consistency_csv(os, s);
  EXPECT_EQ(os.str(), "window_end_interval,overlap_fraction\n3,1.000000\n4,0.750000\n");
}
