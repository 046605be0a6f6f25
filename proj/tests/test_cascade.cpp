#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "earlyscore/cascade.hpp"
#include "oracle.hpp"

using namespace earlyscore;

namespace {

const CascadeEntry& entry(const Cascade& c, const std::string& who) {
  for (const auto& e : c.entries())
    if (e.participant_id == who) return e;
  throw std::runtime_error("missing " + who);
}

std::vector<EventRecord> ev(std::initializer_list<std::tuple<const char*, const char*, double>> xs) {
  std::vector<EventRecord> out;
  for (const auto& [c, u, t] : xs) out.push_back({c, u, t, std::nullopt});
  return out;
}

}  // namespace

TEST(BuildCascades, ChainWithoutTies) {
  auto cs = build_cascades(ev({{"c1", "A", 1}, {"c1", "B", 2}, {"c1", "C", 3}}));
  ASSERT_EQ(cs.size(), 1u);
  const auto& c = cs[0];
  EXPECT_EQ(c.id(), "c1");
  ASSERT_EQ(c.size(), 3u);
  const char* ids[] = {"A", "B", "C"};
  const unsigned ranks[] = {0, 1, 2}, ds[] = {2, 1, 0};
  const double ps[] = {1.0, 0.5, 0.0};
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(c.entries()[i].participant_id, ids[i]);
    EXPECT_EQ(c.entries()[i].rank, ranks[i]);
    EXPECT_EQ(c.entries()[i].downstream, ds[i]);
    EXPECT_DOUBLE_EQ(c.entries()[i].inverse_percentile, ps[i]);
  }
}

TEST(BuildCascades, SingleParticipant) {
  auto cs = build_cascades(ev({{"c1", "A", 1}}));
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].size(), 1u);
  EXPECT_EQ(cs[0].entries()[0].rank, 0u);
  EXPECT_EQ(cs[0].entries()[0].downstream, 0u);
  EXPECT_EQ(cs[0].entries()[0].inverse_percentile, 1.0);
}

TEST(BuildCascades, TiesShareMinimumRank) {
  const auto events = ev({{"c1", "A", 1}, {"c1", "B", 1}, {"c1", "C", 2}});
  auto cs = build_cascades(events);
  ASSERT_EQ(cs.size(), 1u);
  const auto& c = cs[0];
  EXPECT_EQ(entry(c, "A").rank, 0u);
  EXPECT_EQ(entry(c, "B").rank, 0u);
  EXPECT_EQ(entry(c, "A").downstream, 1u);
  EXPECT_EQ(entry(c, "B").downstream, 1u);
  EXPECT_EQ(entry(c, "A").inverse_percentile, 1.0);
  EXPECT_EQ(entry(c, "C").rank, 2u);
  EXPECT_EQ(entry(c, "C").downstream, 0u);
  EXPECT_EQ(entry(c, "C").inverse_percentile, 0.0);

  // Pairwise reranker agrees.
  auto ref = oracle::brute_force(events, 0.5L).at("c1");
  for (const auto& e : c.entries()) {
    EXPECT_EQ(static_cast<long>(e.rank), ref.at(e.participant_id).rank);
    EXPECT_EQ(static_cast<long>(e.downstream), ref.at(e.participant_id).d);
    EXPECT_EQ(e.inverse_percentile, static_cast<double>(ref.at(e.participant_id).p));
  }
}

TEST(BuildCascades, DuplicateKeepsFirstOccurrence) {
  const auto events = ev({{"c1", "A", 1}, {"c1", "A", 5}, {"c1", "B", 2}});
  auto cs = build_cascades(events);
  ASSERT_EQ(cs.size(), 1u);
  const auto& c = cs[0];
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(entry(c, "A").timestamp, 1.0);
  EXPECT_EQ(entry(c, "A").downstream, 1u);
  EXPECT_EQ(entry(c, "A").inverse_percentile, 1.0);
  EXPECT_EQ(entry(c, "B").downstream, 0u);
  EXPECT_EQ(entry(c, "B").inverse_percentile, 0.0);

  // Dedup oracle: filter to first occurrence, then rerank.
  auto ref = oracle::brute_force(events, 0.5L).at("c1");
  EXPECT_EQ(ref.size(), 2u);
  EXPECT_EQ(ref.at("A").d, 1);
  EXPECT_EQ(ref.at("B").d, 0);
}

TEST(BuildCascades, DuplicateAtSameTimeOrsViewedFlag) {
  std::vector<EventRecord> events{{"c", "A", 1, false}, {"c", "A", 1, true}, {"c", "B", 2, false}};
  auto cs = build_cascades(events);
  EXPECT_TRUE(entry(cs[0], "A").viewed);
  EXPECT_FALSE(entry(cs[0], "B").viewed);
}

TEST(BuildCascades, EmptyInputGivesEmptyOutput) {
  EXPECT_TRUE(build_cascades(std::vector<EventRecord>{}).empty());
}

TEST(BuildCascades, RejectsNonFiniteTimestampWithIndex) {
  auto events = ev({{"c1", "A", 1}, {"c1", "B", 2}});
  events.push_back({"c1", "C", std::nan(""), std::nullopt});
  try {
    build_cascades(events);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  events.back().timestamp = INFINITY;
  EXPECT_THROW(build_cascades(events), DataError);
}

TEST(BuildCascades, RejectsEmptyIds) {
  EXPECT_THROW(build_cascades(ev({{"", "A", 1}})), DataError);
  EXPECT_THROW(build_cascades(ev({{"c", "", 1}})), DataError);
}

TEST(BuildCascades, SizeFilter) {
  auto events = ev({{"a", "A", 1}, {"b", "A", 1}, {"b", "B", 2}, {"c", "A", 1}, {"c", "B", 2},
                    {"c", "C", 3}});
  EXPECT_EQ(build_cascades(events, {2, 2}).size(), 1u);
  EXPECT_EQ(build_cascades(events, {2}).size(), 2u);
  EXPECT_EQ(build_cascades(events, {1, 1})[0].id(), "a");
}

TEST(BuildCascades, StorageOrderBreaksTiesById) {
  auto cs = build_cascades(ev({{"c", "Z", 1}, {"c", "A", 1}, {"c", "M", 0}}));
  EXPECT_EQ(cs[0].entries()[0].participant_id, "M");
  EXPECT_EQ(cs[0].entries()[1].participant_id, "A");
  EXPECT_EQ(cs[0].entries()[2].participant_id, "Z");
}

// Property tests over seeded random instances.
class CascadeProperties : public ::testing::TestWithParam<int> {};

TEST_P(CascadeProperties, Invariants) {
  std::mt19937_64 rng(GetParam());
  auto events = oracle::random_instance(rng);
  const auto base = build_cascades(events);
  const auto ref = oracle::brute_force(events, 0.5L);
  ASSERT_EQ(base.size(), ref.size());

  for (const auto& c : base) {
    const auto& r = ref.at(c.id());
    ASSERT_EQ(c.size(), r.size());
    bool has_ties = false;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& e = c.entries()[i];
      EXPECT_EQ(static_cast<long>(e.rank), r.at(e.participant_id).rank);
      EXPECT_EQ(static_cast<long>(e.downstream), r.at(e.participant_id).d);
      EXPECT_GE(e.inverse_percentile, 0.0);
      EXPECT_LE(e.inverse_percentile, 1.0);
      if (i > 0) {
        const auto& prev = c.entries()[i - 1];
        EXPECT_LE(prev.timestamp, e.timestamp);
        EXPECT_GE(prev.inverse_percentile, e.inverse_percentile);
        EXPECT_GE(prev.downstream, e.downstream);
        if (prev.timestamp == e.timestamp) {
          has_ties = true;
          EXPECT_EQ(prev.rank, e.rank);
          EXPECT_EQ(prev.downstream, e.downstream);
          EXPECT_EQ(prev.inverse_percentile, e.inverse_percentile);
        }
      }
    }
    if (!has_ties) {
      for (const auto& e : c.entries()) EXPECT_EQ(e.downstream, c.size() - 1 - e.rank);
    }
  }

  // Order invariance.
  std::shuffle(events.begin(), events.end(), rng);
  EXPECT_EQ(build_cascades(events), base);

  // Monotone time transform: only ids and ranks matter.
  auto warped = events;
  for (auto& e : warped) e.timestamp = std::exp(e.timestamp / 7.0) * 3.0 + 11.0;
  const auto after = build_cascades(warped);
  ASSERT_EQ(after.size(), base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    for (std::size_t j = 0; j < base[i].size(); ++j) {
      const auto& a = base[i].entries()[j];
      const auto& b = after[i].entries()[j];
      EXPECT_EQ(a.participant_id, b.participant_id);
      EXPECT_EQ(a.rank, b.rank);
      EXPECT_EQ(a.downstream, b.downstream);
      EXPECT_EQ(a.inverse_percentile, b.inverse_percentile);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, CascadeProperties, ::testing::Range(0, 200));

TEST(StreamingBuilder, MatchesBatchOnGroupedInput) {
  std::mt19937_64 rng(7);
  auto events = oracle::random_instance(rng);
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) { return a.cascade_id < b.cascade_id; });
  std::vector<Cascade> streamed;
  auto sink = [&](const Cascade& c) { streamed.push_back(c); };
  StreamingCascadeBuilder<decltype(sink)> b(sink);
  for (const auto& e : events) b.add(e);
  b.flush();
  EXPECT_EQ(streamed, build_cascades(events));
  EXPECT_EQ(b.records(), events.size());
}

TEST(StreamingBuilder, DetectsNonContiguousCascade) {
  auto sink = [](const Cascade&) {};
  StreamingCascadeBuilder<decltype(sink)> b(sink);
  b.add({"a", "A", 1, std::nullopt});
  b.add({"b", "A", 1, std::nullopt});
  EXPECT_THROW(b.add({"a", "B", 2, std::nullopt}), DataError);
}

TEST(StreamingBuilder, AppliesSizeFilter) {
  std::size_t seen = 0;
  auto sink = [&](const Cascade&) { ++seen; };
  StreamingCascadeBuilder<decltype(sink)> b(sink, {2});
  b.add({"a", "A", 1, std::nullopt});
  b.add({"b", "A", 1, std::nullopt});
  b.add({"b", "B", 2, std::nullopt});
  b.flush();
  EXPECT_EQ(seen, 1u);
  EXPECT_EQ(b.emitted(), 1u);
}
