#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "cascade.hpp"
#include "error.hpp"
#include "scoring.hpp"

namespace earlyscore {

// Running score table. The watermark records the latest cascade end time
// seen; it is informational and late data is accepted.
struct Accumulator {
  ScoreTable table;
  std::optional<double> watermark;
};

// Adds the scores of `new_cascades` to `acc` without touching prior data.
template <typename CascadeRange>
Accumulator update(Accumulator acc, const CascadeRange& new_cascades,
                   const ScoringConfig& config) {
  config.validate();
  for (const Cascade& c : new_cascades) {
    acc.table.add_cascade(c, config);
    if (c.size() && (!acc.watermark || c.last_time() > *acc.watermark))
      acc.watermark = c.last_time();
  }
  return acc;
}

// k evenly spaced half-open intervals [b_i, b_{i+1}); the last one is closed.
class IntervalPartition {
 public:
  // When lo == hi every interval gets unit width, so all data lands in
  // interval 0 and the boundaries stay strictly increasing.
  static IntervalPartition over(double lo, double hi, std::size_t k) {
    if (k == 0) throw ConfigError("number of intervals must be positive");
    if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo)
      throw ConfigError("invalid interval span");
    IntervalPartition part;
    const double width = hi > lo ? (hi - lo) / static_cast<double>(k) : 1.0;
    part.bounds_.resize(k + 1);
    for (std::size_t i = 0; i <= k; ++i) part.bounds_[i] = lo + width * static_cast<double>(i);
    if (hi > lo) part.bounds_[k] = hi;
    return part;
  }

  std::size_t count() const noexcept { return bounds_.size() - 1; }
  std::span<const double> boundaries() const noexcept { return bounds_; }

  // Index of the interval containing t. Times outside the span are clamped
  // to the first or last interval.
  std::size_t interval_of(double t) const {
    const std::size_t k = count();
    const double lo = bounds_.front();
    const double width = bounds_[1] - bounds_[0];
    double pos = std::floor((t - lo) / width);
    std::size_t i = pos <= 0.0 ? 0 : std::min(k - 1, static_cast<std::size_t>(pos));
    while (i > 0 && t < bounds_[i]) --i;
    while (i + 1 < k && t >= bounds_[i + 1]) ++i;
    return i;
  }

  // A cascade belongs to the interval holding its first event.
  std::size_t assign(const Cascade& c) const { return interval_of(c.first_time()); }

 private:
  std::vector<double> bounds_;
};

inline IntervalPartition partition_intervals(std::span<const EventRecord> events, std::size_t k) {
  if (events.empty()) throw ConfigError("cannot partition an empty event set");
  if (k == 0) throw ConfigError("number of intervals must be positive");
  double lo = events.front().timestamp, hi = lo;
  for (std::size_t i = 0; i < events.size(); ++i) {
    validate_event(events[i], i + 1);
    lo = std::min(lo, events[i].timestamp);
    hi = std::max(hi, events[i].timestamp);
  }
  return IntervalPartition::over(lo, hi, k);
}

inline IntervalPartition partition_intervals(std::span<const Cascade> cascades, std::size_t k) {
  if (cascades.empty()) throw ConfigError("cannot partition an empty cascade set");
  double lo = cascades.front().first_time(), hi = cascades.front().last_time();
  for (const auto& c : cascades) {
    lo = std::min(lo, c.first_time());
    hi = std::max(hi, c.last_time());
  }
  return IntervalPartition::over(lo, hi, k);
}

enum class AssignmentRule {
  first_event,        // whole cascade goes to its origin interval
  split_by_interval,  // each interval sees only the events that fall inside it
};

inline std::vector<std::vector<Cascade>> group_by_interval(
    const IntervalPartition& partition, std::span<const Cascade> cascades,
    AssignmentRule rule = AssignmentRule::first_event) {
  std::vector<std::vector<Cascade>> out(partition.count());
  for (const auto& c : cascades) {
    if (rule == AssignmentRule::first_event) {
      out[partition.assign(c)].push_back(c);
      continue;
    }
    std::vector<std::vector<CascadeFactory::Observation>> parts(partition.count());
    for (const auto& e : c.entries())
      parts[partition.interval_of(e.timestamp)].push_back({e.participant_id, e.timestamp, e.viewed});
    for (std::size_t i = 0; i < parts.size(); ++i)
      if (!parts[i].empty()) out[i].push_back(CascadeFactory::make(c.id(), std::move(parts[i])));
  }
  return out;
}

// One score table per window position: table j covers intervals
// [j, j + window). Window tables are merges of per-interval tables computed
// once, never running sums with departed intervals subtracted.
inline std::vector<ScoreTable> rolling_scores(const IntervalPartition& partition,
                                              const std::vector<std::vector<Cascade>>& by_interval,
                                              std::size_t window, const ScoringConfig& config) {
  config.validate();
  const std::size_t k = partition.count();
  if (by_interval.size() != k)
    throw ConfigError("expected " + std::to_string(k) + " interval groups, got " +
                      std::to_string(by_interval.size()));
  if (window == 0 || window > k)
    throw ConfigError("window must be in [1, " + std::to_string(k) + "], got " +
                      std::to_string(window));

  std::vector<ScoreTable> per_interval;
  per_interval.reserve(k);
  for (const auto& group : by_interval) per_interval.push_back(score_set(group, config));

  std::vector<ScoreTable> windows;
  windows.reserve(k - window + 1);
  for (std::size_t start = 0; start + window <= k; ++start) {
    ScoreTable t;
    for (std::size_t i = start; i < start + window; ++i) t.merge(per_interval[i]);
    windows.push_back(std::move(t));
  }
  return windows;
}

// Participant ids of the k highest totals, ties by id ascending.
inline std::vector<std::string> top_k(const ScoreTable& table, std::size_t k) {
  auto ranked = table.ranked();
  std::vector<std::string> out;
  const std::size_t n = std::min(k, ranked.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::move(ranked[i].participant_id));
  return out;
}

struct ConsistencyPoint {
  std::size_t window_end_interval = 0;
  double overlap = 0.0;
  std::size_t effective_k = 0;  // < requested K when a table was too small
  bool clamped = false;
};

struct ConsistencySeries {
  std::size_t k = 0;
  std::vector<ConsistencyPoint> points;

  std::size_t clamped_count() const {
    return static_cast<std::size_t>(std::count_if(points.begin(), points.end(),
                                                  [](const auto& p) { return p.clamped; }));
  }
};

// overlap(t) = |topK(t) ∩ topK(t-1)| / K for t = 1..n-1. Point t is labelled
// `first_window_end + t`. A table with fewer than K participants clamps K to
// the smaller table size for that comparison and marks the point clamped.
inline ConsistencySeries topk_consistency(std::span<const ScoreTable> tables, std::size_t K,
                                          std::size_t first_window_end = 0) {
  if (K == 0) throw ConfigError("top-k must be positive");
  if (tables.size() < 2) throw ConfigError("consistency needs at least two score tables");
  ConsistencySeries series;
  series.k = K;
  std::vector<std::string> prev_top = top_k(tables[0], K);
  for (std::size_t t = 1; t < tables.size(); ++t) {
    const std::size_t kk = std::min({K, tables[t - 1].size(), tables[t].size()});
    std::vector<std::string> cur_top = top_k(tables[t], K);
    ConsistencyPoint pt;
    pt.window_end_interval = first_window_end + t;
    pt.effective_k = kk;
    pt.clamped = kk < K;
    if (kk == 0) {
      pt.overlap = tables[t - 1].empty() && tables[t].empty() ? 1.0 : 0.0;
    } else {
      std::unordered_set<std::string> prev(prev_top.begin(), prev_top.begin() + kk);
      std::size_t shared = 0;
      for (std::size_t i = 0; i < kk; ++i) shared += prev.count(cur_top[i]);
      pt.overlap = static_cast<double>(shared) / static_cast<double>(kk);
    }
    series.points.push_back(pt);
    prev_top = std::move(cur_top);
  }
  return series;
}

// window_end_interval,overlap_fraction
inline void write_consistency_csv(std::ostream& os, const ConsistencySeries& series) {
  os << "window_end_interval,overlap_fraction\n";
  for (const auto& p : series.points)
    os << p.window_end_interval << ',' << detail::fixed6(p.overlap) << '\n';
}

}  // namespace earlyscore
