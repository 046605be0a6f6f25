#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "cascade.hpp"
#include "error.hpp"
#include "ingest.hpp"

namespace earlyscore {

struct ScoringConfig {
  double alpha = 0.5;
  // Read v from the events' viewed flag; when false every v is 1.
  bool use_view_filter = false;

  void validate() const {
    if (!std::isfinite(alpha) || alpha <= 0.0)
      throw ConfigError("alpha must be finite and positive, got " + std::to_string(alpha));
  }
};

// ln(d) * v * p^alpha, with the d = 0 term defined as 0.
inline double term_value(std::uint32_t downstream, bool viewed, double inverse_percentile,
                         double alpha) {
  if (downstream == 0 || !viewed) return 0.0;
  return std::log(static_cast<double>(downstream)) * std::pow(inverse_percentile, alpha);
}

inline double term_value(const CascadeEntry& e, const ScoringConfig& config) {
  return term_value(e.downstream, !config.use_view_filter || e.viewed, e.inverse_percentile,
                    config.alpha);
}

// One participant's share of one cascade, with its factors kept so a total
// can be explained after the fact.
struct ContributionTerm {
  std::string cascade_id;
  std::string participant_id;
  std::uint32_t downstream = 0;
  bool viewed = true;
  double inverse_percentile = 0.0;
  double value = 0.0;

  friend bool operator==(const ContributionTerm&, const ContributionTerm&) = default;
};

inline std::vector<ContributionTerm> score_cascade(const Cascade& cascade,
                                                   const ScoringConfig& config) {
  config.validate();
  std::vector<ContributionTerm> terms;
  terms.reserve(cascade.size());
  for (const auto& e : cascade.entries()) {
    const bool v = !config.use_view_filter || e.viewed;
    terms.push_back({cascade.id(), e.participant_id, e.downstream, v, e.inverse_percentile,
                     term_value(e, config)});
  }
  return terms;
}

struct ParticipantScore {
  long double total = 0.0L;
  std::uint64_t cascade_count = 0;
};

struct RankedScore {
  std::string participant_id;
  long double total = 0.0L;
  std::uint64_t cascade_count = 0;
};

// Participant -> accumulated score. Totals only by default; with
// `retain_terms` every ContributionTerm is kept for decomposition, which
// costs memory proportional to the number of events scored.
class ScoreTable {
 public:
  using Map = std::unordered_map<std::string, ParticipantScore>;

  ScoreTable() = default;
  explicit ScoreTable(bool retain_terms) : retain_(retain_terms) {}

  void add_cascade(const Cascade& cascade, const ScoringConfig& config) {
    for (const auto& e : cascade.entries()) {
      const double value = term_value(e, config);
      auto& slot = scores_[e.participant_id];
      slot.total += value;
      ++slot.cascade_count;
      if (retain_) {
        terms_[e.participant_id].push_back({cascade.id(), e.participant_id, e.downstream,
                                            !config.use_view_filter || e.viewed,
                                            e.inverse_percentile, value});
      }
    }
  }

  // Sums totals and counts per participant. Terms are carried over only when
  // both tables retain them.
  void merge(const ScoreTable& other) {
    for (const auto& [id, s] : other.scores_) {
      auto& slot = scores_[id];
      slot.total += s.total;
      slot.cascade_count += s.cascade_count;
    }
    if (retain_ && other.retain_) {
      for (const auto& [id, ts] : other.terms_) {
        auto& dst = terms_[id];
        dst.insert(dst.end(), ts.begin(), ts.end());
      }
    } else {
      retain_ = false;
      terms_.clear();
    }
  }

  const ParticipantScore* find(const std::string& participant) const {
    auto it = scores_.find(participant);
    return it == scores_.end() ? nullptr : &it->second;
  }

  std::size_t size() const noexcept { return scores_.size(); }
  bool empty() const noexcept { return scores_.empty(); }
  bool retains_terms() const noexcept { return retain_; }
  const Map& scores() const noexcept { return scores_; }

  // Retained terms of one participant, in the order they were scored.
  // Empty for an unknown participant.
  std::span<const ContributionTerm> terms_of(const std::string& participant) const {
    if (!retain_) throw DecompositionDisabled();
    auto it = terms_.find(participant);
    if (it == terms_.end()) return {};
    return it->second;
  }

  // Descending by total, ties by participant id ascending.
  std::vector<RankedScore> ranked() const {
    std::vector<RankedScore> out;
    out.reserve(scores_.size());
    for (const auto& [id, s] : scores_) out.push_back({id, s.total, s.cascade_count});
    std::sort(out.begin(), out.end(), [](const RankedScore& a, const RankedScore& b) {
      if (a.total != b.total) return a.total > b.total;
      return a.participant_id < b.participant_id;
    });
    return out;
  }

 private:
  bool retain_ = false;
  Map scores_;
  std::unordered_map<std::string, std::vector<ContributionTerm>> terms_;
};

// Scores cascades one at a time; the range may be a lazy view over a stream.
template <typename CascadeRange>
ScoreTable score_set(const CascadeRange& cascades, const ScoringConfig& config,
                     bool retain_terms = false) {
  config.validate();
  ScoreTable table(retain_terms);
  for (const Cascade& c : cascades) table.add_cascade(c, config);
  return table;
}

// Shards cascades into contiguous blocks, scores each block on its own
// thread and merges the block tables in block order.
inline ScoreTable score_set_parallel(std::span<const Cascade> cascades,
                                     const ScoringConfig& config, unsigned threads,
                                     bool retain_terms = false) {
  config.validate();
  if (threads <= 1 || cascades.size() < 2) return score_set(cascades, config, retain_terms);
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cascades.size()));
  std::vector<ScoreTable> shards(threads, ScoreTable(retain_terms));
  std::vector<std::thread> workers;
  const std::size_t block = (cascades.size() + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t lo = std::min(cascades.size(), w * block);
    const std::size_t hi = std::min(cascades.size(), lo + block);
    workers.emplace_back([&, w, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) shards[w].add_cascade(cascades[i], config);
    });
  }
  for (auto& t : workers) t.join();
  ScoreTable out(retain_terms);
  for (const auto& s : shards) out.merge(s);
  return out;
}

// The participant's terms, largest first (ties by cascade id), truncated to
// `top_n`. nullopt when the participant never appeared.
inline std::optional<std::vector<ContributionTerm>> decompose(const ScoreTable& table,
                                                              const std::string& participant,
                                                              std::size_t top_n) {
  if (top_n == 0) throw ConfigError("top_n must be positive");
  if (!table.retains_terms()) throw DecompositionDisabled();
  if (!table.find(participant)) return std::nullopt;
  auto span = table.terms_of(participant);
  std::vector<ContributionTerm> terms(span.begin(), span.end());
  std::sort(terms.begin(), terms.end(), [](const ContributionTerm& a, const ContributionTerm& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.cascade_id < b.cascade_id;
  });
  if (terms.size() > top_n) terms.resize(top_n);
  return terms;
}

// Per-factor summary of one participant's terms: how often (count), how
// early (p) and how far-reaching (d) their participation was.
struct TermProfile {
  std::size_t participation_count = 0;
  double mean_p = 0.0;
  double median_p = 0.0;
  double mean_d = 0.0;
  double median_d = 0.0;
  double viewed_fraction = 0.0;
  long double total = 0.0L;
};

namespace detail {
inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
  if (xs.size() % 2) return xs[mid];
  const double upper = xs[mid];
  const double lower = *std::max_element(xs.begin(), xs.begin() + mid);
  return 0.5 * (lower + upper);
}
}  // namespace detail

inline std::optional<TermProfile> term_profile(const ScoreTable& table,
                                               const std::string& participant) {
  if (!table.retains_terms()) throw DecompositionDisabled();
  const ParticipantScore* score = table.find(participant);
  if (!score) return std::nullopt;
  auto terms = table.terms_of(participant);
  TermProfile prof;
  prof.participation_count = terms.size();
  prof.total = score->total;
  std::vector<double> ps, ds;
  ps.reserve(terms.size());
  ds.reserve(terms.size());
  std::size_t viewed = 0;
  for (const auto& t : terms) {
    ps.push_back(t.inverse_percentile);
    ds.push_back(static_cast<double>(t.downstream));
    viewed += t.viewed ? 1 : 0;
  }
  if (!terms.empty()) {
    const double n = static_cast<double>(terms.size());
    for (double p : ps) prof.mean_p += p;
    for (double d : ds) prof.mean_d += d;
    prof.mean_p /= n;
    prof.mean_d /= n;
    prof.viewed_fraction = static_cast<double>(viewed) / n;
    prof.median_p = detail::median(std::move(ps));
    prof.median_d = detail::median(std::move(ds));
  }
  return prof;
}

namespace detail {
inline std::string fixed6(long double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6Lf", x);
  return buf;
}
}  // namespace detail

// participant_id,total_score,cascade_count
inline void write_scores_csv(std::ostream& os, const ScoreTable& table) {
  os << "participant_id,total_score,cascade_count\n";
  for (const auto& r : table.ranked()) {
    detail::write_field(os, r.participant_id, ',');
    os << ',' << detail::fixed6(r.total) << ',' << r.cascade_count << '\n';
  }
}

// cascade_id,participant_id,downstream,viewed,inverse_percentile,value
inline void write_terms_csv(std::ostream& os, std::span<const ContributionTerm> terms,
                            bool header = true) {
  if (header) os << "cascade_id,participant_id,downstream,viewed,inverse_percentile,value\n";
  for (const auto& t : terms) {
    detail::write_field(os, t.cascade_id, ',');
    os << ',';
    detail::write_field(os, t.participant_id, ',');
    os << ',' << t.downstream << ',' << (t.viewed ? 1 : 0) << ','
       << detail::fixed6(t.inverse_percentile) << ',' << detail::fixed6(t.value) << '\n';
  }
}

}  // namespace earlyscore
