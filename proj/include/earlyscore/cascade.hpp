#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"

namespace earlyscore {

// One raw observation: participant `participant_id` joined cascade
// `cascade_id` at `timestamp`. Only the ordering of timestamps is consumed.
struct EventRecord {
  std::string cascade_id;
  std::string participant_id;
  double timestamp = 0.0;
  std::optional<bool> viewed;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

inline void validate_event(const EventRecord& e, std::size_t record_index = 0) {
  if (e.cascade_id.empty()) throw DataError("empty cascade id", record_index);
  if (e.participant_id.empty()) throw DataError("empty participant id", record_index);
  if (!std::isfinite(e.timestamp)) throw DataError("non-finite timestamp", record_index);
}

struct CascadeEntry {
  std::string participant_id;
  double timestamp = 0.0;
  std::uint32_t rank = 0;        // competition rank, 0-based
  std::uint32_t downstream = 0;  // participants with a strictly later timestamp
  double inverse_percentile = 1.0;
  bool viewed = true;

  friend bool operator==(const CascadeEntry&, const CascadeEntry&) = default;
};

// Deduplicated, time-ordered participant sequence. Entries are sorted by
// (timestamp, participant_id); immutable once built.
class Cascade {
 public:
  Cascade() = default;

  const std::string& id() const noexcept { return id_; }
  std::span<const CascadeEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  double first_time() const noexcept { return entries_.front().timestamp; }
  double last_time() const noexcept { return entries_.back().timestamp; }

  friend bool operator==(const Cascade&, const Cascade&) = default;

 private:
  friend class CascadeFactory;
  std::string id_;
  std::vector<CascadeEntry> entries_;
};

struct BuildOptions {
  std::size_t min_size = 1;
  std::size_t max_size = std::numeric_limits<std::size_t>::max();

  bool admits(std::size_t n) const noexcept { return n >= min_size && n <= max_size; }
};

// Turns the raw (participant, time, viewed) observations of one cascade into
// a Cascade. Duplicate participants keep their earliest timestamp; when the
// duplicates share that timestamp the viewed flags are OR-ed.
class CascadeFactory {
 public:
  struct Observation {
    std::string participant_id;
    double timestamp;
    bool viewed;
  };

  static Cascade make(std::string cascade_id, std::vector<Observation> obs) {
    if (obs.empty()) throw DataError("cascade '" + cascade_id + "' has no events");

    std::sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) {
      if (a.participant_id != b.participant_id) return a.participant_id < b.participant_id;
      return a.timestamp < b.timestamp;
    });
    std::size_t kept = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (kept > 0 && obs[kept - 1].participant_id == obs[i].participant_id) {
        if (obs[kept - 1].timestamp == obs[i].timestamp)
          obs[kept - 1].viewed = obs[kept - 1].viewed || obs[i].viewed;
        continue;
      }
      if (kept != i) obs[kept] = std::move(obs[i]);
      ++kept;
    }
    obs.resize(kept);

    std::sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return a.participant_id < b.participant_id;
    });

    Cascade c;
    c.id_ = std::move(cascade_id);
    c.entries_.resize(obs.size());
    const std::size_t n = obs.size();
    std::size_t group_start = 0;
    while (group_start < n) {
      std::size_t group_end = group_start + 1;
      while (group_end < n && obs[group_end].timestamp == obs[group_start].timestamp) ++group_end;
      const auto rank = static_cast<std::uint32_t>(group_start);
      const auto downstream = static_cast<std::uint32_t>(n - group_end);
      const double p = n == 1 ? 1.0
                              : 1.0 - static_cast<double>(group_start) / static_cast<double>(n - 1);
      for (std::size_t i = group_start; i < group_end; ++i) {
        auto& e = c.entries_[i];
        e.participant_id = std::move(obs[i].participant_id);
        e.timestamp = obs[i].timestamp;
        e.rank = rank;
        e.downstream = downstream;
        e.inverse_percentile = p;
        e.viewed = obs[i].viewed;
      }
      group_start = group_end;
    }
    return c;
  }
};

// Groups events by cascade id and builds every cascade whose deduplicated
// size passes `options`. Output is sorted by cascade id, so the result does
// not depend on input order.
inline std::vector<Cascade> build_cascades(std::span<const EventRecord> events,
                                           const BuildOptions& options = {}) {
  std::unordered_map<std::string, std::vector<CascadeFactory::Observation>> groups;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    validate_event(e, i + 1);
    groups[e.cascade_id].push_back({e.participant_id, e.timestamp, e.viewed.value_or(true)});
  }

  std::vector<std::pair<std::string, std::vector<CascadeFactory::Observation>>> ordered;
  ordered.reserve(groups.size());
  for (auto& [id, obs] : groups) ordered.emplace_back(id, std::move(obs));
  groups.clear();
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<Cascade> out;
  out.reserve(ordered.size());
  for (auto& [id, obs] : ordered) {
    auto c = CascadeFactory::make(std::move(id), std::move(obs));
    if (options.admits(c.size())) out.push_back(std::move(c));
  }
  return out;
}

// Builds cascades from an event stream in which each cascade's events are
// contiguous (as produced by the synthetic generator or a file sorted by
// cascade id). Holds only the cascade currently being assembled.
//
// With `verify_contiguous` set, a cascade id that reappears after its group
// was closed raises DataError; the check remembers every closed id, so it
// costs memory proportional to the number of cascades.
template <typename Sink>
class StreamingCascadeBuilder {
 public:
  StreamingCascadeBuilder(Sink sink, BuildOptions options = {}, bool verify_contiguous = true)
      : sink_(std::move(sink)), options_(options), verify_(verify_contiguous) {}

  void add(const EventRecord& e) {
    ++records_;
    validate_event(e, records_);
    if (!open_ || e.cascade_id != current_id_) {
      flush();
      if (verify_ && !closed_.insert(e.cascade_id).second)
        throw DataError("cascade '" + e.cascade_id + "' is not contiguous in the input",
                        records_);
      current_id_ = e.cascade_id;
      open_ = true;
    }
    pending_.push_back({e.participant_id, e.timestamp, e.viewed.value_or(true)});
  }

  // Emits the cascade in progress, if any. Call once the input is exhausted.
  void flush() {
    if (!open_) return;
    open_ = false;
    auto c = CascadeFactory::make(current_id_, std::move(pending_));
    pending_.clear();
    if (options_.admits(c.size())) {
      ++emitted_;
      sink_(std::as_const(c));
    }
  }

  std::size_t records() const noexcept { return records_; }
  std::size_t emitted() const noexcept { return emitted_; }

 private:
  Sink sink_;
  BuildOptions options_;
  bool verify_;
  bool open_ = false;
  std::string current_id_;
  std::vector<CascadeFactory::Observation> pending_;
  std::unordered_set<std::string> closed_;
  std::size_t records_ = 0;
  std::size_t emitted_ = 0;
};

}  // namespace earlyscore
