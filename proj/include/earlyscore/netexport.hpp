#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cascade.hpp"
#include "error.hpp"
#include "scoring.hpp"

namespace earlyscore {

struct InfluenceEdge {
  std::string source;
  std::string target;
  long double weight = 0.0L;
  std::uint64_t support = 0;
};

enum class EdgeMode {
  successor,   // u -> each member of the next rank group
  downstream,  // u -> every strictly later participant (optionally capped)
};

struct NetworkOptions {
  EdgeMode mode = EdgeMode::successor;
  std::optional<std::size_t> max_fanout;
  // Downstream mode refuses cascades larger than this unless max_fanout is
  // set or allow_quadratic is true.
  std::size_t guard_size = 10'000;
  bool allow_quadratic = false;
};

struct NetworkExport {
  std::vector<InfluenceEdge> edges;  // weight descending, then (source, target)
  std::size_t truncated_sources = 0; // (cascade, source) pairs cut by max_fanout
};

// Accumulates metric-weighted edges cascade by cascade. Each source's term
// value is split evenly over its targets, so the total edge weight equals
// the total score mass of participants that have any target.
class NetworkBuilder {
 public:
  NetworkBuilder(ScoringConfig config, NetworkOptions options)
      : config_(config), options_(options) {
    config_.validate();
    if (options_.max_fanout && *options_.max_fanout == 0)
      throw ConfigError("max_fanout must be positive");
  }

  void add_cascade(const Cascade& cascade) {
    const auto entries = cascade.entries();
    const std::size_t n = entries.size();
    if (options_.mode == EdgeMode::downstream && !options_.max_fanout &&
        !options_.allow_quadratic && n > options_.guard_size)
      throw ConfigError("cascade '" + cascade.id() + "' has " + std::to_string(n) +
                        " participants; downstream mode without max_fanout would emit O(n^2) "
                        "edges (set max_fanout or allow the quadratic export)");

    std::size_t group_start = 0;
    while (group_start < n) {
      std::size_t group_end = group_start + 1;
      while (group_end < n && entries[group_end].rank == entries[group_start].rank) ++group_end;
      if (group_end == n) break;  // terminal group: d = 0, no targets

      std::size_t target_end;
      if (options_.mode == EdgeMode::successor) {
        target_end = group_end + 1;
        while (target_end < n && entries[target_end].rank == entries[group_end].rank) ++target_end;
      } else {
        target_end = n;
      }
      std::size_t targets = target_end - group_end;
      if (options_.mode == EdgeMode::downstream && options_.max_fanout &&
          targets > *options_.max_fanout) {
        targets = *options_.max_fanout;
        target_end = group_end + targets;
        truncated_ += group_end - group_start;
      }

      for (std::size_t s = group_start; s < group_end; ++s) {
        const double share = term_value(entries[s], config_) / static_cast<double>(targets);
        for (std::size_t t = group_end; t < target_end; ++t) {
          if (entries[s].participant_id == entries[t].participant_id)
            throw std::logic_error("self-loop for participant '" + entries[s].participant_id +
                                   "' in cascade '" + cascade.id() + "'");
          auto& slot = edges_[{entries[s].participant_id, entries[t].participant_id}];
          slot.first += share;
          ++slot.second;
        }
      }
      group_start = group_end;
    }
  }

  NetworkExport finish() const {
    NetworkExport out;
    out.truncated_sources = truncated_;
    out.edges.reserve(edges_.size());
    for (const auto& [key, val] : edges_)
      out.edges.push_back({key.first, key.second, val.first, val.second});
    std::sort(out.edges.begin(), out.edges.end(), [](const InfluenceEdge& a, const InfluenceEdge& b) {
      if (a.weight != b.weight) return a.weight > b.weight;
      if (a.source != b.source) return a.source < b.source;
      return a.target < b.target;
    });
    return out;
  }

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<std::string, std::string>& p) const noexcept {
      const std::size_t h = std::hash<std::string>{}(p.first);
      return h ^ (std::hash<std::string>{}(p.second) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    }
  };

  ScoringConfig config_;
  NetworkOptions options_;
  std::unordered_map<std::pair<std::string, std::string>, std::pair<long double, std::uint64_t>,
                     PairHash>
      edges_;
  std::size_t truncated_ = 0;
};

template <typename CascadeRange>
NetworkExport export_network(const CascadeRange& cascades, const ScoringConfig& config,
                             const NetworkOptions& options = {}) {
  NetworkBuilder builder(config, options);
  for (const Cascade& c : cascades) builder.add_cascade(c);
  return builder.finish();
}

// source,target,weight,support
inline void write_edges_csv(std::ostream& os, const NetworkExport& net) {
  os << "source,target,weight,support\n";
  for (const auto& e : net.edges) {
    detail::write_field(os, e.source, ',');
    os << ',';
    detail::write_field(os, e.target, ',');
    os << ',' << detail::fixed6(e.weight) << ',' << e.support << '\n';
  }
}

}  // namespace earlyscore
