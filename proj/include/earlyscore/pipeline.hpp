#pragma once

#include <cstddef>

#include "cascade.hpp"
#include "ingest.hpp"
#include "scoring.hpp"

namespace earlyscore {

struct StreamStats {
  std::size_t events = 0;
  std::size_t cascades = 0;
};

// Reads, assembles and scores in one pass over input grouped by cascade id.
// Resident state is the score table plus the cascade being assembled.
inline ScoreTable score_stream(EventReader& reader, const BuildOptions& build,
                               const ScoringConfig& config, bool verify_contiguous = true,
                               bool retain_terms = false, StreamStats* stats = nullptr) {
  config.validate();
  ScoreTable table(retain_terms);
  auto sink = [&](const Cascade& c) { table.add_cascade(c, config); };
  StreamingCascadeBuilder<decltype(sink)> builder(sink, build, verify_contiguous);
  while (auto rec = reader.next()) builder.add(*rec);
  builder.flush();
  if (stats) {
    stats->events = builder.records();
    stats->cascades = builder.emitted();
  }
  return table;
}

}  // namespace earlyscore
