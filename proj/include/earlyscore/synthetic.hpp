#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "cascade.hpp"
#include "error.hpp"

namespace earlyscore {

enum class SizeDistribution { fixed, uniform, power_law };

struct SyntheticSpec {
  std::size_t n_cascades = 1000;
  // When set, generation stops after exactly this many events (the last
  // cascade is cut short) and n_cascades is ignored.
  std::optional<std::size_t> target_events;

  std::size_t pool_size = 1000;
  SizeDistribution sizes = SizeDistribution::fixed;
  std::size_t fixed_size = 10;
  std::size_t size_lo = 1;
  std::size_t size_hi = 10;
  double gamma = 2.0;      // P(s) ∝ s^-gamma on [1, cap]
  std::size_t cap = 1000;

  double time_start = 0.0;
  double time_span = 1.0e6;
  // 0: every cascade's events are spread over the whole span. Otherwise each
  // cascade starts uniformly in the span and lasts this long.
  double cascade_duration = 0.0;
  // Probability that an event copies its predecessor's timestamp.
  double tie_fraction = 0.0;

  // The first `early_slots` positions of every cascade are drawn from a
  // dedicated pool of `early_pool` participants ("e<i>"); the rest from the
  // regular pool ("u<i>"). Indices start at participant_offset.
  std::size_t early_pool = 0;
  std::size_t early_slots = 0;
  std::size_t participant_offset = 0;
  std::string cascade_prefix = "c";

  std::uint64_t seed = 1;

  std::size_t max_cascade_size() const {
    switch (sizes) {
      case SizeDistribution::fixed: return fixed_size;
      case SizeDistribution::uniform: return size_hi;
      case SizeDistribution::power_law: return cap;
    }
    return 0;
  }

  void validate() const {
    if (sizes == SizeDistribution::fixed && fixed_size == 0)
      throw ConfigError("fixed cascade size must be positive");
    if (sizes == SizeDistribution::uniform && (size_lo == 0 || size_lo > size_hi))
      throw ConfigError("uniform sizes need 1 <= lo <= hi");
    if (sizes == SizeDistribution::power_law && (cap == 0 || !(gamma > 0.0) || !std::isfinite(gamma)))
      throw ConfigError("power-law sizes need cap >= 1 and a finite positive exponent");
    if (early_slots > early_pool)
      throw ConfigError("early_slots exceeds early_pool");
    const std::size_t need = max_cascade_size();
    const std::size_t regular_need = need > early_slots ? need - early_slots : 0;
    if (pool_size < regular_need)
      throw ConfigError("participant pool (" + std::to_string(pool_size) +
                        ") is smaller than the largest cascade (" + std::to_string(need) + ")");
    if (!std::isfinite(time_start) || !std::isfinite(time_span) || time_span <= 0.0)
      throw ConfigError("time span must be finite and positive");
    if (cascade_duration < 0.0 || cascade_duration > time_span)
      throw ConfigError("cascade duration must lie in [0, time_span]");
    if (tie_fraction < 0.0 || tie_fraction > 1.0)
      throw ConfigError("tie fraction must lie in [0, 1]");
  }
};

// Seed-deterministic cascade stream. Events of one cascade are emitted
// together, in time order, so the output is grouped by cascade id.
class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(SyntheticSpec spec) : spec_(std::move(spec)), rng_(spec_.seed) {
    spec_.validate();
    if (spec_.sizes == SizeDistribution::power_law) {
      std::vector<double> w(spec_.cap);
      for (std::size_t s = 1; s <= spec_.cap; ++s)
        w[s - 1] = std::pow(static_cast<double>(s), -spec_.gamma);
      power_law_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    }
  }

  // Appends the next cascade's events to `out`. False once exhausted.
  bool next(std::vector<EventRecord>& out) {
    std::size_t size;
    if (spec_.target_events) {
      if (emitted_ >= *spec_.target_events) return false;
      size = std::min(draw_size(), *spec_.target_events - emitted_);
    } else {
      if (cascades_ >= spec_.n_cascades) return false;
      size = draw_size();
    }

    const std::string cid = spec_.cascade_prefix + std::to_string(cascades_);
    ++cascades_;

    const std::size_t early = std::min(size, spec_.early_slots);
    std::vector<std::string> who;
    who.reserve(size);
    for (std::size_t idx : sample(spec_.early_pool, early))
      who.push_back("e" + std::to_string(spec_.participant_offset + idx));
    for (std::size_t idx : sample(spec_.pool_size, size - early))
      who.push_back("u" + std::to_string(spec_.participant_offset + idx));

    double lo = spec_.time_start, hi = spec_.time_start + spec_.time_span;
    if (spec_.cascade_duration > 0.0) {
      std::uniform_real_distribution<double> start(spec_.time_start,
                                                   hi - spec_.cascade_duration);
      lo = start(rng_);
      hi = lo + spec_.cascade_duration;
    }
    std::uniform_real_distribution<double> when(lo, hi);
    std::vector<double> times(size);
    for (auto& t : times) t = when(rng_);
    std::sort(times.begin(), times.end());
    std::bernoulli_distribution tie(spec_.tie_fraction);
    for (std::size_t i = 1; i < size; ++i) {
      if (spec_.tie_fraction > 0.0 && tie(rng_))
        times[i] = times[i - 1];
      else if (times[i] <= times[i - 1])
        times[i] = std::nextafter(times[i - 1], std::numeric_limits<double>::infinity());
    }

    for (std::size_t i = 0; i < size; ++i)
      out.push_back({cid, std::move(who[i]), times[i], std::nullopt});
    emitted_ += size;
    return true;
  }

  std::size_t events_emitted() const noexcept { return emitted_; }
  std::size_t cascades_emitted() const noexcept { return cascades_; }

 private:
  std::size_t draw_size() {
    switch (spec_.sizes) {
      case SizeDistribution::fixed:
        return spec_.fixed_size;
      case SizeDistribution::uniform:
        return std::uniform_int_distribution<std::size_t>(spec_.size_lo, spec_.size_hi)(rng_);
      case SizeDistribution::power_law:
        return power_law_(rng_) + 1;
    }
    return 1;
  }

  // `count` distinct indices from [0, pool), in random order (Floyd).
  std::vector<std::size_t> sample(std::size_t pool, std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    std::unordered_set<std::size_t> seen;
    for (std::size_t j = pool - count; j < pool; ++j) {
      std::size_t r = std::uniform_int_distribution<std::size_t>(0, j)(rng_);
      if (!seen.insert(r).second) {
        seen.insert(j);
        r = j;
      }
      out.push_back(r);
    }
    std::shuffle(out.begin(), out.end(), rng_);
    return out;
  }

  SyntheticSpec spec_;
  std::mt19937_64 rng_;
  std::discrete_distribution<std::size_t> power_law_;
  std::size_t emitted_ = 0;
  std::size_t cascades_ = 0;
};

inline std::vector<EventRecord> generate(const SyntheticSpec& spec) {
  SyntheticGenerator gen(spec);
  std::vector<EventRecord> out;
  if (spec.target_events) out.reserve(*spec.target_events);
  while (gen.next(out)) {
  }
  return out;
}

}  // namespace earlyscore
