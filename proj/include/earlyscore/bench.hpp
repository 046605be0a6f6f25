#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include "cascade.hpp"
#include "error.hpp"
#include "ingest.hpp"
#include "pipeline.hpp"
#include "scoring.hpp"
#include "synthetic.hpp"

namespace earlyscore {

// Peak resident set size of this process so far, in bytes.
inline std::optional<std::size_t> peak_rss_bytes() {
  rusage ru{};
  if (getrusage(RUSAGE_SELF, &ru) != 0) return std::nullopt;
  return static_cast<std::size_t>(ru.ru_maxrss) * 1024;
}

struct ChildMemory {
  std::size_t start_rss = 0;  // bytes resident when `fn` started
  std::size_t peak_rss = 0;   // high-water mark while `fn` ran

  std::size_t growth() const { return peak_rss > start_rss ? peak_rss - start_rss : 0; }
};

namespace detail {
// VmRSS / VmHWM from /proc/self/status, in bytes.
inline std::optional<std::size_t> proc_status_bytes(const char* key) {
  std::FILE* f = std::fopen("/proc/self/status", "r");
  if (!f) return std::nullopt;
  char line[256];
  std::optional<std::size_t> out;
  const std::size_t klen = std::strlen(key);
  while (std::fgets(line, sizeof line, f)) {
    if (std::strncmp(line, key, klen) == 0 && line[klen] == ':') {
      out = static_cast<std::size_t>(std::strtoull(line + klen + 1, nullptr, 10)) * 1024;
      break;
    }
  }
  std::fclose(f);
  return out;
}
}  // namespace detail

// Runs `fn` in a forked child whose peak-RSS counter is reset first, and
// reports how far its resident set grew. Linux only; throws if the child
// fails or the counters are unavailable.
inline ChildMemory measure_in_child(const std::function<void()>& fn) {
  int fds[2];
  if (pipe(fds) != 0) throw Error("pipe failed");
  std::fflush(nullptr);
  const pid_t pid = fork();
  if (pid < 0) throw Error("fork failed");
  if (pid == 0) {
    close(fds[0]);
    ChildMemory m;
    bool ok = false;
    if (std::FILE* f = std::fopen("/proc/self/clear_refs", "w")) {
      ok = std::fputs("5", f) >= 0;
      ok = (std::fclose(f) == 0) && ok;
    }
    try {
      auto rss = detail::proc_status_bytes("VmRSS");
      if (!ok || !rss) _exit(2);
      m.start_rss = *rss;
      fn();
      auto hwm = detail::proc_status_bytes("VmHWM");
      if (!hwm) _exit(2);
      m.peak_rss = *hwm;
    } catch (...) {
      _exit(1);
    }
    const ssize_t n = write(fds[1], &m, sizeof m);
    _exit(n == static_cast<ssize_t>(sizeof m) ? 0 : 1);
  }
  close(fds[1]);
  ChildMemory m;
  const ssize_t n = read(fds[0], &m, sizeof m);
  close(fds[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0 || n != static_cast<ssize_t>(sizeof m))
    throw Error("memory measurement child failed");
  return m;
}

// Least-squares slope of log(y) on log(x).
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw ConfigError("need at least two points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

enum class Materialization {
  memory,  // CSV text held in memory; parse, build and score timed separately
  disk,    // CSV file streamed through the one-pass pipeline; total only
};

struct BenchOptions {
  std::size_t repetitions = 7;
  Materialization materialize = Materialization::memory;
  unsigned threads = 1;
  std::filesystem::path scratch_dir = std::filesystem::temp_directory_path();
};

struct BenchReport {
  std::size_t events = 0;
  std::size_t cascades = 0;
  std::size_t participants = 0;
  std::size_t repetitions = 0;
  unsigned threads = 1;
  Materialization materialize = Materialization::memory;
  double mean_seconds = 0.0;
  double stddev_seconds = 0.0;
  std::optional<double> mean_parse_seconds;
  std::optional<double> mean_build_seconds;
  std::optional<double> mean_score_seconds;
  std::optional<std::size_t> peak_rss_bytes;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline double mean(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

struct TempFile {
  std::filesystem::path path;
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

}  // namespace detail

// Generates the synthetic events once, then times the full pipeline
// (parse -> build cascades -> score) `repetitions` times after one discarded
// warm-up run.
inline BenchReport run_bench(const SyntheticSpec& spec, const ScoringConfig& config,
                             const BenchOptions& options = {}) {
  if (options.repetitions < 3) throw ConfigError("repetitions must be at least 3");
  config.validate();
  const CsvEventFormat csv{};

  BenchReport report;
  report.repetitions = options.repetitions;
  report.threads = options.threads;
  report.materialize = options.materialize;

  std::string text;
  detail::TempFile file;
  {
    SyntheticGenerator gen(spec);
    std::vector<EventRecord> batch;
    if (options.materialize == Materialization::memory) {
      std::ostringstream os;
      EventWriter writer(os, csv);
      while (gen.next(batch)) {
        for (const auto& e : batch) writer.write(e);
        batch.clear();
      }
      text = std::move(os).str();
    } else {
      file.path = options.scratch_dir /
                  ("earlyscore-bench-" + std::to_string(::getpid()) + "-" +
                   std::to_string(spec.seed) + ".csv");
      EventWriter writer(file.path, csv);
      while (gen.next(batch)) {
        for (const auto& e : batch) writer.write(e);
        batch.clear();
      }
      writer.close();
    }
  }

  std::vector<double> total, parse, build, score;
  for (std::size_t rep = 0; rep <= options.repetitions; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    if (options.materialize == Materialization::memory) {
      std::istringstream in(text);
      EventReader reader(in, csv);
      std::vector<EventRecord> events;
      reader.for_each([&](EventRecord&& r) { events.push_back(std::move(r)); });
      const double t_parse = detail::seconds_since(t0);

      const auto t1 = std::chrono::steady_clock::now();
      auto cascades = build_cascades(events);
      const double t_build = detail::seconds_since(t1);

      const auto t2 = std::chrono::steady_clock::now();
      ScoreTable table = score_set_parallel(cascades, config, options.threads);
      const double t_score = detail::seconds_since(t2);

      if (rep > 0) {
        parse.push_back(t_parse);
        build.push_back(t_build);
        score.push_back(t_score);
      }
      report.events = events.size();
      report.cascades = cascades.size();
      report.participants = table.size();
    } else {
      EventReader reader(file.path, csv);
      StreamStats stats;
      ScoreTable table = score_stream(reader, {}, config, false, false, &stats);
      report.events = stats.events;
      report.cascades = stats.cascades;
      report.participants = table.size();
    }
    if (rep > 0) total.push_back(detail::seconds_since(t0));
  }

  report.mean_seconds = detail::mean(total);
  report.stddev_seconds = detail::sample_stddev(total);
  if (!parse.empty()) {
    report.mean_parse_seconds = detail::mean(parse);
    report.mean_build_seconds = detail::mean(build);
    report.mean_score_seconds = detail::mean(score);
  }
  report.peak_rss_bytes = peak_rss_bytes();
  return report;
}

inline void write_bench_csv(std::ostream& os, const BenchReport& r) {
  auto opt = [](const std::optional<double>& v) {
    char buf[32];
    if (!v) return std::string();
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  os << "events,cascades,participants,repetitions,threads,materialize,mean_seconds,"
        "stddev_seconds,mean_parse_seconds,mean_build_seconds,mean_score_seconds,peak_rss_bytes\n";
  os << r.events << ',' << r.cascades << ',' << r.participants << ',' << r.repetitions << ','
     << r.threads << ',' << (r.materialize == Materialization::memory ? "memory" : "disk") << ','
     << opt(r.mean_seconds) << ',' << opt(r.stddev_seconds) << ',' << opt(r.mean_parse_seconds)
     << ',' << opt(r.mean_build_seconds) << ',' << opt(r.mean_score_seconds) << ','
     << (r.peak_rss_bytes ? std::to_string(*r.peak_rss_bytes) : std::string()) << '\n';
}

inline void write_bench_text(std::ostream& os, const BenchReport& r) {
  char line[160];
  os << "events:        " << r.events << '\n'
     << "cascades:      " << r.cascades << '\n'
     << "participants:  " << r.participants << '\n'
     << "repetitions:   " << r.repetitions << " (+1 warm-up discarded)\n"
     << "threads:       " << r.threads << '\n';
  std::snprintf(line, sizeof line, "mean runtime:  %.4f s (sd %.4f s)\n", r.mean_seconds,
                r.stddev_seconds);
  os << line;
  if (r.mean_parse_seconds) {
    std::snprintf(line, sizeof line, "  parse %.4f s, build %.4f s, score %.4f s\n",
                  *r.mean_parse_seconds, *r.mean_build_seconds, *r.mean_score_seconds);
    os << line;
  }
  if (r.peak_rss_bytes) {
    std::snprintf(line, sizeof line, "peak RSS:      %.1f MiB\n",
                  static_cast<double>(*r.peak_rss_bytes) / (1024.0 * 1024.0));
    os << line;
  }
}

}  // namespace earlyscore
