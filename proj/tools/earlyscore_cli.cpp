// earlyscore: command-line front end for the early-adopter scoring library.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "earlyscore/earlyscore.hpp"

namespace es = earlyscore;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitIo = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputOptions {
  std::string path = "-";
  std::string format = "csv";
  std::string delimiter = ",";
  bool header = false;
  std::vector<std::size_t> columns{0, 1, 2};
  bool strict = false;
  std::size_t min_size = 1;
  std::size_t max_size = std::numeric_limits<std::size_t>::max();
};

struct ScoringOptions {
  double alpha = 0.5;
  bool use_view_column = false;
};

double default_alpha() {
  if (const char* env = std::getenv("EARLYSCORE_ALPHA")) {
    try {
      return std::stod(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("EARLYSCORE_ALPHA is not a number: ") + env);
    }
  }
  return 0.5;
}

void add_input_flags(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("input", in.path, "Event file ('-' for standard input)")->required();
  cmd->add_option("--format", in.format, "Input format")
      ->check(CLI::IsMember({"csv", "tsv"}))
      ->capture_default_str();
  cmd->add_option("--delimiter", in.delimiter, "CSV delimiter (single character)")
      ->capture_default_str();
  cmd->add_flag("--header", in.header, "CSV input has a header row");
  cmd->add_option("--columns", in.columns,
                  "CSV column indices: cascade,participant,timestamp[,viewed]")
      ->delimiter(',')
      ->expected(3, 4);
  cmd->add_flag("--strict", in.strict, "Abort on the first malformed line (default: skip)");
  cmd->add_option("--min-size", in.min_size, "Drop cascades with fewer participants")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-size", in.max_size, "Drop cascades with more participants")
      ->check(CLI::PositiveNumber);
}

void add_scoring_flags(CLI::App* cmd, ScoringOptions& sc) {
  cmd->add_option("--alpha", sc.alpha, "Decay exponent on the inverse percentile "
                                        "(default 0.5 or $EARLYSCORE_ALPHA)");
  cmd->add_flag("--use-view-column", sc.use_view_column,
                "Read v from the viewed column instead of fixing it to 1");
}

es::EventFormat make_format(const InputOptions& in, const ScoringOptions* sc) {
  if (in.format == "tsv") {
    if (sc && sc->use_view_column) throw UsageError("--use-view-column needs CSV input with a viewed column");
    return es::ClusterTsvFormat{};
  }
  es::CsvEventFormat csv;
  if (in.delimiter == "tab" || in.delimiter == "\\t")
    csv.delimiter = '\t';
  else if (in.delimiter.size() == 1)
    csv.delimiter = in.delimiter[0];
  else
    throw UsageError("--delimiter must be a single character or 'tab'");
  csv.header = in.header;
  if (in.columns.size() < 3) throw UsageError("--columns needs at least three indices");
  csv.cascade_column = in.columns[0];
  csv.participant_column = in.columns[1];
  csv.timestamp_column = in.columns[2];
  if (in.columns.size() == 4) csv.viewed_column = in.columns[3];
  if (sc && sc->use_view_column && !csv.viewed_column)
    throw UsageError("--use-view-column needs a fourth --columns index for the viewed flag");
  try {
    csv.validate();
  } catch (const es::ConfigError& e) {
    throw UsageError(e.what());
  }
  return csv;
}

es::ScoringConfig make_config(const ScoringOptions& sc) {
  es::ScoringConfig config{sc.alpha, sc.use_view_column};
  try {
    config.validate();
  } catch (const es::ConfigError& e) {
    throw UsageError(e.what());
  }
  return config;
}

es::BuildOptions make_build(const InputOptions& in) {
  if (in.min_size > in.max_size) throw UsageError("--min-size exceeds --max-size");
  return {in.min_size, in.max_size};
}

std::vector<es::EventRecord> load_events(const InputOptions& in, const es::EventFormat& format) {
  es::ReadOptions ro;
  ro.mode = in.strict ? es::ParseMode::strict : es::ParseMode::lenient;
  std::unique_ptr<es::EventReader> reader;
  if (in.path == "-")
    reader = std::make_unique<es::EventReader>(std::cin, format, ro, "<stdin>");
  else
    reader = std::make_unique<es::EventReader>(in.path, format, ro);
  std::vector<es::EventRecord> events;
  reader->for_each([&](es::EventRecord&& r) { events.push_back(std::move(r)); });
  if (reader->skipped())
    std::cerr << reader->source() << ": skipped " << reader->skipped() << " malformed line(s)\n";
  return events;
}

// Runs `body` with an output stream bound to `path` ("-" is stdout).
template <typename Body>
void with_output(const std::string& path, Body&& body) {
  if (path == "-") {
    body(std::cout);
    std::cout.flush();
    if (!std::cout) throw es::IoError("<stdout>", "write failure");
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw es::IoError(path, "cannot open for writing");
  body(os);
  os.flush();
  if (!os) throw es::IoError(path, "write failure");
}

struct SpecOptions {
  es::SyntheticSpec spec;
  std::string size_dist = "powerlaw";
  std::optional<std::size_t> events;
};

void add_spec_flags(CLI::App* cmd, SpecOptions& s) {
  auto& sp = s.spec;
  cmd->add_option("--seed", sp.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--cascades", sp.n_cascades, "Number of cascades")->capture_default_str();
  cmd->add_option("--events", s.events, "Generate exactly this many events (overrides --cascades)");
  cmd->add_option("--pool", sp.pool_size, "Participant pool size")->capture_default_str();
  cmd->add_option("--size-dist", s.size_dist, "Cascade size distribution")
      ->check(CLI::IsMember({"fixed", "uniform", "powerlaw"}))
      ->capture_default_str();
  cmd->add_option("--size", sp.fixed_size, "Size for --size-dist fixed")->capture_default_str();
  cmd->add_option("--size-min", sp.size_lo, "Lower bound for --size-dist uniform")
      ->capture_default_str();
  cmd->add_option("--size-max", sp.size_hi, "Upper bound for --size-dist uniform")
      ->capture_default_str();
  cmd->add_option("--gamma", sp.gamma, "Power-law exponent")->capture_default_str();
  cmd->add_option("--cap", sp.cap, "Power-law size cap")->capture_default_str();
  cmd->add_option("--time-start", sp.time_start, "Start of the time span")->capture_default_str();
  cmd->add_option("--span", sp.time_span, "Length of the time span")->capture_default_str();
  cmd->add_option("--duration", sp.cascade_duration,
                  "Per-cascade duration (0: spread over the whole span)")
      ->capture_default_str();
  cmd->add_option("--tie-fraction", sp.tie_fraction, "Probability an event ties its predecessor")
      ->capture_default_str();
  cmd->add_option("--early-pool", sp.early_pool, "Size of the dedicated early-participant pool")
      ->capture_default_str();
  cmd->add_option("--early-slots", sp.early_slots, "Leading positions drawn from the early pool")
      ->capture_default_str();
}

es::SyntheticSpec make_spec(const SpecOptions& s) {
  es::SyntheticSpec spec = s.spec;
  spec.target_events = s.events;
  spec.sizes = s.size_dist == "fixed"     ? es::SizeDistribution::fixed
               : s.size_dist == "uniform" ? es::SizeDistribution::uniform
                                          : es::SizeDistribution::power_law;
  try {
    spec.validate();
  } catch (const es::ConfigError& e) {
    throw UsageError(e.what());
  }
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early-adopter influence scoring over timestamped cascades"};
  app.require_subcommand(1);

  InputOptions in;
  ScoringOptions sc;
  std::string output = "-";

  // score
  auto* score = app.add_subcommand("score", "Score every participant and rank by total");
  add_input_flags(score, in);
  add_scoring_flags(score, sc);
  std::string decompose_store;
  bool streaming = false;
  score->add_option("--output,-o", output, "Score CSV destination ('-' for stdout)");
  score->add_option("--decompose-store", decompose_store,
                    "Also write every contribution term to this CSV");
  score->add_flag("--streaming", streaming,
                  "One-pass scoring for input grouped by cascade id (bounded memory)");

  // decompose
  auto* decomp = app.add_subcommand("decompose", "List the cascades behind one participant's score");
  add_input_flags(decomp, in);
  add_scoring_flags(decomp, sc);
  std::string participant;
  std::size_t top_n = 10;
  bool profile = false;
  decomp->add_option("--participant", participant, "Participant id")->required();
  decomp->add_option("--top-n", top_n, "Number of terms to list")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  decomp->add_flag("--profile", profile, "Print per-factor summary instead of terms");
  decomp->add_option("--output,-o", output, "Destination ('-' for stdout)");

  // rolling
  auto* rolling = app.add_subcommand("rolling", "Top-k consistency over rolling windows");
  add_input_flags(rolling, in);
  add_scoring_flags(rolling, sc);
  std::size_t intervals = 20, window = 3, top_k = 20;
  std::string assign = "first";
  rolling->add_option("--intervals", intervals, "Number of evenly spaced intervals")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  rolling->add_option("--window", window, "Intervals per rolling window")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  rolling->add_option("--top-k", top_k, "Size of the compared top set")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  rolling->add_option("--assign", assign, "Cascade-to-interval rule")
      ->check(CLI::IsMember({"first", "split"}))
      ->capture_default_str();
  rolling->add_option("--output,-o", output, "Consistency CSV destination ('-' for stdout)");

  // network
  auto* network = app.add_subcommand("network", "Export the metric-weighted influence network");
  add_input_flags(network, in);
  add_scoring_flags(network, sc);
  std::string mode = "successor";
  std::optional<std::size_t> max_fanout;
  std::size_t guard_size = 10'000;
  bool allow_quadratic = false;
  network->add_option("--mode", mode, "Edge rule")
      ->check(CLI::IsMember({"successor", "downstream"}))
      ->capture_default_str();
  network->add_option("--max-fanout", max_fanout, "Cap targets per source (downstream mode)")
      ->check(CLI::PositiveNumber);
  network->add_option("--guard-size", guard_size,
                      "Largest cascade allowed in uncapped downstream mode")
      ->capture_default_str();
  network->add_flag("--allow-quadratic", allow_quadratic, "Lift the downstream-mode size guard");
  network->add_option("--output,-o", output, "Edge CSV destination ('-' for stdout)");

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic event set");
  SpecOptions spec_opts;
  add_spec_flags(gen, spec_opts);
  bool gen_header = false;
  gen->add_flag("--header", gen_header, "Write a header row");
  gen->add_option("--output,-o", output, "Event CSV destination ('-' for stdout)");

  // bench
  auto* bench = app.add_subcommand("bench", "Time the scoring pipeline on synthetic data");
  add_spec_flags(bench, spec_opts);
  add_scoring_flags(bench, sc);
  std::size_t repetitions = 7;
  std::string materialize = "memory";
  unsigned threads = 1;
  std::string bench_csv;
  bench->add_option("--repetitions", repetitions, "Timed runs (after one warm-up)")
      ->check(CLI::Range(std::size_t{3}, std::numeric_limits<std::size_t>::max()))
      ->capture_default_str();
  bench->add_option("--materialize", materialize, "Where the generated CSV lives")
      ->check(CLI::IsMember({"memory", "disk"}))
      ->capture_default_str();
  bench->add_option("--threads", threads, "Scoring threads (memory mode)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--csv", bench_csv, "Also write the report as CSV to this path");

  try {
    sc.alpha = default_alpha();
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*score) {
      const auto format = make_format(in, &sc);
      const auto config = make_config(sc);
      const auto build = make_build(in);
      const bool retain = !decompose_store.empty();
      es::ScoreTable table(retain);
      if (streaming) {
        es::ReadOptions ro;
        ro.mode = in.strict ? es::ParseMode::strict : es::ParseMode::lenient;
        std::unique_ptr<es::EventReader> reader =
            in.path == "-" ? std::make_unique<es::EventReader>(std::cin, format, ro, "<stdin>")
                           : std::make_unique<es::EventReader>(in.path, format, ro);
        table = es::score_stream(*reader, build, config, true, retain);
        if (reader->skipped())
          std::cerr << reader->source() << ": skipped " << reader->skipped()
                    << " malformed line(s)\n";
      } else {
        const auto events = load_events(in, format);
        const auto cascades = es::build_cascades(events, build);
        table = es::score_set(cascades, config, retain);
      }
      with_output(output, [&](std::ostream& os) { es::write_scores_csv(os, table); });
      if (retain) {
        with_output(decompose_store, [&](std::ostream& os) {
          bool header = true;
          for (const auto& r : table.ranked()) {
            es::write_terms_csv(os, table.terms_of(r.participant_id), header);
            header = false;
          }
          if (header) es::write_terms_csv(os, {}, true);
        });
      }
    } else if (*decomp) {
      const auto format = make_format(in, &sc);
      const auto config = make_config(sc);
      const auto events = load_events(in, format);
      const auto cascades = es::build_cascades(events, make_build(in));
      const auto table = es::score_set(cascades, config, true);
      if (!table.find(participant)) {
        std::cerr << "error: unknown participant '" << participant << "'\n";
        return kExitData;
      }
      if (profile) {
        const auto p = *es::term_profile(table, participant);
        with_output(output, [&](std::ostream& os) {
          os << "participant_id,participation_count,mean_p,median_p,mean_d,median_d,"
                "viewed_fraction,total_score\n";
          es::detail::write_field(os, participant, ',');
          os << ',' << p.participation_count << ',' << es::detail::fixed6(p.mean_p) << ','
             << es::detail::fixed6(p.median_p) << ',' << es::detail::fixed6(p.mean_d) << ','
             << es::detail::fixed6(p.median_d) << ',' << es::detail::fixed6(p.viewed_fraction)
             << ',' << es::detail::fixed6(p.total) << '\n';
        });
      } else {
        const auto terms = *es::decompose(table, participant, top_n);
        with_output(output, [&](std::ostream& os) { es::write_terms_csv(os, terms); });
      }
    } else if (*rolling) {
      if (window > intervals) {
        std::cerr << "error: --window (" << window << ") exceeds --intervals (" << intervals
                  << ")\n";
        return kExitUsage;
      }
      const auto format = make_format(in, &sc);
      const auto config = make_config(sc);
      const auto events = load_events(in, format);
      if (events.empty()) {
        std::cerr << "error: no events to partition\n";
        return kExitData;
      }
      const auto partition = es::partition_intervals(events, intervals);
      const auto cascades = es::build_cascades(events, make_build(in));
      const auto groups = es::group_by_interval(
          partition, cascades,
          assign == "split" ? es::AssignmentRule::split_by_interval
                            : es::AssignmentRule::first_event);
      const auto tables = es::rolling_scores(partition, groups, window, config);
      es::ConsistencySeries series;
      series.k = top_k;
      if (tables.size() >= 2)
        series = es::topk_consistency(tables, top_k, window - 1);
      else
        std::cerr << "note: a single window has nothing to compare against\n";
      if (auto n = series.clamped_count())
        std::cerr << "note: top-k clamped in " << n
                  << " comparison(s) where a window had fewer than " << top_k
                  << " participants\n";
      with_output(output, [&](std::ostream& os) { es::write_consistency_csv(os, series); });
    } else if (*network) {
      const auto format = make_format(in, &sc);
      const auto config = make_config(sc);
      const auto events = load_events(in, format);
      const auto cascades = es::build_cascades(events, make_build(in));
      es::NetworkOptions opts;
      opts.mode = mode == "downstream" ? es::EdgeMode::downstream : es::EdgeMode::successor;
      opts.max_fanout = max_fanout;
      opts.guard_size = guard_size;
      opts.allow_quadratic = allow_quadratic;
      const auto net = es::export_network(cascades, config, opts);
      if (net.truncated_sources)
        std::cerr << "note: max-fanout truncated targets for " << net.truncated_sources
                  << " (cascade, source) pair(s)\n";
      with_output(output, [&](std::ostream& os) { es::write_edges_csv(os, net); });
    } else if (*gen) {
      const auto spec = make_spec(spec_opts);
      es::CsvEventFormat csv;
      csv.header = gen_header;
      with_output(output, [&](std::ostream& os) {
        es::EventWriter writer(os, csv, output);
        es::SyntheticGenerator g(spec);
        std::vector<es::EventRecord> batch;
        while (g.next(batch)) {
          for (const auto& e : batch) writer.write(e);
          batch.clear();
        }
      });
    } else if (*bench) {
      const auto spec = make_spec(spec_opts);
      const auto config = make_config(sc);
      es::BenchOptions opts;
      opts.repetitions = repetitions;
      opts.threads = threads;
      opts.materialize =
          materialize == "disk" ? es::Materialization::disk : es::Materialization::memory;
      const auto report = es::run_bench(spec, config, opts);
      es::write_bench_text(std::cout, report);
      if (!bench_csv.empty())
        with_output(bench_csv, [&](std::ostream& os) { es::write_bench_csv(os, report); });
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const es::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const es::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const es::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
