#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "cascade.hpp"
#include "error.hpp"

namespace earlyscore {

// Delimited text with a configurable column mapping. Quoting follows
// RFC 4180: fields may be wrapped in double quotes, a doubled quote is a
// literal quote, and quoted fields may span lines.
struct CsvEventFormat {
  char delimiter = ',';
  bool header = false;
  std::size_t cascade_column = 0;
  std::size_t participant_column = 1;
  std::size_t timestamp_column = 2;
  std::optional<std::size_t> viewed_column;

  void validate() const {
    if (cascade_column == participant_column || cascade_column == timestamp_column ||
        participant_column == timestamp_column)
      throw ConfigError("cascade, participant and timestamp columns must be distinct");
    if (viewed_column && (*viewed_column == cascade_column ||
                          *viewed_column == participant_column ||
                          *viewed_column == timestamp_column))
      throw ConfigError("viewed column overlaps a mandatory column");
    if (delimiter == '"' || delimiter == '\n' || delimiter == '\r')
      throw ConfigError("invalid delimiter");
  }

  std::size_t min_fields() const {
    auto m = std::max({cascade_column, participant_column, timestamp_column});
    if (viewed_column) m = std::max(m, *viewed_column);
    return m + 1;
  }
};

// `cluster_id <TAB> timestamp <TAB> site_id`, no quoting, no header.
struct ClusterTsvFormat {};

using EventFormat = std::variant<CsvEventFormat, ClusterTsvFormat>;

enum class ParseMode { strict, lenient };

struct ReadOptions {
  ParseMode mode = ParseMode::strict;
  // Receives one diagnostic per skipped line in lenient mode. Defaults to
  // printing on standard error.
  std::function<void(const DataError&)> on_skip;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_timestamp(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

// Empty field means "absent"; anything outside {0,1,true,false} is invalid.
inline std::optional<std::optional<bool>> parse_viewed(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::optional<bool>{};
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "1" || lower == "true") return std::optional<bool>{true};
  if (lower == "0" || lower == "false") return std::optional<bool>{false};
  return std::nullopt;
}

inline std::string format_timestamp(double t) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, t);
  return std::string(buf, ptr);
}

inline bool needs_quotes(std::string_view s, char delimiter) {
  return s.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos;
}

inline void write_field(std::ostream& os, std::string_view s, char delimiter) {
  if (!needs_quotes(s, delimiter)) {
    os << s;
    return;
  }
  os << '"';
  for (char c : s) {
    if (c == '"') os << '"';
    os << c;
  }
  os << '"';
}

}  // namespace detail

// Pull-style reader. Holds one record's worth of text at a time, so memory
// does not grow with the file.
class EventReader {
 public:
  EventReader(const std::filesystem::path& path, EventFormat format, ReadOptions options = {})
      : owned_(std::make_unique<std::ifstream>(path, std::ios::binary)),
        in_(owned_.get()),
        source_(path.string()),
        format_(std::move(format)),
        options_(std::move(options)) {
    if (!*owned_) throw IoError(source_, "cannot open for reading");
    init();
  }

  // Reads from a caller-owned stream, which must outlive the reader.
  EventReader(std::istream& in, EventFormat format, ReadOptions options = {},
              std::string source_name = "<stream>")
      : in_(&in), source_(std::move(source_name)), format_(std::move(format)),
        options_(std::move(options)) {
    init();
  }

  // Next well-formed record, or nullopt at end of input.
  std::optional<EventRecord> next() {
    EventRecord rec;
    while (read_record()) {
      if (fields_.size() == 1 && fields_[0].empty() && !unterminated_) continue;  // blank line
      if (skip_header_) {
        skip_header_ = false;
        continue;
      }
      if (std::optional<std::string> why = decode(rec)) {
        if (options_.mode == ParseMode::strict) throw DataError(*why + " in " + source_, record_line_);
        DataError err(*why, record_line_);
        ++skipped_;
        if (options_.on_skip)
          options_.on_skip(err);
        else
          std::cerr << source_ << ": " << err.what() << " (skipped)\n";
        continue;
      }
      ++records_;
      return rec;
    }
    return std::nullopt;
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    while (auto rec = next()) fn(std::move(*rec));
  }

  std::size_t records() const noexcept { return records_; }
  std::size_t skipped() const noexcept { return skipped_; }
  const std::string& source() const noexcept { return source_; }

 private:
  void init() {
    if (auto* csv = std::get_if<CsvEventFormat>(&format_)) {
      csv->validate();
      skip_header_ = csv->header;
    }
  }

  bool getline(std::string& out) {
    if (!std::getline(*in_, out)) {
      if (in_->bad()) throw IoError(source_, "read failure");
      return false;
    }
    ++line_;
    return true;
  }

  // Splits the next record into fields_. Returns false at end of input.
  bool read_record() {
    fields_.clear();
    if (!getline(buf_)) return false;
    record_line_ = line_;
    if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();

    if (std::holds_alternative<ClusterTsvFormat>(format_)) {
      std::string_view rest(buf_);
      for (;;) {
        auto tab = rest.find('\t');
        fields_.emplace_back(rest.substr(0, tab));
        if (tab == std::string_view::npos) break;
        rest.remove_prefix(tab + 1);
      }
      return true;
    }

    const char delim = std::get<CsvEventFormat>(format_).delimiter;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    std::size_t i = 0;
    for (;;) {
      if (i == buf_.size()) {
        if (quoted) {
          // Quoted field continues on the next physical line.
          if (!getline(buf_)) {
            unterminated_ = true;
            fields_.push_back(std::move(field));
            return true;
          }
          if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();
          field.push_back('\n');
          i = 0;
          continue;
        }
        fields_.push_back(std::move(field));
        return true;
      }
      const char c = buf_[i++];
      if (quoted) {
        if (c == '"') {
          if (i < buf_.size() && buf_[i] == '"') {
            field.push_back('"');
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field.push_back(c);
        }
      } else if (c == delim) {
        fields_.push_back(std::move(field));
        field.clear();
        was_quoted = false;
      } else if (c == '"' && field.empty() && !was_quoted) {
        quoted = was_quoted = true;
      } else {
        field.push_back(c);
      }
    }
  }

  // Fills `rec` from fields_; returns a reason string when malformed.
  std::optional<std::string> decode(EventRecord& rec) {
    if (unterminated_) {
      unterminated_ = false;
      return "unterminated quoted field";
    }
    std::size_t cc, pc, tc;
    std::optional<std::size_t> vc;
    std::size_t need;
    if (const auto* csv = std::get_if<CsvEventFormat>(&format_)) {
      cc = csv->cascade_column;
      pc = csv->participant_column;
      tc = csv->timestamp_column;
      vc = csv->viewed_column;
      need = csv->min_fields();
      if (fields_.size() < need)
        return "expected at least " + std::to_string(need) + " fields, got " +
               std::to_string(fields_.size());
    } else {
      cc = 0;
      tc = 1;
      pc = 2;
      if (fields_.size() != 3)
        return "expected exactly 3 tab-separated fields, got " + std::to_string(fields_.size());
    }
    if (fields_[cc].empty()) return "empty cascade id";
    if (fields_[pc].empty()) return "empty participant id";
    auto t = detail::parse_timestamp(fields_[tc]);
    if (!t) return "invalid timestamp '" + fields_[tc] + "'";
    rec.viewed.reset();
    if (vc) {
      auto v = detail::parse_viewed(fields_[*vc]);
      if (!v) return "invalid viewed flag '" + fields_[*vc] + "' (expected 0, 1, true or false)";
      rec.viewed = *v;
    }
    rec.cascade_id = fields_[cc];
    rec.participant_id = fields_[pc];
    rec.timestamp = *t;
    return std::nullopt;
  }

  std::unique_ptr<std::ifstream> owned_;
  std::istream* in_;
  std::string source_;
  EventFormat format_;
  ReadOptions options_;
  std::string buf_;
  std::vector<std::string> fields_;
  bool skip_header_ = false;
  bool unterminated_ = false;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
  std::size_t records_ = 0;
  std::size_t skipped_ = 0;
};

inline std::vector<EventRecord> read_events(const std::filesystem::path& path,
                                            const EventFormat& format,
                                            ReadOptions options = {}) {
  EventReader reader(path, format, std::move(options));
  std::vector<EventRecord> out;
  reader.for_each([&](EventRecord&& r) { out.push_back(std::move(r)); });
  return out;
}

class EventWriter {
 public:
  EventWriter(const std::filesystem::path& path, CsvEventFormat format)
      : owned_(std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc)),
        out_(owned_.get()),
        dest_(path.string()),
        format_(format) {
    if (!*owned_) throw IoError(dest_, "cannot open for writing");
    init();
  }

  EventWriter(std::ostream& out, CsvEventFormat format, std::string dest_name = "<stream>")
      : out_(&out), dest_(std::move(dest_name)), format_(format) {
    init();
  }

  void write(const EventRecord& e) {
    for (std::size_t col = 0; col < width_; ++col) {
      if (col) *out_ << format_.delimiter;
      if (col == format_.cascade_column)
        detail::write_field(*out_, e.cascade_id, format_.delimiter);
      else if (col == format_.participant_column)
        detail::write_field(*out_, e.participant_id, format_.delimiter);
      else if (col == format_.timestamp_column)
        *out_ << detail::format_timestamp(e.timestamp);
      else if (format_.viewed_column && col == *format_.viewed_column && e.viewed)
        *out_ << (*e.viewed ? '1' : '0');
    }
    *out_ << '\n';
    check();
  }

  void close() {
    out_->flush();
    check();
    if (owned_) owned_->close();
  }

 private:
  void init() {
    format_.validate();
    width_ = format_.min_fields();
    if (format_.header) {
      for (std::size_t col = 0; col < width_; ++col) {
        if (col) *out_ << format_.delimiter;
        if (col == format_.cascade_column)
          *out_ << "cascade_id";
        else if (col == format_.participant_column)
          *out_ << "participant_id";
        else if (col == format_.timestamp_column)
          *out_ << "timestamp";
        else if (format_.viewed_column && col == *format_.viewed_column)
          *out_ << "viewed";
      }
      *out_ << '\n';
    }
    check();
  }

  void check() {
    if (!*out_) throw IoError(dest_, "write failure");
  }

  std::unique_ptr<std::ofstream> owned_;
  std::ostream* out_;
  std::string dest_;
  CsvEventFormat format_;
  std::size_t width_ = 0;
};

template <typename Range>
void write_events(const std::filesystem::path& path, const Range& events,
                  const CsvEventFormat& format = {}) {
  EventWriter writer(path, format);
  for (const auto& e : events) writer.write(e);
  writer.close();
}

}  // namespace earlyscore
