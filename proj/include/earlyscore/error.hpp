#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace earlyscore {

// Base for every error the library throws on bad input or environment.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or invalid data (bad line, non-finite timestamp, unknown id).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  // 1-based line or record number, 0 when not tied to one.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Invalid configuration value (alpha <= 0, window > intervals, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A decomposition query was made against a table that did not retain terms.
class DecompositionDisabled : public Error {
 public:
  DecompositionDisabled()
      : Error("term retention was not enabled when this score table was built") {}
};

}  // namespace earlyscore
