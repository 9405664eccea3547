#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfdsim {

/// Input outside an operation's domain (negative distance, empty subset, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// Invalid scenario configuration; `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Raised by the MFD fitter on degenerate samples.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken simulator invariant (e.g. an entity dispatched without a path).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mfdsim
