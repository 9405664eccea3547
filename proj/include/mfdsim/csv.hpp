#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mfdsim::csv {

/// Splits one line on commas. Quoting is not supported; none of our formats
/// need it.
std::vector<std::string> split(std::string_view line, char sep = ',');

std::optional<double> to_double(std::string_view field);
std::optional<std::int64_t> to_int(std::string_view field);

/// Shortest round-trip representation, independent of the global locale.
std::string fmt(double value);
std::string fmt(std::int64_t value);

/// Line-oriented reader that tracks 1-based line numbers and validates the
/// header against an expected column list.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  /// Throws ParseError unless the first line equals `expected` exactly.
  void expect_header(const std::vector<std::string>& expected);
  /// Reads the next non-empty row; returns false at end of file.
  bool next(std::vector<std::string>& fields);
  std::size_t line() const { return line_; }
  const std::string& name() const { return name_; }

 private:
  std::ifstream in_;
  std::string name_;
  std::size_t line_ = 0;
};

/// Writes comma-separated rows with '\n' line endings.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);
  void row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
};

}  // namespace mfdsim::csv
