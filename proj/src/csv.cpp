#include "mfdsim/csv.hpp"

#include <charconv>
#include <system_error>

#include "mfdsim/errors.hpp"

namespace mfdsim::csv {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == ' ' || f.back() == '\r' || f.back() == '\t')) f.pop_back();
    std::size_t i = 0;
    while (i < f.size() && (f[i] == ' ' || f[i] == '\t')) ++i;
    f.erase(0, i);
  }
  return out;
}

std::optional<double> to_double(std::string_view field) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> to_int(std::string_view field) {
  std::int64_t v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) return std::nullopt;
  return v;
}

std::string fmt(double value) {
  char buf[64];
  if (value == 0.0) value = 0.0;  // drop negative zero
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string fmt(std::int64_t value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

Reader::Reader(const std::filesystem::path& path) : in_(path), name_(path.string()) {
  if (!in_) throw ParseError(name_, 0, "cannot open file");
}

void Reader::expect_header(const std::vector<std::string>& expected) {
  std::string text;
  if (!std::getline(in_, text)) throw ParseError(name_, 1, "missing header");
  ++line_;
  if (split(text) != expected) {
    std::string want;
    for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
    throw ParseError(name_, line_, "unexpected header, want '" + want + "'");
  }
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    fields = split(text);
    return true;
  }
  return false;
}

Writer::Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
  if (!out_) throw std::runtime_error("cannot write " + path.string());
}

void Writer::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
}

}  // namespace mfdsim::csv
