#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include "mfdsim/modes.hpp"
#include "mfdsim/network.hpp"

namespace mfdsim {

struct SkimEntry {
  double ivt_min = std::numeric_limits<double>::quiet_NaN();
  double wait_min = 0.0;
  double distance_km = 0.0;

  bool valid() const { return !std::isnan(ivt_min); }
};

/// Zone-to-zone level-of-service per mode and period.
class SkimMatrix {
 public:
  SkimMatrix() = default;
  SkimMatrix(std::vector<ZoneId> zones, std::size_t periods, double period_s);

  const std::vector<ZoneId>& zones() const { return zones_; }
  std::size_t periods() const { return periods_; }
  double period_s() const { return period_s_; }
  std::size_t period_of(double t_s) const;

  SkimEntry& at(ZoneId origin, ZoneId dest, TravelMode mode, std::size_t period);
  /// Null when the entry is missing or the zones are unknown.
  const SkimEntry* find(ZoneId origin, ZoneId dest, TravelMode mode, std::size_t period) const;

  void write_csv(const std::filesystem::path& path, int day) const;
  bool operator==(const SkimMatrix& other) const;

 private:
  std::size_t slot(std::size_t o, std::size_t d, TravelMode m, std::size_t p) const {
    return ((o * zones_.size() + d) * kModeCount + mode_index(m)) * periods_ + p;
  }
  std::ptrdiff_t zone_pos(ZoneId id) const;

  std::vector<ZoneId> zones_;
  std::size_t periods_ = 1;
  double period_s_ = 3600.0;
  std::vector<SkimEntry> entries_;
};

}  // namespace mfdsim
