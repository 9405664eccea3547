#include "mfdsim/skims.hpp"

#include <algorithm>

#include "mfdsim/csv.hpp"
#include "mfdsim/errors.hpp"

namespace mfdsim {

SkimMatrix::SkimMatrix(std::vector<ZoneId> zones, std::size_t periods, double period_s)
    : zones_(std::move(zones)), periods_(periods), period_s_(period_s) {
  if (periods_ == 0 || !(period_s_ > 0.0)) throw DomainError("skim periods must be positive");
  std::sort(zones_.begin(), zones_.end());
  zones_.erase(std::unique(zones_.begin(), zones_.end()), zones_.end());
  entries_.resize(zones_.size() * zones_.size() * kModeCount * periods_);
}

std::size_t SkimMatrix::period_of(double t_s) const {
  if (t_s <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(t_s / period_s_), periods_ - 1);
}

std::ptrdiff_t SkimMatrix::zone_pos(ZoneId id) const {
  auto it = std::lower_bound(zones_.begin(), zones_.end(), id);
  if (it == zones_.end() || *it != id) return -1;
  return it - zones_.begin();
}

SkimEntry& SkimMatrix::at(ZoneId origin, ZoneId dest, TravelMode mode, std::size_t period) {
  const auto o = zone_pos(origin);
  const auto d = zone_pos(dest);
  if (o < 0 || d < 0 || period >= periods_) throw DomainError("skim index out of range");
  return entries_[slot(o, d, mode, period)];
}

const SkimEntry* SkimMatrix::find(ZoneId origin, ZoneId dest, TravelMode mode, std::size_t period) const {
  const auto o = zone_pos(origin);
  const auto d = zone_pos(dest);
  if (o < 0 || d < 0 || period >= periods_) return nullptr;
  const auto& e = entries_[slot(o, d, mode, period)];
  return e.valid() ? &e : nullptr;
}

void SkimMatrix::write_csv(const std::filesystem::path& path, int day) const {
  csv::Writer w(path);
  w.row({"day", "origin_zone", "dest_zone", "mode", "period", "ivt_min", "wait_min", "distance_km"});
  for (std::size_t o = 0; o < zones_.size(); ++o)
    for (std::size_t d = 0; d < zones_.size(); ++d)
      for (auto m : kAllModes)
        for (std::size_t p = 0; p < periods_; ++p) {
          const auto& e = entries_[slot(o, d, m, p)];
          if (!e.valid()) continue;
          w.row({csv::fmt(std::int64_t{day}), csv::fmt(zones_[o]), csv::fmt(zones_[d]), std::string(mode_name(m)),
                 csv::fmt(static_cast<std::int64_t>(p)), csv::fmt(e.ivt_min), csv::fmt(e.wait_min),
                 csv::fmt(e.distance_km)});
        }
}

bool SkimMatrix::operator==(const SkimMatrix& other) const {
  if (zones_ != other.zones_ || periods_ != other.periods_ || period_s_ != other.period_s_) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.valid() != b.valid()) return false;
    if (a.valid() && (a.ivt_min != b.ivt_min || a.wait_min != b.wait_min || a.distance_km != b.distance_km))
      return false;
  }
  return true;
}

}  // namespace mfdsim
