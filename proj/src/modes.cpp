#include "mfdsim/modes.hpp"

namespace mfdsim {

namespace {
constexpr std::array<std::string_view, kModeCount> kNames = {
    "Car", "Taxi", "MOD", "MOD_OP", "AMOD", "AMOD_OP",
    "Bus", "Bus_OP", "Rail", "Rail_OP", "Other", "Freight",
};
}  // namespace

std::string_view mode_name(TravelMode m) { return kNames[mode_index(m)]; }

std::optional<TravelMode> parse_mode(std::string_view name) {
  for (std::size_t i = 0; i < kModeCount; ++i) {
    if (kNames[i] == name) return kAllModes[i];
  }
  if (name == "Carpool" || name == "Car/Carpool") return TravelMode::Car;
  return std::nullopt;
}

}  // namespace mfdsim
