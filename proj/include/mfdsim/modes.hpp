#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace mfdsim {

/// Travel modes of the vehicle/passenger classification. The `_OP` variants
/// are operational movements (empty fleet legs, bus and train runs).
enum class TravelMode : std::uint8_t {
  Car,  // Car/Carpool
  Taxi,
  MOD,
  MOD_OP,
  AMOD,
  AMOD_OP,
  Bus,
  Bus_OP,
  Rail,
  Rail_OP,
  Other,
  Freight,
};

inline constexpr std::size_t kModeCount = 12;

inline constexpr std::array<TravelMode, kModeCount> kAllModes = {
    TravelMode::Car,     TravelMode::Taxi,    TravelMode::MOD,    TravelMode::MOD_OP,
    TravelMode::AMOD,    TravelMode::AMOD_OP, TravelMode::Bus,    TravelMode::Bus_OP,
    TravelMode::Rail,    TravelMode::Rail_OP, TravelMode::Other,  TravelMode::Freight,
};

struct ModeFlags {
  bool contributes_vehicle_flow;
  bool contributes_passenger_flow;
  bool road_based;
};

/// Vehicle/passenger flow membership of each mode.
/// `road_based` marks modes whose movement happens on the road network
/// (Bus passengers ride road vehicles; Rail, Rail_OP and walking do not).
constexpr ModeFlags mode_flags(TravelMode m) {
  switch (m) {
    case TravelMode::Car: return {true, true, true};
    case TravelMode::Taxi: return {true, true, true};
    case TravelMode::MOD: return {true, true, true};
    case TravelMode::MOD_OP: return {true, false, true};
    case TravelMode::AMOD: return {true, true, true};
    case TravelMode::AMOD_OP: return {true, false, true};
    case TravelMode::Bus: return {false, true, true};
    case TravelMode::Bus_OP: return {true, false, true};
    case TravelMode::Rail: return {false, true, false};
    case TravelMode::Rail_OP: return {false, false, false};
    case TravelMode::Other: return {false, true, false};
    case TravelMode::Freight: return {true, false, true};
  }
  return {false, false, false};
}

constexpr std::size_t mode_index(TravelMode m) { return static_cast<std::size_t>(m); }

std::string_view mode_name(TravelMode m);
std::optional<TravelMode> parse_mode(std::string_view name);

/// Modes a traveller can choose in the mode-choice step.
inline constexpr std::array<TravelMode, 7> kPersonModes = {
    TravelMode::AMOD, TravelMode::Car, TravelMode::Taxi, TravelMode::MOD,
    TravelMode::Bus,  TravelMode::Rail, TravelMode::Other,
};

}  // namespace mfdsim
