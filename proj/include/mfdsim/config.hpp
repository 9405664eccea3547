#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfdsim/demand.hpp"
#include "mfdsim/equilibrium.hpp"
#include "mfdsim/network.hpp"
#include "mfdsim/simulation.hpp"
#include "mfdsim/transit.hpp"

namespace mfdsim {

struct NetworkSource {
  /// Directory with nodes.csv, links.csv, segments.csv (zones.csv optional).
  std::optional<std::filesystem::path> path;
  GridSpec grid;
};

enum class DemandShape { Uniform, TwoPeak };

struct DemandSource {
  std::optional<std::filesystem::path> file;
  std::size_t trips = 0;
  DemandShape shape = DemandShape::TwoPeak;
  std::array<double, kModeCount> mode_shares{};
  double shared_fraction = 0.3;
};

struct TransitConfig {
  /// Generate bus and rail lines on a grid network.
  bool grid_lines = true;
  double bus_headway_min = 10.0;
  int bus_stop_every = 2;
  double rail_headway_s = 300.0;
  int rail_station_every = 3;
  std::vector<BusLine> bus_lines;
  std::vector<RailLine> rail_lines;
};

struct FleetConfig {
  FleetKind kind = FleetKind::AMOD;
  int size = 0;
  int four_seaters = 0;
  int six_seaters = 0;
  /// Zone centroids when the list is empty.
  ControllerConfig controller;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double horizon_s = 86400.0;
  double stats_interval_s = 300.0;
  double dt_s = 5.0;
  std::array<bool, kModeCount> available{};
  double amod_pricing_factor = 1.0;
  std::vector<FleetConfig> fleets;
  LearningConfig learning;
  int days = 1;
  /// Re-choose modes with the logit model before the first day.
  bool initial_mode_choice = false;
  /// Re-choose modes between days.
  bool mode_shift = false;
  NetworkSource network;
  DemandSource demand;
  TransitConfig transit;
  FareSchedule fares;
  ChoiceParams choice;
  double carpool_share = 0.2;
};

/// Field-level validation; throws ConfigError naming the offending key.
ScenarioConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);
void validate_config(const ScenarioConfig& c);

/// Everything a run needs, with the network owned alongside the inputs.
struct Scenario {
  ScenarioConfig config;
  Network network;
  TripTable trips;
  std::vector<BusLine> bus_lines;
  std::vector<RailLine> rail_lines;

  ScenarioInputs inputs() const;
  DayToDayConfig day_to_day() const;
};

Scenario build_scenario(const ScenarioConfig& config);

}  // namespace mfdsim
