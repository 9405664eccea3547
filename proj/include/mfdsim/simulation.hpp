#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfdsim/demand.hpp"
#include "mfdsim/fleet.hpp"
#include "mfdsim/modes.hpp"
#include "mfdsim/network.hpp"
#include "mfdsim/routing.hpp"
#include "mfdsim/supply.hpp"
#include "mfdsim/transit.hpp"

namespace mfdsim {

enum class EntityKind : std::uint8_t { Passenger, Vehicle };

std::string_view entity_kind_name(EntityKind k);
std::optional<EntityKind> parse_entity_kind(std::string_view s);

enum class LegStatus : std::uint8_t {
  Driving,
  Walk,
  Wait,
  InVehicle,
  InService,  // bus and train runs
  IdleCruising,
  DriveToPickup,
  DriveWithPassenger,
  DriveToPark,
};

std::string_view leg_status_name(LegStatus s);
std::optional<LegStatus> parse_leg_status(std::string_view s);
LegStatus leg_status_of(FleetStatus s);
std::optional<FleetStatus> fleet_status_of(LegStatus s);

struct TrajectoryLeg {
  NodeId origin = 0;
  NodeId destination = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  double distance_km = 0.0;
  /// Free-flow duration of the same movement (equals the duration for
  /// walking and waiting).
  double free_flow_s = 0.0;
  TravelMode mode = TravelMode::Car;
  LegStatus status = LegStatus::Driving;

  bool operator==(const TrajectoryLeg&) const = default;
};

struct TrajectoryRecord {
  std::int64_t entity_id = 0;
  EntityKind kind = EntityKind::Vehicle;
  TravelMode mode = TravelMode::Car;
  std::int64_t trip_index = -1;
  bool completed = false;
  /// Length of the routed path for direct car-type trips, else negative.
  double routed_length_m = -1.0;
  std::vector<TrajectoryLeg> legs;

  double start_s() const { return legs.empty() ? 0.0 : legs.front().start_s; }
  double end_s() const { return legs.empty() ? 0.0 : legs.back().end_s; }
  double distance_km() const;
  /// Time spent in vehicles and its free-flow counterpart.
  double in_vehicle_s() const;
  double in_vehicle_free_flow_s() const;

  bool operator==(const TrajectoryRecord&) const = default;
};

struct UnservedTrip {
  std::int64_t trip_index = 0;
  std::int64_t person_id = 0;
  TravelMode mode = TravelMode::Car;
  double time_s = 0.0;
  std::string reason;

  bool operator==(const UnservedTrip&) const = default;
};

/// Vehicle entity bookkeeping at one instant.
struct ConservationSample {
  double time_s = 0.0;
  std::size_t on_road = 0;
  std::size_t buffered = 0;
  std::size_t off_road = 0;  // parked fleet vehicles and dwelling buses
  std::size_t completed = 0;
  std::size_t not_departed = 0;
  std::size_t rejected = 0;  // private trips without a route
  std::size_t total = 0;

  bool holds() const { return on_road + buffered + off_road + completed + not_departed + rejected == total; }
};

struct FleetSpec {
  FleetKind kind = FleetKind::AMOD;
  int four_seaters = 0;
  int six_seaters = 0;
  ControllerConfig controller;

  int size() const { return four_seaters + six_seaters; }
};

struct SimConfig {
  double dt_s = 5.0;
  double stats_interval_s = 300.0;
  double horizon_s = 86400.0;
  double walk_speed_kmh = 5.0;
  /// Share of Car trips driven as carpools (occupancy 2 or 3).
  double carpool_share = 0.2;
  std::uint64_t seed = 1;
};

struct ScenarioInputs {
  const Network* network = nullptr;
  TripTable trips;
  std::vector<BusLine> bus_lines;
  std::vector<RailLine> rail_lines;
  std::vector<FleetSpec> fleets;
  SimConfig config;
  /// Routing table; free-flow times over the horizon when empty.
  TravelTimeTable routing;
};

struct SimOutput {
  std::vector<TrajectoryRecord> trajectories;
  SegmentStateSeries segments;
  std::vector<ControllerEvent> events;
  std::vector<UnservedTrip> unserved;
  std::vector<ConservationSample> conservation;
  /// Experienced segment travel times on the routing table's periods.
  TravelTimeTable observed;
  double max_displacement_excess_m = 0.0;
  std::size_t boarded_passengers = 0;
  std::size_t trip_count = 0;
  double horizon_s = 86400.0;
  std::vector<FleetSpec> fleets;
};

/// Runs one day. Throws ConfigError for invalid settings and InternalError
/// when vehicle conservation breaks.
SimOutput run_scenario(const ScenarioInputs& inputs);

/// Legs of one fleet's vehicles, summarized for fleet_kpis.
std::vector<FleetLegSummary> fleet_leg_summaries(const SimOutput& out, FleetKind kind);

void validate_sim_config(const SimConfig& config);

}  // namespace mfdsim
