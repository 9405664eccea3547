#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "mfdsim/demand.hpp"
#include "mfdsim/network.hpp"

namespace mfdsim {

using RequestId = std::int64_t;
using VehicleId = std::int64_t;

enum class RequestStatus : std::uint8_t { Pending, Assigned, PickedUp, Completed, Expired };

struct ServiceRequest {
  RequestId id = 0;
  std::int64_t passenger_id = 0;
  double request_time_s = 0.0;
  ServiceType service = ServiceType::Single;
  NodeId pickup = 0;
  NodeId dropoff = 0;
  RequestStatus status = RequestStatus::Pending;
  double direct_time_s = 0.0;  // filled by the controller
};

enum class FleetKind : std::uint8_t { MOD, AMOD };

enum class FleetStatus : std::uint8_t {
  IdleParked,
  IdleCruising,
  DriveToPickup,
  DriveWithPassenger,
  DriveToPark,
};

std::string_view fleet_status_name(FleetStatus s);

enum class StopKind : std::uint8_t { Pickup, Dropoff };

struct ScheduleStop {
  RequestId request = 0;
  StopKind kind = StopKind::Pickup;
  NodeId node = 0;

  bool operator==(const ScheduleStop&) const = default;
};

using Schedule = std::vector<ScheduleStop>;

struct OnboardPassenger {
  RequestId request = 0;
  double picked_up_s = 0.0;
  double direct_time_s = 0.0;
};

struct FleetVehicle {
  VehicleId id = 0;
  int seats = 4;
  FleetKind kind = FleetKind::AMOD;
  /// Node where the vehicle is, or the next node it will reach when driving.
  NodeId location = 0;
  /// Seconds until the vehicle reaches `location` (0 when standing there).
  double eta_s = 0.0;
  FleetStatus status = FleetStatus::IdleParked;
  Schedule schedule;
  std::vector<OnboardPassenger> onboard;
  /// True while a single (non-shared) ride is assigned or onboard.
  bool exclusive = false;
};

enum class RebalancePolicy : std::uint8_t { CruiseHotspot, NearestParking };

struct ControllerConfig {
  double batch_interval_s = 30.0;
  double max_wait_min = 6.0;
  double max_detour_min = 10.0;
  RebalancePolicy policy = RebalancePolicy::NearestParking;
  std::vector<NodeId> parking;
  /// Zones ordered by demand, highest first.
  std::vector<ZoneId> hotspot_ranking;
  std::size_t hotspot_top_k = 3;

  double max_wait_s() const { return max_wait_min * 60.0; }
  double max_detour_s() const { return max_detour_min * 60.0; }
};

/// Node-to-node travel time in seconds (+inf when unreachable).
using TravelTimeOracle = std::function<double(NodeId, NodeId)>;

/// Candidate schedule for one vehicle after adding a request.
struct Insertion {
  Schedule schedule;
  double pickup_time_s = 0.0;  // absolute predicted pickup time
  double added_time_s = 0.0;   // increase of the schedule completion time
  std::size_t pickup_pos = 0;
  std::size_t dropoff_pos = 0;
};

/// Arrival time at every stop of `schedule` for a vehicle that reaches its
/// location at now + eta. Returns nullopt when a leg is unreachable.
std::optional<std::vector<double>> schedule_times(const FleetVehicle& vehicle, const Schedule& schedule,
                                                  const TravelTimeOracle& oracle, double now_s);

/// Checks waiting, detour and seat constraints of a candidate schedule.
/// `requests` resolves request ids referenced by the schedule. The waiting
/// constraint is applied to `new_request` only.
bool schedule_feasible(const FleetVehicle& vehicle, const Schedule& schedule,
                       const std::vector<double>& arrival_times,
                       const std::function<const ServiceRequest&(RequestId)>& requests,
                       const ServiceRequest& new_request, const ControllerConfig& config);

/// Minimum-added-time insertion of a shared request's pickup and dropoff
/// into the vehicle's schedule, preserving pickup-before-dropoff. Ties go to
/// the earliest (pickup, dropoff) positions.
std::optional<Insertion> insert_shared(const FleetVehicle& vehicle, const ServiceRequest& request,
                                       const std::function<const ServiceRequest&(RequestId)>& requests,
                                       const TravelTimeOracle& oracle, const ControllerConfig& config,
                                       double now_s);

/// Single ride: only an empty vehicle qualifies; schedule = [pickup, dropoff].
std::optional<Insertion> insert_single(const FleetVehicle& vehicle, const ServiceRequest& request,
                                       const TravelTimeOracle& oracle, const ControllerConfig& config,
                                       double now_s);

struct Assignment {
  RequestId request = 0;
  VehicleId vehicle = 0;
  Insertion insertion;
};

struct BatchResult {
  std::vector<Assignment> assignments;
  std::vector<RequestId> expired;
};

/// One batch of greedy nearest-feasible matching. Requests that waited longer
/// than max_wait expire first. Then, repeatedly, the feasible (request,
/// vehicle) pair with the earliest predicted pickup is committed; ties go to
/// the lower vehicle id, then the lower request id. A vehicle receives at most
/// one new request per batch. `pending` and `vehicles` are updated in place.
BatchResult assign_batch(std::vector<ServiceRequest>& pending, std::vector<FleetVehicle>& vehicles,
                         const std::function<const ServiceRequest&(RequestId)>& requests,
                         const TravelTimeOracle& oracle, const ControllerConfig& config, double now_s);

struct MovementOrder {
  VehicleId vehicle = 0;
  NodeId target = 0;
  FleetStatus status = FleetStatus::DriveToPark;
};

/// Directions for idle vehicles. `distance` ranks candidate targets (metres
/// or seconds). Throws ConfigError for nearest_parking with no parking nodes.
std::vector<MovementOrder> rebalance_idle(const std::vector<FleetVehicle>& idle, const ControllerConfig& config,
                                          const Network& network, const TravelTimeOracle& distance);

enum class ControllerEventType : std::uint8_t { Request, Assign, Pickup, Dropoff, Expire, Rebalance };

std::string_view event_name(ControllerEventType t);
std::optional<ControllerEventType> parse_event(std::string_view name);

struct ControllerEvent {
  double time_s = 0.0;
  ControllerEventType type = ControllerEventType::Request;
  RequestId request = -1;
  VehicleId vehicle = -1;
  NodeId node = -1;
  FleetKind fleet = FleetKind::AMOD;

  bool operator==(const ControllerEvent&) const = default;
};

/// Stateful controller: the request pool, the fleet and the event log.
class FleetController {
 public:
  FleetController(FleetKind kind, ControllerConfig config, std::vector<FleetVehicle> fleet);

  /// Adds a request to the pending pool. Returns false (pool unchanged) for
  /// a duplicate id; throws DomainError when pickup equals dropoff.
  bool submit_request(ServiceRequest request, const TravelTimeOracle& oracle);

  BatchResult run_batch(double now_s, const TravelTimeOracle& oracle);

  void record(ControllerEvent event) {
    event.fleet = kind_;
    events_.push_back(event);
  }

  FleetKind kind() const { return kind_; }
  const ControllerConfig& config() const { return config_; }
  std::vector<FleetVehicle>& vehicles() { return fleet_; }
  const std::vector<FleetVehicle>& vehicles() const { return fleet_; }
  FleetVehicle& vehicle(VehicleId id);
  const std::vector<ServiceRequest>& pending() const { return pending_; }
  ServiceRequest& request(RequestId id);
  const ServiceRequest& request(RequestId id) const;
  bool has_request(RequestId id) const;
  const std::vector<ControllerEvent>& events() const { return events_; }

 private:
  FleetKind kind_;
  ControllerConfig config_;
  std::vector<FleetVehicle> fleet_;
  std::vector<ServiceRequest> pending_;
  std::vector<ServiceRequest> known_;  // every submitted request, sorted by id
  std::vector<ControllerEvent> events_;
};

struct FleetKpis {
  std::vector<double> waits_min;
  double mean_wait_min = 0.0;
  double service_rate = 0.0;
  double empty_vkt_share = 0.0;
  double fleet_vkt_km = 0.0;
  double utilization = 0.0;
  std::size_t requests = 0;
  std::size_t served = 0;
  std::size_t expired = 0;
};

/// Fleet VKT split by status, as consumed by fleet_kpis.
struct FleetLegSummary {
  FleetStatus status = FleetStatus::DriveToPickup;
  double distance_km = 0.0;
  double duration_s = 0.0;
};

FleetKpis fleet_kpis(const std::vector<ControllerEvent>& events, const std::vector<FleetLegSummary>& legs,
                     std::size_t fleet_size, double horizon_s);

}  // namespace mfdsim
