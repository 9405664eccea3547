#include "mfdsim/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "mfdsim/errors.hpp"
#include "mfdsim/rng.hpp"

namespace mfdsim {

std::string_view entity_kind_name(EntityKind k) { return k == EntityKind::Passenger ? "passenger" : "vehicle"; }

std::optional<EntityKind> parse_entity_kind(std::string_view s) {
  if (s == "passenger") return EntityKind::Passenger;
  if (s == "vehicle") return EntityKind::Vehicle;
  return std::nullopt;
}

namespace {
constexpr std::array<std::pair<LegStatus, std::string_view>, 9> kLegStatusNames{{
    {LegStatus::Driving, "DRIVING"},
    {LegStatus::Walk, "WALK"},
    {LegStatus::Wait, "WAIT"},
    {LegStatus::InVehicle, "IN_VEHICLE"},
    {LegStatus::InService, "IN_SERVICE"},
    {LegStatus::IdleCruising, "IDLE_CRUISING"},
    {LegStatus::DriveToPickup, "DRIVE_TO_PICKUP"},
    {LegStatus::DriveWithPassenger, "DRIVE_WITH_PASSENGER"},
    {LegStatus::DriveToPark, "DRIVE_TO_PARK"},
}};
}  // namespace

std::string_view leg_status_name(LegStatus s) {
  for (const auto& [k, n] : kLegStatusNames)
    if (k == s) return n;
  return "UNKNOWN";
}

std::optional<LegStatus> parse_leg_status(std::string_view s) {
  for (const auto& [k, n] : kLegStatusNames)
    if (n == s) return k;
  return std::nullopt;
}

LegStatus leg_status_of(FleetStatus s) {
  switch (s) {
    case FleetStatus::IdleCruising: return LegStatus::IdleCruising;
    case FleetStatus::DriveToPickup: return LegStatus::DriveToPickup;
    case FleetStatus::DriveWithPassenger: return LegStatus::DriveWithPassenger;
    case FleetStatus::DriveToPark: return LegStatus::DriveToPark;
    case FleetStatus::IdleParked: return LegStatus::DriveToPark;
  }
  return LegStatus::Driving;
}

std::optional<FleetStatus> fleet_status_of(LegStatus s) {
  switch (s) {
    case LegStatus::IdleCruising: return FleetStatus::IdleCruising;
    case LegStatus::DriveToPickup: return FleetStatus::DriveToPickup;
    case LegStatus::DriveWithPassenger: return FleetStatus::DriveWithPassenger;
    case LegStatus::DriveToPark: return FleetStatus::DriveToPark;
    default: return std::nullopt;
  }
}

double TrajectoryRecord::distance_km() const {
  double d = 0.0;
  for (const auto& l : legs) d += l.distance_km;
  return d;
}

double TrajectoryRecord::in_vehicle_s() const {
  double t = 0.0;
  for (const auto& l : legs)
    if (kind == EntityKind::Vehicle || l.status == LegStatus::InVehicle) t += l.end_s - l.start_s;
  return t;
}

double TrajectoryRecord::in_vehicle_free_flow_s() const {
  double t = 0.0;
  for (const auto& l : legs)
    if (kind == EntityKind::Vehicle || l.status == LegStatus::InVehicle) t += l.free_flow_s;
  return t;
}

void validate_sim_config(const SimConfig& c) {
  if (!(c.dt_s > 0.0)) throw ConfigError("dt_s", "must be > 0");
  if (!(c.stats_interval_s > 0.0)) throw ConfigError("stats_interval_s", "must be > 0");
  const double r = c.stats_interval_s / c.dt_s;
  if (std::abs(r - std::round(r)) > 1e-9) throw ConfigError("stats_interval_s", "must be a multiple of dt_s");
  if (!(c.horizon_s > 0.0)) throw ConfigError("horizon_s", "must be > 0");
  if (!(c.walk_speed_kmh > 0.0)) throw ConfigError("walk_speed_kmh", "must be > 0");
  if (c.carpool_share < 0.0 || c.carpool_share > 1.0) throw ConfigError("carpool_share", "must be in [0, 1]");
}

namespace {

constexpr EntityId kBusBase = 1'000'000'000LL;
constexpr EntityId kFleetBase = 2'000'000'000LL;
constexpr EntityId kRailBase = 3'000'000'000LL;
constexpr double kEps = 1e-9;

bool is_private(TravelMode m) { return m == TravelMode::Car || m == TravelMode::Taxi || m == TravelMode::Freight; }

/// One-to-all shortest costs, cached per source node.
class CostCache {
 public:
  explicit CostCache(const Network& net) : net_(&net) {}

  void reset(std::vector<double> link_costs) {
    costs_ = std::move(link_costs);
    cache_.clear();
  }

  double operator()(NodeId a, NodeId b) {
    if (a == b) return 0.0;
    const std::size_t ai = net_->node_index(a);
    auto it = cache_.find(ai);
    if (it == cache_.end()) it = cache_.emplace(ai, dijkstra_costs(*net_, costs_, ai)).first;
    return it->second[net_->node_index(b)];
  }

 private:
  const Network* net_;
  std::vector<double> costs_;
  std::unordered_map<std::size_t, std::vector<double>> cache_;
};

struct OpenLeg {
  std::size_t rec = 0;
  NodeId origin = 0;
  double start_s = 0.0;
  double odo0 = 0.0;
  double ff0 = 0.0;
  TravelMode mode = TravelMode::Car;
  LegStatus status = LegStatus::Driving;
};

struct PaxLeg {
  NodeId origin = 0;
  double start_s = 0.0;
  double odo0 = 0.0;
  double ff0 = 0.0;
  TravelMode mode = TravelMode::Car;
  LegStatus status = LegStatus::Wait;
};

enum class Role : std::uint8_t { Private, Bus, Fleet };

struct PrivateRun {
  std::size_t trip = 0;
  std::size_t veh_rec = 0;
  std::ptrdiff_t pax_rec = -1;
  double entered_s = -1.0;
};

struct BusPax {
  std::size_t rec = 0;
  std::size_t alight = 0;
  double egress_m = 0.0;
  double odo0 = 0.0;
  double ff0 = 0.0;
};

struct BusRun {
  std::size_t line = 0;
  std::size_t rec = 0;
  std::size_t stop = 0;  // stop the bus is at or heading to
  std::vector<BusPax> onboard;
};

struct StopWaiter {
  std::size_t rec = 0;
  std::size_t alight = 0;
  double egress_m = 0.0;
  double ready_s = 0.0;
};

struct HeldBus {
  double release_s = 0.0;
  std::size_t run = 0;
  VehicleEntity entity;
};

struct FleetRun {
  VehicleId vid = 0;
  EntityId eid = 0;
  std::size_t rec = 0;
  bool on_engine = false;
  VehicleEntity entity;
  NodeId node = 0;
  FleetStatus idle_status = FleetStatus::IdleParked;
  std::map<RequestId, std::pair<double, double>> pax_odo;  // request -> (odometer, free-flow) at pickup
};

struct FleetState {
  FleetSpec spec;
  FleetController ctl;
  std::vector<FleetRun> runs;
  std::unordered_map<RequestId, std::size_t> req_rec;
  double next_batch_s = 0.0;
};

class Simulation {
 public:
  explicit Simulation(const ScenarioInputs& in);
  SimOutput run();

 private:
  // Legs
  void open_vehicle_leg(EntityId id, std::size_t rec, NodeId origin, TravelMode mode, LegStatus status);
  void start_pending_leg(EntityId id, double t);
  void close_vehicle_leg(EntityId id, double t, NodeId dest, const VehicleEntity& e);
  void split_vehicle_leg(EntityId id, double t, TravelMode mode, LegStatus status);
  void open_pax(std::size_t rec, double t, NodeId at, TravelMode mode, LegStatus status, double odo = 0.0,
                double ff = 0.0);
  void close_pax(std::size_t rec, double t, NodeId at, double odo = 0.0, double ff = 0.0);
  void add_leg(std::size_t rec, NodeId o, NodeId d, double start, double end, double dist_km, double ff,
               TravelMode mode, LegStatus status);
  std::size_t new_record(std::int64_t id, EntityKind kind, TravelMode mode, std::int64_t trip);
  void unserved(std::size_t trip, double t, std::string reason);

  // Demand
  void depart(std::size_t trip, double t);
  void depart_private(std::size_t trip, double t);
  void depart_fleet(std::size_t trip, double t);
  void depart_bus(std::size_t trip, double t);
  void depart_rail(std::size_t trip, double t);
  void walk_trip(std::size_t trip, double t, std::size_t rec);

  // Buses
  void dispatch_bus(const BusDispatch& d, double t);
  void bus_at_stop(std::size_t run, VehicleEntity entity, double t);

  // Fleets
  void run_batch(std::size_t f, double t);
  FleetStatus desired_status(std::size_t f, VehicleId vid) const;
  TravelMode fleet_mode(std::size_t f, FleetStatus s) const;
  void refresh_status(std::size_t f, VehicleId vid, double t);
  void fleet_at_node(std::size_t f, VehicleId vid, NodeId node, double t);
  bool fleet_dispatch(std::size_t f, VehicleId vid, NodeId from, NodeId to, double t);

  const VehicleEntity* locate(EntityId id) const;
  void emit_rail_runs();
  void sample_conservation(double t);
  void finish();

  const ScenarioInputs& in_;
  const Network& net_;
  const SimConfig cfg_;
  TravelTimeTable table_;
  SupplyEngine engine_;
  SegmentStatsCollector stats_;
  SimOutput out_;
  CostCache time_oracle_;
  CostCache dist_oracle_;
  std::size_t oracle_period_ = std::numeric_limits<std::size_t>::max();

  std::vector<std::size_t> trip_order_;
  std::unordered_map<EntityId, OpenLeg> open_legs_;
  std::unordered_map<EntityId, OpenLeg> pending_legs_;
  std::map<std::size_t, PaxLeg> pax_open_;
  std::unordered_map<std::size_t, EntityId> carrier_;  // riding passenger record -> vehicle
  std::vector<bool> reported_;  // per trip: already in the unserved list
  std::unordered_map<EntityId, std::pair<Role, std::size_t>> roles_;

  std::vector<PrivateRun> privates_;
  std::size_t private_total_ = 0;
  std::size_t private_departed_ = 0;
  std::size_t private_rejected_ = 0;
  std::size_t completed_vehicles_ = 0;

  std::vector<std::vector<NodeId>> bus_stops_;
  std::vector<std::vector<std::vector<std::size_t>>> bus_legs_;
  std::vector<BusDispatch> bus_dispatches_;
  std::size_t next_dispatch_ = 0;
  std::vector<BusRun> buses_;
  std::vector<std::vector<std::vector<StopWaiter>>> waiting_;
  std::vector<HeldBus> held_;
  std::vector<std::vector<NodeId>> rail_stations_;

  std::vector<FleetState> fleets_;

  std::vector<double> trav_sum_, trav_cnt_, speed_sum_, speed_w_;
};

Simulation::Simulation(const ScenarioInputs& in)
    : in_(in),
      net_(*in.network),
      cfg_(in.config),
      engine_(*in.network, 0.0),
      stats_(*in.network, in.config.stats_interval_s, 0.0),
      time_oracle_(*in.network),
      dist_oracle_(*in.network) {
  validate_sim_config(cfg_);
  const std::size_t nseg = net_.segments().size();
  if (in.routing.segments() == 0) {
    const auto periods = static_cast<std::size_t>(std::ceil(cfg_.horizon_s / cfg_.stats_interval_s - kEps));
    table_ = TravelTimeTable::free_flow(net_, cfg_.stats_interval_s, std::max<std::size_t>(1, periods));
  } else {
    if (in.routing.segments() != nseg) throw ConfigError("routing", "table does not match the network");
    table_ = in.routing;
  }
  dist_oracle_.reset(link_lengths(net_));
  const std::size_t cells = nseg * table_.periods();
  trav_sum_.assign(cells, 0.0);
  trav_cnt_.assign(cells, 0.0);
  speed_sum_.assign(cells, 0.0);
  speed_w_.assign(cells, 0.0);

  trip_order_.resize(in.trips.size());
  std::iota(trip_order_.begin(), trip_order_.end(), std::size_t{0});
  std::stable_sort(trip_order_.begin(), trip_order_.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = in.trips[a];
    const auto& y = in.trips[b];
    return std::tie(x.departure_s, x.person_id) < std::tie(y.departure_s, y.person_id);
  });
  reported_.assign(in.trips.size(), false);
  for (const auto& t : in.trips)
    if (is_private(t.mode)) ++private_total_;

  // Bus lines: fixed stop-to-stop routes by distance.
  for (std::size_t l = 0; l < in.bus_lines.size(); ++l) {
    const auto& line = in.bus_lines[l];
    const auto problems = validate_bus_line(line, net_);
    if (!problems.empty()) throw ConfigError("bus_lines", problems.front());
    bus_stops_.push_back(line.stops);
    std::vector<std::vector<std::size_t>> legs;
    for (std::size_t k = 0; k + 1 < line.stops.size(); ++k) {
      const Path p = shortest_distance_path(net_, line.stops[k], line.stops[k + 1]);
      if (!p.found) throw ConfigError("bus_lines", "bus line " + std::to_string(line.id) + " has an unroutable leg");
      legs.push_back(p.segments);
    }
    bus_legs_.push_back(std::move(legs));
    waiting_.emplace_back(line.stops.size());
  }
  bus_dispatches_ = dispatch_buses(in.bus_lines, -std::numeric_limits<double>::infinity(),
                                   std::numeric_limits<double>::infinity());
  for (const auto& r : in.rail_lines) {
    const auto problems = validate_rail_line(r, net_);
    if (!problems.empty()) throw ConfigError("rail_lines", problems.front());
    rail_stations_.push_back(r.stations);
  }

  // Fleets start parked, spread over parking nodes (or zone centroids).
  for (std::size_t f = 0; f < in.fleets.size(); ++f) {
    const auto& spec = in.fleets[f];
    if (spec.four_seaters < 0 || spec.six_seaters < 0) throw ConfigError("fleet", "composition counts must be >= 0");
    std::vector<NodeId> homes = spec.controller.parking;
    if (homes.empty())
      for (const auto& z : net_.zones()) homes.push_back(z.centroid);
    if (homes.empty())
      for (const auto& n : net_.nodes()) homes.push_back(n.id);
    std::vector<FleetVehicle> vehicles;
    for (int i = 0; i < spec.size(); ++i) {
      FleetVehicle v;
      v.id = i;
      v.seats = i < spec.four_seaters ? 4 : 6;
      v.kind = spec.kind;
      v.location = homes[static_cast<std::size_t>(i) % homes.size()];
      vehicles.push_back(v);
    }
    fleets_.push_back(FleetState{spec, FleetController(spec.kind, spec.controller, vehicles), {}, {}, 0.0});
  }
  for (std::size_t f = 0; f < fleets_.size(); ++f) {
    auto& fs = fleets_[f];
    for (const auto& v : fs.ctl.vehicles()) {
      FleetRun run;
      run.vid = v.id;
      run.eid = kFleetBase + static_cast<EntityId>(f) * 1'000'000 + v.id;
      const TravelMode op = fs.spec.kind == FleetKind::AMOD ? TravelMode::AMOD_OP : TravelMode::MOD_OP;
      run.rec = new_record(run.eid, EntityKind::Vehicle, op, -1);
      out_.trajectories[run.rec].completed = true;
      run.node = v.location;
      run.entity.id = run.eid;
      run.entity.mode = op;
      run.entity.capacity = v.seats;
      fs.runs.push_back(std::move(run));
      roles_[fs.runs.back().eid] = {Role::Fleet, f};
    }
  }
}

std::size_t Simulation::new_record(std::int64_t id, EntityKind kind, TravelMode mode, std::int64_t trip) {
  TrajectoryRecord r;
  r.entity_id = id;
  r.kind = kind;
  r.mode = mode;
  r.trip_index = trip;
  out_.trajectories.push_back(std::move(r));
  return out_.trajectories.size() - 1;
}

void Simulation::unserved(std::size_t trip, double t, std::string reason) {
  if (reported_[trip]) return;
  reported_[trip] = true;
  const auto& tr = in_.trips[trip];
  out_.unserved.push_back({static_cast<std::int64_t>(trip), tr.person_id, tr.mode, t, std::move(reason)});
}

void Simulation::add_leg(std::size_t rec, NodeId o, NodeId d, double start, double end, double dist_km, double ff,
                         TravelMode mode, LegStatus status) {
  out_.trajectories[rec].legs.push_back({o, d, start, end, dist_km, ff, mode, status});
}

void Simulation::open_vehicle_leg(EntityId id, std::size_t rec, NodeId origin, TravelMode mode, LegStatus status) {
  OpenLeg l;
  l.rec = rec;
  l.origin = origin;
  l.mode = mode;
  l.status = status;
  pending_legs_[id] = l;
}

void Simulation::start_pending_leg(EntityId id, double t) {
  auto it = pending_legs_.find(id);
  if (it == pending_legs_.end()) throw InternalError("entity entered without a pending leg");
  OpenLeg l = it->second;
  pending_legs_.erase(it);
  const VehicleEntity* e = engine_.find(id);
  l.start_s = t;
  l.odo0 = e->odometer_m;
  l.ff0 = e->free_flow_s;
  open_legs_[id] = l;
}

void Simulation::close_vehicle_leg(EntityId id, double t, NodeId dest, const VehicleEntity& e) {
  auto it = open_legs_.find(id);
  if (it == open_legs_.end()) throw InternalError("closing a leg that is not open");
  const OpenLeg& l = it->second;
  add_leg(l.rec, l.origin, dest, l.start_s, t, (e.odometer_m - l.odo0) / 1000.0, e.free_flow_s - l.ff0, l.mode,
          l.status);
  open_legs_.erase(it);
}

void Simulation::split_vehicle_leg(EntityId id, double t, TravelMode mode, LegStatus status) {
  auto it = open_legs_.find(id);
  if (it == open_legs_.end()) return;
  if (it->second.mode == mode && it->second.status == status) return;
  const VehicleEntity* e = engine_.find(id);
  const NodeId at = engine_.decision_node(id);
  const std::size_t rec = it->second.rec;
  if (t > it->second.start_s) {
    close_vehicle_leg(id, t, at, *e);
    OpenLeg l;
    l.rec = rec;
    l.origin = at;
    l.start_s = t;
    l.odo0 = e->odometer_m;
    l.ff0 = e->free_flow_s;
    l.mode = mode;
    l.status = status;
    open_legs_[id] = l;
  } else {
    it->second.mode = mode;
    it->second.status = status;
  }
}

void Simulation::open_pax(std::size_t rec, double t, NodeId at, TravelMode mode, LegStatus status, double odo,
                          double ff) {
  pax_open_[rec] = PaxLeg{at, t, odo, ff, mode, status};
}

void Simulation::close_pax(std::size_t rec, double t, NodeId at, double odo, double ff) {
  auto it = pax_open_.find(rec);
  if (it == pax_open_.end()) throw InternalError("closing a passenger leg that is not open");
  const PaxLeg& l = it->second;
  const bool moving = l.status == LegStatus::InVehicle;
  const double dur = t - l.start_s;
  add_leg(rec, l.origin, at, l.start_s, t, moving ? std::max(0.0, odo - l.odo0) / 1000.0 : 0.0,
          moving ? std::max(0.0, ff - l.ff0) : dur, l.mode, l.status);
  pax_open_.erase(it);
  carrier_.erase(rec);
}

// ---------------------------------------------------------------- demand

void Simulation::depart(std::size_t trip, double t) {
  const auto& tr = in_.trips[trip];
  if (!net_.has_node(tr.origin) || !net_.has_node(tr.destination)) {
    if (is_private(tr.mode)) {
      ++private_departed_;
      ++private_rejected_;
    }
    unserved(trip, t, "unknown node");
    return;
  }
  if (tr.origin == tr.destination) {
    if (is_private(tr.mode)) {
      ++private_departed_;
      ++private_rejected_;
    }
    unserved(trip, t, "origin equals destination");
    return;
  }
  switch (tr.mode) {
    case TravelMode::Car:
    case TravelMode::Taxi:
    case TravelMode::Freight: depart_private(trip, t); break;
    case TravelMode::MOD:
    case TravelMode::AMOD: depart_fleet(trip, t); break;
    case TravelMode::Bus: depart_bus(trip, t); break;
    case TravelMode::Rail: depart_rail(trip, t); break;
    case TravelMode::Other: {
      const auto rec = new_record(tr.person_id, EntityKind::Passenger, TravelMode::Other, static_cast<std::int64_t>(trip));
      walk_trip(trip, t, rec);
      break;
    }
    default: unserved(trip, t, "mode is not a trip mode"); break;
  }
}

void Simulation::walk_trip(std::size_t trip, double t, std::size_t rec) {
  const auto& tr = in_.trips[trip];
  const Path p = shortest_distance_path(net_, tr.origin, tr.destination);
  const double dist_m = p.found ? p.length_m : net_.euclidean_m(tr.origin, tr.destination);
  const double dur = dist_m / (cfg_.walk_speed_kmh / 3.6);
  out_.trajectories[rec].mode = TravelMode::Other;
  add_leg(rec, tr.origin, tr.destination, t, t + dur, dist_m / 1000.0, dur, TravelMode::Other, LegStatus::Walk);
  out_.trajectories[rec].completed = true;
}

void Simulation::depart_private(std::size_t trip, double t) {
  const auto& tr = in_.trips[trip];
  ++private_departed_;
  const Path p = shortest_path(net_, table_, tr.origin, tr.destination, t);
  if (!p.found || p.segments.empty()) {
    ++private_rejected_;
    unserved(trip, t, "no route");
    return;
  }
  VehicleEntity v;
  v.id = static_cast<EntityId>(trip);
  v.mode = tr.mode;
  v.capacity = tr.mode == TravelMode::Freight ? 1 : 4;
  v.occupancy = 1;
  if (tr.mode == TravelMode::Freight) {
    v.occupancy = 0;
  } else if (tr.mode == TravelMode::Car &&
             bits_to_unit(hash_keys(cfg_.seed, trip, 0x43415250ULL)) < cfg_.carpool_share) {
    v.occupancy = 2 + static_cast<int>(hash_keys(cfg_.seed, trip, 0x4F434355ULL) & 1ULL);
  }
  v.path = p.segments;

  PrivateRun run;
  run.trip = trip;
  run.veh_rec = new_record(v.id, EntityKind::Vehicle, tr.mode, static_cast<std::int64_t>(trip));
  out_.trajectories[run.veh_rec].routed_length_m = p.length_m;
  if (tr.mode != TravelMode::Freight)
    run.pax_rec = static_cast<std::ptrdiff_t>(
        new_record(tr.person_id, EntityKind::Passenger, tr.mode, static_cast<std::int64_t>(trip)));
  open_vehicle_leg(v.id, run.veh_rec, tr.origin, tr.mode, LegStatus::Driving);
  roles_[v.id] = {Role::Private, privates_.size()};
  privates_.push_back(run);
  engine_.enqueue_entry(std::move(v));
}

void Simulation::depart_fleet(std::size_t trip, double t) {
  const auto& tr = in_.trips[trip];
  const FleetKind kind = tr.mode == TravelMode::AMOD ? FleetKind::AMOD : FleetKind::MOD;
  std::size_t f = fleets_.size();
  for (std::size_t i = 0; i < fleets_.size(); ++i)
    if (fleets_[i].spec.kind == kind && fleets_[i].spec.size() > 0) {
      f = i;
      break;
    }
  if (f == fleets_.size()) {
    unserved(trip, t, "no fleet");
    return;
  }
  auto& fs = fleets_[f];
  ServiceRequest r;
  r.id = static_cast<RequestId>(trip);
  r.passenger_id = tr.person_id;
  r.request_time_s = t;
  r.service = tr.service == ServiceType::Shared ? ServiceType::Shared : ServiceType::Single;
  r.pickup = tr.origin;
  r.dropoff = tr.destination;
  fs.ctl.submit_request(r, [this](NodeId a, NodeId b) { return time_oracle_(a, b); });
  const auto rec = new_record(tr.person_id, EntityKind::Passenger, tr.mode, static_cast<std::int64_t>(trip));
  fs.req_rec[r.id] = rec;
  open_pax(rec, t, tr.origin, tr.mode, LegStatus::Wait);
}

void Simulation::depart_bus(std::size_t trip, double t) {
  const auto& tr = in_.trips[trip];
  const auto rec = new_record(tr.person_id, EntityKind::Passenger, TravelMode::Bus, static_cast<std::int64_t>(trip));
  const auto opt = best_transit_option(net_, bus_stops_, tr.origin, tr.destination);
  if (!opt) {
    walk_trip(trip, t, rec);
    return;
  }
  const double ws = cfg_.walk_speed_kmh / 3.6;
  const NodeId board = bus_stops_[opt->line][opt->board];
  const double ready = t + opt->access_m / ws;
  add_leg(rec, tr.origin, board, t, ready, opt->access_m / 1000.0, ready - t, TravelMode::Other, LegStatus::Walk);
  auto& q = waiting_[opt->line][opt->board];
  StopWaiter w{rec, opt->alight, opt->egress_m, ready};
  auto pos = std::upper_bound(q.begin(), q.end(), ready,
                              [](double x, const StopWaiter& s) { return x < s.ready_s; });
  q.insert(pos, w);
  open_pax(rec, ready, board, TravelMode::Bus, LegStatus::Wait);
}

void Simulation::depart_rail(std::size_t trip, double t) {
  const auto& tr = in_.trips[trip];
  const auto rec = new_record(tr.person_id, EntityKind::Passenger, TravelMode::Rail, static_cast<std::int64_t>(trip));
  const auto opt = best_transit_option(net_, rail_stations_, tr.origin, tr.destination);
  if (!opt) {
    walk_trip(trip, t, rec);
    return;
  }
  const double ws = cfg_.walk_speed_kmh / 3.6;
  const auto& line = in_.rail_lines[opt->line];
  const NodeId sb = line.stations[opt->board];
  const NodeId sa = line.stations[opt->alight];
  const double ready = t + opt->access_m / ws;
  add_leg(rec, tr.origin, sb, t, ready, opt->access_m / 1000.0, ready - t, TravelMode::Other, LegStatus::Walk);
  const RailLeg leg = rail_leg_time(line, sb, sa, ready, cfg_.horizon_s);
  if (!leg.served) {
    unserved(trip, ready, "rail: " + leg.reason);
    return;
  }
  add_leg(rec, sb, sb, ready, leg.departure_s, 0.0, leg.wait_s, TravelMode::Rail, LegStatus::Wait);
  add_leg(rec, sb, sa, leg.departure_s, leg.arrival_s, leg.distance_km, leg.arrival_s - leg.departure_s,
          TravelMode::Rail, LegStatus::InVehicle);
  const double end = leg.arrival_s + opt->egress_m / ws;
  add_leg(rec, sa, tr.destination, leg.arrival_s, end, opt->egress_m / 1000.0, end - leg.arrival_s,
          TravelMode::Other, LegStatus::Walk);
  out_.trajectories[rec].completed = true;
  ++out_.boarded_passengers;
}

// ---------------------------------------------------------------- buses

void Simulation::dispatch_bus(const BusDispatch& d, double t) {
  const auto& line = in_.bus_lines[d.line_index];
  BusRun run;
  run.line = d.line_index;
  const EntityId id = kBusBase + static_cast<EntityId>(buses_.size());
  run.rec = new_record(id, EntityKind::Vehicle, TravelMode::Bus_OP, -1);
  run.stop = 0;
  buses_.push_back(std::move(run));
  roles_[id] = {Role::Bus, buses_.size() - 1};
  VehicleEntity e;
  e.id = id;
  e.mode = TravelMode::Bus_OP;
  e.capacity = line.capacity;
  e.status = VehicleStatus::Dwelling;
  bus_at_stop(buses_.size() - 1, std::move(e), t);
}

void Simulation::bus_at_stop(std::size_t ri, VehicleEntity e, double t) {
  auto& run = buses_[ri];
  const auto& line = in_.bus_lines[run.line];
  const std::size_t k = run.stop;
  const NodeId node = line.stops[k];
  const double ws = cfg_.walk_speed_kmh / 3.6;

  std::vector<BusPax> stay;
  for (const auto& p : run.onboard) {
    if (p.alight != k) {
      stay.push_back(p);
      continue;
    }
    close_pax(p.rec, t, node, e.odometer_m, e.free_flow_s);
    const auto& trip = in_.trips[static_cast<std::size_t>(out_.trajectories[p.rec].trip_index)];
    const double end = t + p.egress_m / ws;
    add_leg(p.rec, node, trip.destination, t, end, p.egress_m / 1000.0, end - t, TravelMode::Other, LegStatus::Walk);
    out_.trajectories[p.rec].completed = true;
  }
  run.onboard = std::move(stay);

  const bool last = k + 1 >= line.stops.size();
  int boardings = 0;
  if (!last) {
    auto& q = waiting_[run.line][k];
    std::vector<StopWaiter> left;
    for (const auto& w : q) {
      if (w.ready_s <= t + kEps && static_cast<int>(run.onboard.size()) < line.capacity) {
        close_pax(w.rec, t, node);
        open_pax(w.rec, t, node, TravelMode::Bus, LegStatus::InVehicle, e.odometer_m, e.free_flow_s);
        carrier_[w.rec] = e.id;
        run.onboard.push_back({w.rec, w.alight, w.egress_m, e.odometer_m, e.free_flow_s});
        ++boardings;
        ++out_.boarded_passengers;
      } else {
        left.push_back(w);
      }
    }
    q = std::move(left);
  }
  e.occupancy = static_cast<int>(run.onboard.size());
  if (last) {
    out_.trajectories[run.rec].completed = true;
    ++completed_vehicles_;
    return;
  }
  e.status = VehicleStatus::Dwelling;
  held_.push_back({t + dwell_time(line.dwell, boardings), ri, std::move(e)});
}

// ---------------------------------------------------------------- fleets

FleetStatus Simulation::desired_status(std::size_t f, VehicleId vid) const {
  const auto& v = fleets_[f].ctl.vehicles()[static_cast<std::size_t>(vid)];
  if (!v.onboard.empty()) return FleetStatus::DriveWithPassenger;
  if (!v.schedule.empty()) return FleetStatus::DriveToPickup;
  return fleets_[f].runs[static_cast<std::size_t>(vid)].idle_status;
}

TravelMode Simulation::fleet_mode(std::size_t f, FleetStatus s) const {
  const bool amod = fleets_[f].spec.kind == FleetKind::AMOD;
  if (s == FleetStatus::DriveWithPassenger) return amod ? TravelMode::AMOD : TravelMode::MOD;
  return amod ? TravelMode::AMOD_OP : TravelMode::MOD_OP;
}

void Simulation::refresh_status(std::size_t f, VehicleId vid, double t) {
  auto& fs = fleets_[f];
  auto& v = fs.ctl.vehicles()[static_cast<std::size_t>(vid)];
  auto& run = fs.runs[static_cast<std::size_t>(vid)];
  const FleetStatus s = desired_status(f, vid);
  v.status = s;
  if (!run.on_engine) return;
  const TravelMode mode = fleet_mode(f, s);
  const LegStatus ls = leg_status_of(s);
  if (auto it = pending_legs_.find(run.eid); it != pending_legs_.end()) {
    it->second.mode = mode;
    it->second.status = ls;
  } else {
    split_vehicle_leg(run.eid, t, mode, ls);
  }
}

bool Simulation::fleet_dispatch(std::size_t f, VehicleId vid, NodeId from, NodeId to, double t) {
  auto& fs = fleets_[f];
  auto& run = fs.runs[static_cast<std::size_t>(vid)];
  const Path p = shortest_path(net_, table_, from, to, t);
  if (!p.found || p.segments.empty()) return false;
  run.entity.path = p.segments;
  run.entity.path_pos = 0;
  run.on_engine = true;
  const FleetStatus s = desired_status(f, vid);
  fs.ctl.vehicles()[static_cast<std::size_t>(vid)].status = s;
  open_vehicle_leg(run.eid, run.rec, from, fleet_mode(f, s), leg_status_of(s));
  engine_.enqueue_entry(run.entity);
  return true;
}

void Simulation::fleet_at_node(std::size_t f, VehicleId vid, NodeId node, double t) {
  auto& fs = fleets_[f];
  auto& v = fs.ctl.vehicles()[static_cast<std::size_t>(vid)];
  auto& run = fs.runs[static_cast<std::size_t>(vid)];
  run.node = node;
  v.location = node;
  v.eta_s = 0.0;
  const VehicleEntity& e = run.entity;
  const TravelMode pax_mode = fs.spec.kind == FleetKind::AMOD ? TravelMode::AMOD : TravelMode::MOD;

  while (!v.schedule.empty() && v.schedule.front().node == node) {
    const ScheduleStop stop = v.schedule.front();
    v.schedule.erase(v.schedule.begin());
    auto& req = fs.ctl.request(stop.request);
    const std::size_t rec = fs.req_rec.at(stop.request);
    if (stop.kind == StopKind::Pickup) {
      req.status = RequestStatus::PickedUp;
      v.onboard.push_back({req.id, t, req.direct_time_s});
      run.pax_odo[req.id] = {e.odometer_m, e.free_flow_s};
      close_pax(rec, t, node);
      open_pax(rec, t, node, pax_mode, LegStatus::InVehicle, e.odometer_m, e.free_flow_s);
      carrier_[rec] = run.eid;
      fs.ctl.record({t, ControllerEventType::Pickup, req.id, vid, node});
      ++out_.boarded_passengers;
    } else {
      req.status = RequestStatus::Completed;
      v.onboard.erase(std::remove_if(v.onboard.begin(), v.onboard.end(),
                                     [&](const OnboardPassenger& p) { return p.request == req.id; }),
                      v.onboard.end());
      run.pax_odo.erase(req.id);
      close_pax(rec, t, node, e.odometer_m, e.free_flow_s);
      out_.trajectories[rec].completed = true;
      fs.ctl.record({t, ControllerEventType::Dropoff, req.id, vid, node});
    }
  }
  if (v.onboard.empty() && v.schedule.empty()) v.exclusive = false;
  run.entity.occupancy = static_cast<int>(v.onboard.size());

  if (!v.schedule.empty()) {
    if (!fleet_dispatch(f, vid, node, v.schedule.front().node, t))
      throw InternalError("assigned stop is unreachable from the vehicle");
    return;
  }
  const auto orders = rebalance_idle({v}, fs.ctl.config(), net_,
                                     [this](NodeId a, NodeId b) { return dist_oracle_(a, b); });
  const MovementOrder& o = orders.front();
  if (o.target != node) {
    run.idle_status = o.status;
    if (fleet_dispatch(f, vid, node, o.target, t)) {
      fs.ctl.record({t, ControllerEventType::Rebalance, -1, vid, o.target});
      return;
    }
  }
  run.idle_status = FleetStatus::IdleParked;
  v.status = FleetStatus::IdleParked;
  run.entity.status = VehicleStatus::Parked;
}

void Simulation::run_batch(std::size_t f, double t) {
  auto& fs = fleets_[f];
  for (auto& run : fs.runs) {
    auto& v = fs.ctl.vehicles()[static_cast<std::size_t>(run.vid)];
    if (!run.on_engine) {
      v.location = run.node;
      v.eta_s = 0.0;
    } else {
      v.location = engine_.decision_node(run.eid);
      v.eta_s = engine_.time_to_decision_node(run.eid);
    }
  }
  const auto result = fs.ctl.run_batch(t, [this](NodeId a, NodeId b) { return time_oracle_(a, b); });
  for (RequestId id : result.expired) {
    const std::size_t rec = fs.req_rec.at(id);
    close_pax(rec, t, in_.trips[static_cast<std::size_t>(id)].origin);
    unserved(static_cast<std::size_t>(id), t, "request expired");
  }
  for (const auto& a : result.assignments) {
    auto& run = fs.runs[static_cast<std::size_t>(a.vehicle)];
    auto& v = fs.ctl.vehicles()[static_cast<std::size_t>(a.vehicle)];
    if (run.on_engine && engine_.on_road(run.eid)) {
      const NodeId dn = engine_.decision_node(run.eid);
      const NodeId target = v.schedule.front().node;
      std::vector<std::size_t> tail;
      if (dn != target) {
        const Path p = shortest_path(net_, table_, dn, target, t + v.eta_s);
        if (!p.found) throw InternalError("assigned stop is unreachable from the vehicle");
        tail = p.segments;
      }
      engine_.reroute(run.eid, tail);
      refresh_status(f, a.vehicle, t);
    } else if (run.on_engine) {
      const NodeId origin = engine_.decision_node(run.eid);
      auto e = engine_.withdraw_from_entry(run.eid);
      pending_legs_.erase(run.eid);
      run.entity = std::move(*e);
      run.on_engine = false;
      fleet_at_node(f, a.vehicle, origin, t);
    } else {
      fleet_at_node(f, a.vehicle, run.node, t);
    }
  }
}

const VehicleEntity* Simulation::locate(EntityId id) const {
  if (const auto* e = engine_.find(id)) return e;
  for (const auto& hb : held_)
    if (hb.entity.id == id) return &hb.entity;
  for (const auto& fs : fleets_)
    for (const auto& r : fs.runs)
      if (r.eid == id && !r.on_engine) return &r.entity;
  return nullptr;
}

// ---------------------------------------------------------------- rail runs

void Simulation::emit_rail_runs() {
  for (std::size_t l = 0; l < in_.rail_lines.size(); ++l) {
    const auto& line = in_.rail_lines[l];
    for (std::int64_t k = 0;; ++k) {
      const double dep = line.first_departure_s + static_cast<double>(k) * line.headway_s;
      if (dep > line.last_departure_s + kEps || dep >= cfg_.horizon_s) break;
      const auto rec = new_record(kRailBase + static_cast<EntityId>(l) * 1'000'000 + k, EntityKind::Vehicle,
                                  TravelMode::Rail_OP, -1);
      double t = dep;
      bool done = true;
      for (std::size_t s = 0; s + 1 < line.stations.size(); ++s) {
        const double end = t + line.run_times_s[s];
        if (end > cfg_.horizon_s) {
          done = false;
          break;
        }
        add_leg(rec, line.stations[s], line.stations[s + 1], t, end, line.distances_km[s], line.run_times_s[s],
                TravelMode::Rail_OP, LegStatus::InService);
        t = end;
      }
      out_.trajectories[rec].completed = done;
    }
  }
}

// ---------------------------------------------------------------- loop

void Simulation::sample_conservation(double t) {
  ConservationSample c;
  c.time_s = t;
  c.on_road = engine_.on_road_count();
  c.buffered = engine_.buffered_count();
  c.off_road = held_.size();
  for (const auto& fs : fleets_)
    for (const auto& r : fs.runs)
      if (!r.on_engine) ++c.off_road;
  c.completed = completed_vehicles_;
  c.not_departed = (private_total_ - private_departed_) + (bus_dispatches_.size() - next_dispatch_);
  c.rejected = private_rejected_;
  c.total = private_total_ + bus_dispatches_.size();
  for (const auto& fs : fleets_) c.total += fs.runs.size();
  out_.conservation.push_back(c);
  if (!c.holds())
    throw InternalError("vehicle conservation violated at t=" + std::to_string(t));
}

SimOutput Simulation::run() {
  out_.horizon_s = cfg_.horizon_s;
  out_.trip_count = in_.trips.size();
  out_.fleets = in_.fleets;
  emit_rail_runs();

  const double dt = cfg_.dt_s;
  const auto steps = static_cast<std::size_t>(std::ceil(cfg_.horizon_s / dt - kEps));
  const auto steps_per_interval = static_cast<std::size_t>(std::llround(cfg_.stats_interval_s / dt));
  std::size_t next_trip = 0;
  sample_conservation(0.0);

  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    const std::size_t period = table_.period_of(t);
    if (period != oracle_period_) {
      oracle_period_ = period;
      time_oracle_.reset(link_costs_at(net_, table_, period));
    }

    // Buses whose dwell ended re-enter the road.
    if (!held_.empty()) {
      std::stable_sort(held_.begin(), held_.end(), [](const HeldBus& a, const HeldBus& b) {
        return std::tie(a.release_s, a.run) < std::tie(b.release_s, b.run);
      });
      std::size_t k = 0;
      while (k < held_.size() && held_[k].release_s <= t + kEps) {
        auto& h = held_[k];
        auto& run = buses_[h.run];
        h.entity.path = bus_legs_[run.line][run.stop];
        h.entity.path_pos = 0;
        open_vehicle_leg(h.entity.id, run.rec, in_.bus_lines[run.line].stops[run.stop], TravelMode::Bus_OP,
                         LegStatus::InService);
        ++run.stop;
        engine_.enqueue_entry(std::move(h.entity));
        ++k;
      }
      held_.erase(held_.begin(), held_.begin() + static_cast<std::ptrdiff_t>(k));
    }

    while (next_dispatch_ < bus_dispatches_.size() && bus_dispatches_[next_dispatch_].time_s <= t + kEps) {
      const auto d = bus_dispatches_[next_dispatch_++];
      dispatch_bus(d, t);
    }

    while (next_trip < trip_order_.size() && in_.trips[trip_order_[next_trip]].departure_s <= t + kEps) {
      depart(trip_order_[next_trip++], t);
    }

    for (std::size_t f = 0; f < fleets_.size(); ++f) {
      if (t + kEps >= fleets_[f].next_batch_s) {
        run_batch(f, t);
        while (fleets_[f].next_batch_s <= t + kEps) fleets_[f].next_batch_s += fleets_[f].spec.controller.batch_interval_s;
      }
    }

    StepResult sr = engine_.step(dt);
    stats_.record(sr);
    out_.max_displacement_excess_m = std::max(out_.max_displacement_excess_m, sr.max_displacement_excess_m);
    const std::size_t np = table_.periods();
    const std::size_t p_now = table_.period_of(t);
    for (std::size_t s = 0; s < sr.speeds.size(); ++s) {
      speed_sum_[s * np + p_now] += sr.speeds[s] * dt;
      speed_w_[s * np + p_now] += dt;
    }
    for (const auto& tv : sr.traversals) {
      const std::size_t cell = tv.segment * np + table_.period_of(tv.entry_s);
      trav_sum_[cell] += tv.exit_s - tv.entry_s;
      trav_cnt_[cell] += 1.0;
    }

    for (const auto& en : sr.entered) {
      start_pending_leg(en.id, en.time_s);
      const auto& role = roles_.at(en.id);
      if (role.first == Role::Private) privates_[role.second].entered_s = en.time_s;
    }

    for (auto& ar : sr.arrivals) {
      close_vehicle_leg(ar.id, ar.time_s, ar.node, ar.entity);
      const auto role = roles_.at(ar.id);
      switch (role.first) {
        case Role::Private: {
          auto& run = privates_[role.second];
          const auto& tr = in_.trips[run.trip];
          out_.trajectories[run.veh_rec].completed = true;
          ++completed_vehicles_;
          if (run.pax_rec >= 0) {
            const auto rec = static_cast<std::size_t>(run.pax_rec);
            const auto& vleg = out_.trajectories[run.veh_rec].legs.back();
            if (run.entered_s > tr.departure_s)
              add_leg(rec, tr.origin, tr.origin, tr.departure_s, run.entered_s, 0.0, run.entered_s - tr.departure_s,
                      tr.mode, LegStatus::Wait);
            add_leg(rec, tr.origin, tr.destination, vleg.start_s, vleg.end_s, vleg.distance_km, vleg.free_flow_s,
                    tr.mode, LegStatus::InVehicle);
            out_.trajectories[rec].completed = true;
            ++out_.boarded_passengers;
          }
          roles_.erase(ar.id);
          break;
        }
        case Role::Bus:
          bus_at_stop(role.second, std::move(ar.entity), ar.time_s);
          break;
        case Role::Fleet: {
          const std::size_t f = role.second;
          const auto vid = static_cast<VehicleId>(ar.id - kFleetBase - static_cast<EntityId>(f) * 1'000'000);
          auto& run = fleets_[f].runs[static_cast<std::size_t>(vid)];
          run.entity = std::move(ar.entity);
          run.on_engine = false;
          fleet_at_node(f, vid, ar.node, ar.time_s);
          break;
        }
      }
    }

    if ((n + 1) % steps_per_interval == 0 || n + 1 == steps) sample_conservation(engine_.clock());
  }
  finish();
  return std::move(out_);
}

void Simulation::finish() {
  const double h = cfg_.horizon_s;
  // Vehicles still driving: close their legs at the horizon.
  std::vector<EntityId> open;
  for (const auto& [id, l] : open_legs_) open.push_back(id);
  std::sort(open.begin(), open.end());
  for (EntityId id : open) {
    const VehicleEntity* e = engine_.find(id);
    close_vehicle_leg(id, h, engine_.decision_node(id), *e);
  }
  // Passengers still waiting or riding.
  std::vector<std::size_t> recs;
  for (const auto& [rec, l] : pax_open_) recs.push_back(rec);
  for (std::size_t rec : recs) {
    double odo = 0.0, ff = 0.0;
    const auto& l = pax_open_.at(rec);
    if (auto c = carrier_.find(rec); c != carrier_.end()) {
      if (const VehicleEntity* e = locate(c->second)) {
        odo = e->odometer_m;
        ff = e->free_flow_s;
      }
    }
    close_pax(rec, std::max(h, l.start_s), l.origin, odo, ff);
  }

  // Clip analytic legs at the horizon; anything cut short is unfinished.
  for (auto& r : out_.trajectories) {
    bool cut = false;
    std::vector<TrajectoryLeg> kept;
    for (auto l : r.legs) {
      if (l.start_s >= h) {
        cut = true;
        continue;
      }
      if (l.end_s > h) {
        const double frac = (h - l.start_s) / (l.end_s - l.start_s);
        l.distance_km *= frac;
        l.free_flow_s *= frac;
        l.end_s = h;
        cut = true;
      }
      kept.push_back(l);
    }
    r.legs = std::move(kept);
    if (cut && r.kind == EntityKind::Passenger) r.completed = false;
  }
  for (auto& r : out_.trajectories) {
    if (r.kind != EntityKind::Passenger || r.completed || r.trip_index < 0) continue;
    unserved(static_cast<std::size_t>(r.trip_index), h, "incomplete at horizon");
  }
  for (std::size_t i = 0; i < in_.trips.size(); ++i)
    if (!reported_[i] && in_.trips[i].departure_s >= h) unserved(i, h, "departs after horizon");

  out_.segments = stats_.finish(h);

  for (const auto& fs : fleets_)
    out_.events.insert(out_.events.end(), fs.ctl.events().begin(), fs.ctl.events().end());
  std::stable_sort(out_.events.begin(), out_.events.end(),
                   [](const ControllerEvent& a, const ControllerEvent& b) { return a.time_s < b.time_s; });

  const std::size_t nseg = net_.segments().size();
  const std::size_t np = table_.periods();
  out_.observed = TravelTimeTable(nseg, np, table_.period_s());
  for (std::size_t s = 0; s < nseg; ++s) {
    const auto& seg = net_.segments()[s];
    for (std::size_t p = 0; p < np; ++p) {
      const std::size_t cell = s * np + p;
      double v = seg.free_flow_time_s();
      if (trav_cnt_[cell] > 0.0) {
        v = trav_sum_[cell] / trav_cnt_[cell];
      } else if (speed_w_[cell] > 0.0) {
        const double kmh = speed_sum_[cell] / speed_w_[cell];
        if (kmh > 0.0) v = seg.length_m / (kmh / 3.6);
      }
      out_.observed.at(s, p) = std::max(v, seg.free_flow_time_s());
    }
  }
  std::stable_sort(out_.unserved.begin(), out_.unserved.end(),
                   [](const UnservedTrip& a, const UnservedTrip& b) { return a.trip_index < b.trip_index; });
}

}  // namespace

SimOutput run_scenario(const ScenarioInputs& inputs) {
  if (inputs.network == nullptr) throw ConfigError("network", "missing network");
  Simulation sim(inputs);
  return sim.run();
}

std::vector<FleetLegSummary> fleet_leg_summaries(const SimOutput& out, FleetKind kind) {
  std::vector<FleetLegSummary> legs;
  const TravelMode busy = kind == FleetKind::AMOD ? TravelMode::AMOD : TravelMode::MOD;
  const TravelMode op = kind == FleetKind::AMOD ? TravelMode::AMOD_OP : TravelMode::MOD_OP;
  for (const auto& r : out.trajectories) {
    if (r.kind != EntityKind::Vehicle) continue;
    for (const auto& l : r.legs) {
      if (l.mode != busy && l.mode != op) continue;
      const auto s = fleet_status_of(l.status);
      if (!s) continue;
      legs.push_back({*s, l.distance_km, l.end_s - l.start_s});
    }
  }
  return legs;
}

}  // namespace mfdsim
