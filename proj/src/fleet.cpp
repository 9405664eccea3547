#include "mfdsim/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "mfdsim/errors.hpp"

namespace mfdsim {

namespace {
constexpr double kEps = 1e-9;
}

std::string_view fleet_status_name(FleetStatus s) {
  switch (s) {
    case FleetStatus::IdleParked: return "IDLE_PARKED";
    case FleetStatus::IdleCruising: return "IDLE_CRUISING";
    case FleetStatus::DriveToPickup: return "DRIVE_TO_PICKUP";
    case FleetStatus::DriveWithPassenger: return "DRIVE_WITH_PASSENGER";
    case FleetStatus::DriveToPark: return "DRIVE_TO_PARK";
  }
  return "UNKNOWN";
}

std::string_view event_name(ControllerEventType t) {
  switch (t) {
    case ControllerEventType::Request: return "REQUEST";
    case ControllerEventType::Assign: return "ASSIGN";
    case ControllerEventType::Pickup: return "PICKUP";
    case ControllerEventType::Dropoff: return "DROPOFF";
    case ControllerEventType::Expire: return "EXPIRE";
    case ControllerEventType::Rebalance: return "REBALANCE";
  }
  return "UNKNOWN";
}

std::optional<ControllerEventType> parse_event(std::string_view name) {
  for (auto t : {ControllerEventType::Request, ControllerEventType::Assign, ControllerEventType::Pickup,
                 ControllerEventType::Dropoff, ControllerEventType::Expire, ControllerEventType::Rebalance}) {
    if (event_name(t) == name) return t;
  }
  return std::nullopt;
}

std::optional<std::vector<double>> schedule_times(const FleetVehicle& vehicle, const Schedule& schedule,
                                                  const TravelTimeOracle& oracle, double now_s) {
  std::vector<double> times;
  times.reserve(schedule.size());
  double t = now_s + vehicle.eta_s;
  NodeId at = vehicle.location;
  for (const auto& stop : schedule) {
    const double leg = stop.node == at ? 0.0 : oracle(at, stop.node);
    if (!std::isfinite(leg)) return std::nullopt;
    t += leg;
    at = stop.node;
    times.push_back(t);
  }
  return times;
}

bool schedule_feasible(const FleetVehicle& vehicle, const Schedule& schedule,
                       const std::vector<double>& arrival_times,
                       const std::function<const ServiceRequest&(RequestId)>& requests,
                       const ServiceRequest& new_request, const ControllerConfig& config) {
  int load = static_cast<int>(vehicle.onboard.size());
  if (load > vehicle.seats) return false;
  std::map<RequestId, double> pickup_at;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& stop = schedule[i];
    const double t = arrival_times[i];
    if (stop.kind == StopKind::Pickup) {
      if (++load > vehicle.seats) return false;
      pickup_at[stop.request] = t;
      if (stop.request == new_request.id && t - new_request.request_time_s > config.max_wait_s() + kEps)
        return false;
      continue;
    }
    --load;
    double boarded = 0.0;
    double direct = 0.0;
    if (auto it = pickup_at.find(stop.request); it != pickup_at.end()) {
      boarded = it->second;
      direct = stop.request == new_request.id ? new_request.direct_time_s : requests(stop.request).direct_time_s;
    } else {
      auto on = std::find_if(vehicle.onboard.begin(), vehicle.onboard.end(),
                             [&](const OnboardPassenger& p) { return p.request == stop.request; });
      if (on == vehicle.onboard.end()) return false;  // dropoff without pickup
      boarded = on->picked_up_s;
      direct = on->direct_time_s;
    }
    if ((t - boarded) - direct > config.max_detour_s() + kEps) return false;
  }
  return true;
}

std::optional<Insertion> insert_shared(const FleetVehicle& vehicle, const ServiceRequest& request,
                                       const std::function<const ServiceRequest&(RequestId)>& requests,
                                       const TravelTimeOracle& oracle, const ControllerConfig& config,
                                       double now_s) {
  if (vehicle.exclusive) return std::nullopt;
  const auto base = schedule_times(vehicle, vehicle.schedule, oracle, now_s);
  if (!base) return std::nullopt;
  const double base_end = base->empty() ? now_s + vehicle.eta_s : base->back();

  const std::size_t n = vehicle.schedule.size();
  std::optional<Insertion> best;
  const ScheduleStop pickup{request.id, StopKind::Pickup, request.pickup};
  const ScheduleStop dropoff{request.id, StopKind::Dropoff, request.dropoff};
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = i; j <= n; ++j) {
      Schedule cand;
      cand.reserve(n + 2);
      cand.insert(cand.end(), vehicle.schedule.begin(), vehicle.schedule.begin() + static_cast<std::ptrdiff_t>(i));
      cand.push_back(pickup);
      cand.insert(cand.end(), vehicle.schedule.begin() + static_cast<std::ptrdiff_t>(i),
                  vehicle.schedule.begin() + static_cast<std::ptrdiff_t>(j));
      cand.push_back(dropoff);
      cand.insert(cand.end(), vehicle.schedule.begin() + static_cast<std::ptrdiff_t>(j), vehicle.schedule.end());
      const auto times = schedule_times(vehicle, cand, oracle, now_s);
      if (!times) continue;
      if (!schedule_feasible(vehicle, cand, *times, requests, request, config)) continue;
      const double added = times->back() - base_end;
      if (!best || added < best->added_time_s - kEps) {
        best = Insertion{std::move(cand), (*times)[i], added, i, j + 1};
      }
    }
  }
  return best;
}

std::optional<Insertion> insert_single(const FleetVehicle& vehicle, const ServiceRequest& request,
                                       const TravelTimeOracle& oracle, const ControllerConfig& config,
                                       double now_s) {
  if (vehicle.exclusive || !vehicle.schedule.empty() || !vehicle.onboard.empty()) return std::nullopt;
  Schedule cand{{request.id, StopKind::Pickup, request.pickup}, {request.id, StopKind::Dropoff, request.dropoff}};
  const auto times = schedule_times(vehicle, cand, oracle, now_s);
  if (!times) return std::nullopt;
  if ((*times)[0] - request.request_time_s > config.max_wait_s() + kEps) return std::nullopt;
  const double added = times->back() - (now_s + vehicle.eta_s);
  return Insertion{std::move(cand), (*times)[0], added, 0, 1};
}

BatchResult assign_batch(std::vector<ServiceRequest>& pending, std::vector<FleetVehicle>& vehicles,
                         const std::function<const ServiceRequest&(RequestId)>& requests,
                         const TravelTimeOracle& oracle, const ControllerConfig& config, double now_s) {
  BatchResult out;
  std::vector<ServiceRequest> live;
  for (auto& r : pending) {
    if (now_s - r.request_time_s > config.max_wait_s() + kEps) {
      r.status = RequestStatus::Expired;
      out.expired.push_back(r.id);
    } else {
      live.push_back(r);
    }
  }

  struct Candidate {
    double pickup;
    VehicleId vehicle;
    RequestId request;
    std::size_t vix;
    std::size_t rix;
    Insertion ins;
  };
  std::vector<Candidate> cands;
  for (std::size_t ri = 0; ri < live.size(); ++ri) {
    const auto& r = live[ri];
    for (std::size_t vi = 0; vi < vehicles.size(); ++vi) {
      const auto& v = vehicles[vi];
      auto ins = r.service == ServiceType::Shared ? insert_shared(v, r, requests, oracle, config, now_s)
                                                  : insert_single(v, r, oracle, config, now_s);
      if (ins) cands.push_back({ins->pickup_time_s, v.id, r.id, vi, ri, std::move(*ins)});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.pickup, a.vehicle, a.request) < std::tie(b.pickup, b.vehicle, b.request);
  });

  std::vector<bool> vehicle_used(vehicles.size(), false);
  std::vector<bool> request_done(live.size(), false);
  for (auto& c : cands) {
    if (vehicle_used[c.vix] || request_done[c.rix]) continue;
    vehicle_used[c.vix] = true;
    request_done[c.rix] = true;
    auto& v = vehicles[c.vix];
    v.schedule = c.ins.schedule;
    if (live[c.rix].service != ServiceType::Shared) v.exclusive = true;
    live[c.rix].status = RequestStatus::Assigned;
    out.assignments.push_back({c.request, c.vehicle, std::move(c.ins)});
  }

  std::vector<ServiceRequest> remaining;
  for (std::size_t ri = 0; ri < live.size(); ++ri)
    if (!request_done[ri]) remaining.push_back(live[ri]);
  pending = std::move(remaining);
  return out;
}

std::vector<MovementOrder> rebalance_idle(const std::vector<FleetVehicle>& idle, const ControllerConfig& config,
                                          const Network& network, const TravelTimeOracle& distance) {
  std::vector<MovementOrder> orders;
  auto nearest = [&](NodeId from, const std::vector<NodeId>& targets) {
    NodeId best = targets.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (NodeId t : targets) {
      const double d = t == from ? 0.0 : distance(from, t);
      if (d < best_d - kEps || (std::abs(d - best_d) <= kEps && t < best)) {
        best = t;
        best_d = d;
      }
    }
    return best;
  };

  if (config.policy == RebalancePolicy::NearestParking) {
    if (config.parking.empty()) throw ConfigError("parking", "nearest_parking policy needs parking nodes");
    for (const auto& v : idle) {
      const NodeId p = nearest(v.location, config.parking);
      orders.push_back({v.id, p, p == v.location ? FleetStatus::IdleParked : FleetStatus::DriveToPark});
    }
    return orders;
  }

  std::vector<ZoneId> ranking = config.hotspot_ranking;
  if (ranking.empty()) {
    std::vector<const Zone*> zs;
    for (const auto& z : network.zones()) zs.push_back(&z);
    std::stable_sort(zs.begin(), zs.end(),
                     [](const Zone* a, const Zone* b) { return a->demand_weight > b->demand_weight; });
    for (auto* z : zs) ranking.push_back(z->id);
  }
  if (ranking.empty()) throw ConfigError("hotspot_ranking", "cruise_hotspot policy needs zones");
  const std::size_t k = std::min(std::max<std::size_t>(1, config.hotspot_top_k), ranking.size());
  std::vector<NodeId> centroids;
  for (std::size_t i = 0; i < k; ++i) centroids.push_back(network.zones()[network.zone_index(ranking[i])].centroid);

  for (const auto& v : idle) {
    const NodeId c = nearest(v.location, centroids);
    if (c != v.location) {
      orders.push_back({v.id, c, FleetStatus::IdleCruising});
      continue;
    }
    // Already at the hotspot centroid: circulate through the zone's nodes.
    const ZoneId z = network.zone_of(c);
    NodeId next = c;
    if (z >= 0) {
      const auto& nodes = network.zones()[network.zone_index(z)].nodes;
      auto it = std::find(nodes.begin(), nodes.end(), c);
      if (nodes.size() > 1 && it != nodes.end()) {
        ++it;
        next = it == nodes.end() ? nodes.front() : *it;
      }
    }
    if (next == c) {
      std::vector<NodeId> others;
      for (NodeId o : centroids)
        if (o != c) others.push_back(o);
      if (!others.empty()) next = nearest(c, others);
    }
    orders.push_back({v.id, next, next == c ? FleetStatus::IdleParked : FleetStatus::IdleCruising});
  }
  return orders;
}

FleetController::FleetController(FleetKind kind, ControllerConfig config, std::vector<FleetVehicle> fleet)
    : kind_(kind), config_(std::move(config)), fleet_(std::move(fleet)) {
  if (!(config_.batch_interval_s > 0.0)) throw ConfigError("batch_interval_s", "must be > 0");
  if (config_.max_wait_min < 0.0) throw ConfigError("max_wait_min", "must be >= 0");
  if (config_.max_detour_min < 0.0) throw ConfigError("max_detour_min", "must be >= 0");
  for (auto& v : fleet_) v.kind = kind_;
}

FleetVehicle& FleetController::vehicle(VehicleId id) {
  for (auto& v : fleet_)
    if (v.id == id) return v;
  throw InternalError("unknown fleet vehicle " + std::to_string(id));
}

namespace {
template <typename Vec>
auto find_request(Vec& known, RequestId id) {
  return std::lower_bound(known.begin(), known.end(), id,
                          [](const ServiceRequest& r, RequestId x) { return r.id < x; });
}
}  // namespace

bool FleetController::has_request(RequestId id) const {
  auto it = find_request(known_, id);
  return it != known_.end() && it->id == id;
}

ServiceRequest& FleetController::request(RequestId id) {
  auto it = find_request(known_, id);
  if (it == known_.end() || it->id != id) throw InternalError("unknown request " + std::to_string(id));
  return *it;
}

const ServiceRequest& FleetController::request(RequestId id) const {
  auto it = find_request(known_, id);
  if (it == known_.end() || it->id != id) throw InternalError("unknown request " + std::to_string(id));
  return *it;
}

bool FleetController::submit_request(ServiceRequest request, const TravelTimeOracle& oracle) {
  if (request.pickup == request.dropoff) throw DomainError("request pickup equals dropoff");
  auto it = find_request(known_, request.id);
  if (it != known_.end() && it->id == request.id) return false;
  request.status = RequestStatus::Pending;
  request.direct_time_s = oracle(request.pickup, request.dropoff);
  known_.insert(it, request);
  pending_.push_back(request);
  record({request.request_time_s, ControllerEventType::Request, request.id, -1, request.pickup});
  return true;
}

BatchResult FleetController::run_batch(double now_s, const TravelTimeOracle& oracle) {
  auto resolve = [this](RequestId id) -> const ServiceRequest& { return request(id); };
  auto result = assign_batch(pending_, fleet_, resolve, oracle, config_, now_s);
  for (RequestId id : result.expired) {
    auto& r = request(id);
    r.status = RequestStatus::Expired;
    record({now_s, ControllerEventType::Expire, id, -1, r.pickup});
  }
  for (const auto& a : result.assignments) {
    auto& r = request(a.request);
    r.status = RequestStatus::Assigned;
    record({now_s, ControllerEventType::Assign, a.request, a.vehicle, r.pickup});
  }
  return result;
}

FleetKpis fleet_kpis(const std::vector<ControllerEvent>& events, const std::vector<FleetLegSummary>& legs,
                     std::size_t fleet_size, double horizon_s) {
  FleetKpis k;
  std::map<RequestId, double> requested;
  std::map<RequestId, double> picked;
  for (const auto& e : events) {
    switch (e.type) {
      case ControllerEventType::Request: requested.emplace(e.request, e.time_s); break;
      case ControllerEventType::Pickup: picked.emplace(e.request, e.time_s); break;
      case ControllerEventType::Expire: ++k.expired; break;
      default: break;
    }
  }
  k.requests = requested.size();
  for (const auto& [id, t] : picked) {
    auto it = requested.find(id);
    if (it == requested.end()) continue;
    k.waits_min.push_back((t - it->second) / 60.0);
  }
  k.served = k.waits_min.size();
  if (!k.waits_min.empty()) {
    double s = 0.0;
    for (double w : k.waits_min) s += w;
    k.mean_wait_min = s / static_cast<double>(k.waits_min.size());
  }
  k.service_rate = k.requests ? static_cast<double>(k.served) / static_cast<double>(k.requests) : 0.0;
  double empty = 0.0;
  double busy_s = 0.0;
  for (const auto& l : legs) {
    k.fleet_vkt_km += l.distance_km;
    if (l.status == FleetStatus::DriveWithPassenger)
      busy_s += l.duration_s;
    else
      empty += l.distance_km;
  }
  k.empty_vkt_share = k.fleet_vkt_km > 0.0 ? empty / k.fleet_vkt_km : 0.0;
  const double supply = static_cast<double>(fleet_size) * horizon_s;
  k.utilization = supply > 0.0 ? busy_s / supply : 0.0;
  return k;
}

}  // namespace mfdsim
