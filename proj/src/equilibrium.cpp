#include "mfdsim/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mfdsim/errors.hpp"
#include "mfdsim/transit.hpp"

namespace mfdsim {

TravelTimeTable blend_travel_times(const TravelTimeTable& t_i, const TravelTimeTable& t_s, double w) {
  if (!t_i.same_shape(t_s)) throw DomainError("blend_travel_times: tables differ in shape");
  if (!(w >= 0.0 && w <= 1.0)) throw DomainError("blend_travel_times: w must be in [0, 1]");
  TravelTimeTable out = t_i;
  auto& v = out.values();
  const auto& s = t_s.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = v[k] * w + s[k] * (1.0 - w);
  return out;
}

double max_relative_gap(const TravelTimeTable& a, const TravelTimeTable& b) {
  if (!a.same_shape(b)) throw DomainError("max_relative_gap: tables differ in shape");
  double g = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) {
    const double base = a.values()[k];
    const double diff = std::abs(b.values()[k] - base);
    if (diff == 0.0) continue;
    g = std::max(g, base > 0.0 ? diff / base : std::numeric_limits<double>::infinity());
  }
  return g;
}

double mean_travel_time(const TravelTimeTable& t) {
  const auto& v = t.values();
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void LearningConfig::validate() const {
  if (!(w >= 0.0 && w < 1.0)) throw ConfigError("learning.w", "must satisfy 0 <= w < 1");
  if (!(tolerance > 0.0)) throw ConfigError("learning.tolerance", "must be > 0");
  if (max_iterations < 1) throw ConfigError("learning.max_iterations", "must be >= 1");
}

LearningResult learn_travel_times(const TravelTimeTable& t0, const SupplyFunction& supply, const LearningConfig& cfg) {
  cfg.validate();
  LearningResult r;
  r.table = t0;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const TravelTimeTable observed = supply(r.table);
    TravelTimeTable next = blend_travel_times(r.table, observed, cfg.w);
    const double gap = max_relative_gap(r.table, next);
    r.table = std::move(next);
    r.trace.push_back({it, gap, mean_travel_time(r.table)});
    if (gap < cfg.tolerance) {
      r.converged = true;
      break;
    }
  }
  return r;
}

WithinDayResult within_day_loop(const ScenarioInputs& inputs, const LearningConfig& cfg, const Simulator& simulate) {
  if (inputs.network == nullptr) throw ConfigError("network", "missing");
  WithinDayResult r;
  ScenarioInputs in = inputs;
  TravelTimeTable t0 = inputs.routing;
  if (t0.segments() == 0) {
    const double period = inputs.config.stats_interval_s;
    const auto periods = static_cast<std::size_t>(std::ceil(inputs.config.horizon_s / period));
    t0 = TravelTimeTable::free_flow(*inputs.network, period, std::max<std::size_t>(1, periods));
  }
  auto supply = [&](const TravelTimeTable& t) {
    in.routing = t;
    r.output = simulate(in);
    return r.output.observed;
  };
  r.learning = learn_travel_times(t0, supply, cfg);
  return r;
}

std::vector<std::optional<double>> fleet_wait_means(const std::vector<ControllerEvent>& events, FleetKind kind,
                                                    std::size_t periods, double period_s) {
  std::map<RequestId, double> requested;
  std::vector<double> sum(periods, 0.0);
  std::vector<std::size_t> count(periods, 0);
  double all_sum = 0.0;
  std::size_t all_count = 0;
  for (const auto& e : events) {
    if (e.fleet != kind) continue;
    if (e.type == ControllerEventType::Request) {
      requested.emplace(e.request, e.time_s);
    } else if (e.type == ControllerEventType::Pickup) {
      const auto it = requested.find(e.request);
      if (it == requested.end()) continue;
      const double wait_min = (e.time_s - it->second) / 60.0;
      const auto p = std::min(static_cast<std::size_t>(std::max(0.0, it->second) / period_s), periods - 1);
      sum[p] += wait_min;
      ++count[p];
      all_sum += wait_min;
      ++all_count;
    }
  }
  std::vector<std::optional<double>> out(periods);
  for (std::size_t p = 0; p < periods; ++p) {
    if (count[p] > 0)
      out[p] = sum[p] / static_cast<double>(count[p]);
    else if (all_count > 0)
      out[p] = all_sum / static_cast<double>(all_count);
  }
  return out;
}

namespace {

double walk_min(double metres, double kmh) { return metres / 1000.0 / kmh * 60.0; }

}  // namespace

SkimMatrix build_skims(const Network& net, const TravelTimeTable& times, const std::vector<BusLine>& bus_lines,
                       const std::vector<RailLine>& rail_lines, const std::vector<ControllerEvent>& events,
                       double horizon_s, const SkimConfig& cfg) {
  if (!(cfg.period_s > 0.0) || !(horizon_s > 0.0)) throw DomainError("build_skims: periods must be positive");
  const auto periods = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(horizon_s / cfg.period_s)));
  std::vector<ZoneId> zone_ids;
  for (const auto& z : net.zones()) zone_ids.push_back(z.id);
  SkimMatrix skims(zone_ids, periods, cfg.period_s);

  const auto mod_wait = fleet_wait_means(events, FleetKind::MOD, periods, cfg.period_s);
  const auto amod_wait = fleet_wait_means(events, FleetKind::AMOD, periods, cfg.period_s);
  std::vector<std::vector<NodeId>> bus_stops, rail_stations;
  for (const auto& l : bus_lines) bus_stops.push_back(l.stops);
  for (const auto& l : rail_lines) rail_stations.push_back(l.stations);

  const auto lengths = link_lengths(net);
  const auto& zones = net.zones();
  std::vector<std::vector<double>> dist_km(zones.size());
  for (std::size_t o = 0; o < zones.size(); ++o) {
    const auto d = dijkstra_costs(net, lengths, net.node_index(zones[o].centroid));
    for (const auto& z : zones) dist_km[o].push_back(d[net.node_index(z.centroid)] / 1000.0);
  }
  // Intrazonal trips use half the distance to the nearest other centroid.
  auto intrazonal = [&](const std::vector<double>& row, std::size_t o) {
    double best = kUnreachable;
    for (std::size_t d = 0; d < row.size(); ++d)
      if (d != o) best = std::min(best, row[d]);
    return std::isfinite(best) ? 0.5 * best : 0.0;
  };

  for (std::size_t p = 0; p < periods; ++p) {
    const double mid = (static_cast<double>(p) + 0.5) * cfg.period_s;
    const auto costs = link_costs_at(net, times, times.period_of(mid));
    std::vector<std::vector<double>> road_min(zones.size());
    for (std::size_t o = 0; o < zones.size(); ++o) {
      const auto t = dijkstra_costs(net, costs, net.node_index(zones[o].centroid));
      for (const auto& z : zones) road_min[o].push_back(t[net.node_index(z.centroid)] / 60.0);
    }
    for (std::size_t o = 0; o < zones.size(); ++o) {
      for (std::size_t d = 0; d < zones.size(); ++d) {
        double ivt = road_min[o][d];
        double km = dist_km[o][d];
        if (o == d) {
          ivt = intrazonal(road_min[o], o);
          km = intrazonal(dist_km[o], o);
        }
        if (!std::isfinite(ivt) || !std::isfinite(km)) continue;
        const ZoneId oz = zones[o].id, dz = zones[d].id;
        const double walk = km * 1000.0;
        auto set = [&](TravelMode m, double ivt_min, double wait_min, double dist) {
          skims.at(oz, dz, m, p) = SkimEntry{ivt_min, wait_min, dist};
        };
        set(TravelMode::Car, ivt, 0.0, km);
        set(TravelMode::Taxi, ivt, cfg.taxi_wait_min, km);
        set(TravelMode::MOD, ivt, mod_wait[p].value_or(cfg.default_fleet_wait_min), km);
        set(TravelMode::AMOD, ivt, amod_wait[p].value_or(cfg.default_fleet_wait_min), km);
        set(TravelMode::Other, walk_min(walk, cfg.walk_speed_kmh), 0.0, km);

        const NodeId on = zones[o].centroid, dn = zones[d].centroid;
        const auto bus = o == d ? std::nullopt : best_transit_option(net, bus_stops, on, dn);
        if (bus) {
          const auto& line = bus_lines[bus->line];
          const std::size_t a = net.node_index(line.stops[bus->board]);
          const auto t = dijkstra_costs(net, costs, a);
          const auto dl = dijkstra_costs(net, lengths, a);
          const std::size_t b = net.node_index(line.stops[bus->alight]);
          const double access = walk_min(bus->access_m + bus->egress_m, cfg.walk_speed_kmh);
          set(TravelMode::Bus, t[b] / 60.0 + access, line.headway_min / 2.0, dl[b] / 1000.0);
        } else {
          set(TravelMode::Bus, walk_min(walk, cfg.walk_speed_kmh), 0.0, km);
        }
        const auto rail = o == d ? std::nullopt : best_transit_option(net, rail_stations, on, dn);
        if (rail) {
          const auto& line = rail_lines[rail->line];
          double run = 0.0, rkm = 0.0;
          for (std::size_t k = rail->board; k < rail->alight; ++k) {
            run += line.run_times_s[k];
            rkm += line.distances_km[k];
          }
          const double access = walk_min(rail->access_m + rail->egress_m, cfg.walk_speed_kmh);
          set(TravelMode::Rail, run / 60.0 + access, line.headway_s / 120.0, rkm);
        } else {
          set(TravelMode::Rail, walk_min(walk, cfg.walk_speed_kmh), 0.0, km);
        }
      }
    }
  }
  return skims;
}

SkimMatrix build_skims(const Network& net, const SimOutput& out, const std::vector<BusLine>& bus_lines,
                       const std::vector<RailLine>& rail_lines, const SkimConfig& cfg) {
  return build_skims(net, out.observed, bus_lines, rail_lines, out.events, out.horizon_s, cfg);
}

DayToDayResult day_to_day_loop(const ScenarioInputs& inputs, const DayToDayConfig& cfg, const Simulator& simulate) {
  if (cfg.days < 1) throw ConfigError("days", "must be >= 1");
  if (inputs.network == nullptr) throw ConfigError("network", "missing");
  DayToDayResult r;
  ScenarioInputs in = inputs;
  SkimConfig sc = cfg.skims;
  sc.walk_speed_kmh = inputs.config.walk_speed_kmh;
  for (int day = 0; day < cfg.days; ++day) {
    r.last = within_day_loop(in, cfg.learning, simulate);
    DayResult d;
    d.day = day;
    d.shares = mode_shares(in.trips);
    d.trace = r.last.learning.trace;
    d.converged = r.last.learning.converged;
    r.days.push_back(std::move(d));
    r.skims.push_back(build_skims(*in.network, r.last.output, in.bus_lines, in.rail_lines, sc));
    if (cfg.mode_shift && day + 1 < cfg.days) {
      FareSchedule fares = cfg.fares;
      if (!cfg.amod_pricing_by_day.empty())
        fares.amod_pricing_factor =
            cfg.amod_pricing_by_day[std::min<std::size_t>(day + 1, cfg.amod_pricing_by_day.size() - 1)];
      in.trips = mode_shift(in.trips, r.skims.back(), *in.network, fares, cfg.choice);
    }
    // Next day starts from the learned table.
    in.routing = r.last.learning.table;
  }
  r.trips = in.trips;
  return r;
}

}  // namespace mfdsim
