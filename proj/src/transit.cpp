#include "mfdsim/transit.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "mfdsim/errors.hpp"

namespace mfdsim {

double dwell_time(const DwellRule& rule, int boardings) {
  return std::max(rule.min_dwell_s, rule.per_boarding_s * std::max(0, boardings));
}

std::vector<double> dispatch_times(const BusLine& line) {
  std::vector<double> out;
  const double h = line.headway_min * 60.0;
  if (!(h > 0.0)) return out;
  for (int k = 0;; ++k) {
    const double t = line.first_dispatch_s + k * h;
    if (t > line.last_dispatch_s + 1e-9) break;
    out.push_back(t);
  }
  return out;
}

std::vector<BusDispatch> dispatch_buses(const std::vector<BusLine>& lines, double window_start,
                                        double window_end) {
  std::vector<BusDispatch> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto times = dispatch_times(lines[i]);
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (times[k] >= window_start && times[k] < window_end)
        out.push_back({lines[i].id, i, static_cast<int>(k), times[k]});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const BusDispatch& a, const BusDispatch& b) {
    return std::tie(a.time_s, a.line_index) < std::tie(b.time_s, b.line_index);
  });
  return out;
}

double RailLine::length_km() const {
  double s = 0.0;
  for (double d : distances_km) s += d;
  return s;
}

RailLeg rail_leg_time(const RailLine& line, NodeId origin, NodeId dest, double boarding_s, double horizon_s) {
  auto find = [&](NodeId n) {
    auto it = std::find(line.stations.begin(), line.stations.end(), n);
    if (it == line.stations.end()) throw DomainError("station " + std::to_string(n) + " not on rail line");
    return static_cast<std::size_t>(it - line.stations.begin());
  };
  const auto o = find(origin);
  const auto d = find(dest);
  if (o >= d) throw DomainError("rail_leg_time: destination must follow origin on the line");

  double offset = 0.0;
  for (std::size_t i = 0; i < o; ++i) offset += line.run_times_s[i];
  double run = 0.0;
  double dist = 0.0;
  for (std::size_t i = o; i < d; ++i) {
    run += line.run_times_s[i];
    dist += line.distances_km[i];
  }

  RailLeg leg;
  const double first_here = line.first_departure_s + offset;
  double k = 0.0;
  if (boarding_s > first_here) {
    k = std::ceil((boarding_s - first_here) / line.headway_s - 1e-9);
  }
  const double origin_dep = line.first_departure_s + k * line.headway_s;
  if (origin_dep > line.last_departure_s + 1e-9) {
    leg.reason = "no departure after boarding time";
    return leg;
  }
  leg.departure_s = first_here + k * line.headway_s;
  leg.arrival_s = leg.departure_s + run;
  leg.wait_s = leg.departure_s - boarding_s;
  leg.distance_km = dist;
  if (leg.arrival_s > horizon_s) {
    leg.reason = "arrival past horizon";
    return leg;
  }
  leg.served = true;
  return leg;
}

std::vector<std::string> validate_bus_line(const BusLine& line, const Network& network) {
  std::vector<std::string> v;
  const std::string label = "bus line " + std::to_string(line.id);
  if (!(line.headway_min > 0.0)) v.push_back(label + ": headway must be > 0");
  if (line.stops.size() < 2) v.push_back(label + ": needs at least 2 stops");
  if (line.last_dispatch_s < line.first_dispatch_s) v.push_back(label + ": last dispatch before first");
  if (line.capacity < 1) v.push_back(label + ": capacity must be >= 1");
  for (std::size_t i = 0; i < line.stops.size(); ++i) {
    if (!network.has_node(line.stops[i])) v.push_back(label + ": unknown stop node " + std::to_string(line.stops[i]));
    if (i > 0 && line.stops[i] == line.stops[i - 1]) v.push_back(label + ": consecutive duplicate stop");
  }
  return v;
}

std::vector<std::string> validate_rail_line(const RailLine& line, const Network& network) {
  std::vector<std::string> v;
  const std::string label = "rail line " + std::to_string(line.id);
  if (line.stations.size() < 2) v.push_back(label + ": needs at least 2 stations");
  if (line.run_times_s.size() + 1 != line.stations.size() || line.distances_km.size() + 1 != line.stations.size())
    v.push_back(label + ": run_times/distances must have one entry per station gap");
  if (!(line.headway_s > 0.0)) v.push_back(label + ": headway must be > 0");
  for (auto s : line.stations)
    if (!network.has_node(s)) v.push_back(label + ": unknown station node " + std::to_string(s));
  for (double t : line.run_times_s)
    if (!(t > 0.0)) v.push_back(label + ": run times must be > 0");
  return v;
}

std::optional<TransitOption> best_transit_option(const Network& network,
                                                 const std::vector<std::vector<NodeId>>& stop_lists,
                                                 NodeId origin, NodeId dest) {
  std::optional<TransitOption> best;
  double best_walk = 0.0;
  for (std::size_t l = 0; l < stop_lists.size(); ++l) {
    const auto& stops = stop_lists[l];
    if (stops.size() < 2) continue;
    std::vector<double> access(stops.size()), egress(stops.size());
    for (std::size_t i = 0; i < stops.size(); ++i) {
      access[i] = network.euclidean_m(origin, stops[i]);
      egress[i] = network.euclidean_m(stops[i], dest);
    }
    for (std::size_t b = 0; b + 1 < stops.size(); ++b) {
      for (std::size_t a = b + 1; a < stops.size(); ++a) {
        const double walk = access[b] + egress[a];
        if (!best || walk < best_walk - 1e-9) {
          best = TransitOption{l, b, a, access[b], egress[a]};
          best_walk = walk;
        }
      }
    }
  }
  return best;
}

std::vector<BusLine> grid_bus_lines(const GridSpec& grid, double headway_min, int stop_every) {
  std::vector<BusLine> lines;
  const int step = std::max(1, stop_every);
  auto id = [&](int r, int c) { return static_cast<NodeId>(r * grid.cols + c); };
  std::int64_t next = 0;
  auto add = [&](std::vector<NodeId> stops) {
    if (stops.size() < 2) return;
    BusLine fwd;
    fwd.id = next++;
    fwd.stops = stops;
    fwd.headway_min = headway_min;
    lines.push_back(fwd);
    BusLine back = fwd;
    back.id = next++;
    std::reverse(back.stops.begin(), back.stops.end());
    lines.push_back(back);
  };
  for (int r = 0; r < grid.rows; ++r) {
    std::vector<NodeId> stops;
    for (int c = 0; c < grid.cols; c += step) stops.push_back(id(r, c));
    if ((grid.cols - 1) % step != 0) stops.push_back(id(r, grid.cols - 1));
    add(stops);
  }
  for (int c = 0; c < grid.cols; ++c) {
    std::vector<NodeId> stops;
    for (int r = 0; r < grid.rows; r += step) stops.push_back(id(r, c));
    if ((grid.rows - 1) % step != 0) stops.push_back(id(grid.rows - 1, c));
    add(stops);
  }
  // Stagger first departures over one headway so lines do not run in lockstep.
  for (std::size_t k = 0; k < lines.size(); ++k)
    lines[k].first_dispatch_s = headway_min * 60.0 * static_cast<double>(k) / static_cast<double>(lines.size());
  return lines;
}

std::vector<RailLine> grid_rail_lines(const GridSpec& grid, double headway_s, double speed_kmh,
                                      int station_every) {
  std::vector<RailLine> lines;
  const int step = std::max(1, station_every);
  auto id = [&](int r, int c) { return static_cast<NodeId>(r * grid.cols + c); };
  std::int64_t next = 0;
  auto add = [&](std::vector<NodeId> stations, double gap_m) {
    if (stations.size() < 2) return;
    RailLine fwd;
    fwd.id = next++;
    fwd.stations = stations;
    for (std::size_t i = 0; i + 1 < stations.size(); ++i) {
      fwd.distances_km.push_back(gap_m / 1000.0);
      fwd.run_times_s.push_back(gap_m / (speed_kmh / 3.6) + 30.0);
    }
    fwd.headway_s = headway_s;
    fwd.first_departure_s = 5.0 * 3600.0;
    fwd.last_departure_s = 24.0 * 3600.0 - 1.0;
    lines.push_back(fwd);
    RailLine back = fwd;
    back.id = next++;
    std::reverse(back.stations.begin(), back.stations.end());
    lines.push_back(back);
  };
  const double gap = grid.spacing_m * step;
  {
    std::vector<NodeId> st;
    for (int c = 0; c < grid.cols; c += step) st.push_back(id(grid.rows / 2, c));
    add(st, gap);
  }
  {
    std::vector<NodeId> st;
    for (int r = 0; r < grid.rows; r += step) st.push_back(id(r, grid.cols / 2));
    add(st, gap);
  }
  return lines;
}

}  // namespace mfdsim
