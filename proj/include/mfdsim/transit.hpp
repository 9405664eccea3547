#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfdsim/network.hpp"

namespace mfdsim {

/// Bus dwell: max(min_dwell, per-boarding time * boardings).
struct DwellRule {
  double min_dwell_s = 10.0;
  double per_boarding_s = 3.0;
};

double dwell_time(const DwellRule& rule, int boardings);

struct BusLine {
  std::int64_t id = 0;
  std::vector<NodeId> stops;
  double headway_min = 10.0;
  double first_dispatch_s = 0.0;
  double last_dispatch_s = 86400.0;
  DwellRule dwell;
  int capacity = 60;
};

struct BusDispatch {
  std::int64_t line_id = 0;
  std::size_t line_index = 0;
  int run = 0;  // 0-based dispatch number on the line
  double time_s = 0.0;
};

/// Dispatch instants of one line: first, first + h, ... up to last (inclusive).
std::vector<double> dispatch_times(const BusLine& line);

/// Dispatches of all lines falling in [window_start, window_end), ordered by
/// (time, line index).
std::vector<BusDispatch> dispatch_buses(const std::vector<BusLine>& lines, double window_start, double window_end);

/// Schedule-based rail line running off the road network. Stations are road
/// nodes (access points); trains run station to station with fixed times.
struct RailLine {
  std::int64_t id = 0;
  std::vector<NodeId> stations;
  std::vector<double> run_times_s;    // between consecutive stations
  std::vector<double> distances_km;   // between consecutive stations
  double headway_s = 300.0;
  double first_departure_s = 0.0;     // from the first station
  double last_departure_s = 86400.0;  // from the first station

  double length_km() const;
};

struct RailLeg {
  bool served = false;
  double departure_s = 0.0;
  double arrival_s = 0.0;
  double wait_s = 0.0;
  double distance_km = 0.0;
  std::string reason;  // set when not served
};

/// Next train from `origin` at or after `boarding_s`, arriving at `dest`.
/// Unserved when the last train has left or arrival falls past the horizon.
/// Throws DomainError if the stations are not on the line in travel order.
RailLeg rail_leg_time(const RailLine& line, NodeId origin, NodeId dest, double boarding_s,
                      double horizon_s = 86400.0);

std::vector<std::string> validate_bus_line(const BusLine& line, const Network& network);
std::vector<std::string> validate_rail_line(const RailLine& line, const Network& network);

/// Best single-line transit option for an OD pair: minimum total access plus
/// egress walking distance with boarding before alighting.
struct TransitOption {
  std::size_t line = 0;
  std::size_t board = 0;
  std::size_t alight = 0;
  double access_m = 0.0;
  double egress_m = 0.0;
};

std::optional<TransitOption> best_transit_option(const Network& network,
                                                 const std::vector<std::vector<NodeId>>& stop_lists,
                                                 NodeId origin, NodeId dest);


/// Bus lines along every row and column in both directions, stopping at
/// every `stop_every`-th node. First dispatches are staggered over one headway.
std::vector<BusLine> grid_bus_lines(const GridSpec& grid, double headway_min, int stop_every = 1);

/// Two-way rail lines along the middle row and middle column.
std::vector<RailLine> grid_rail_lines(const GridSpec& grid, double headway_s, double speed_kmh = 40.0,
                                      int station_every = 3);

}  // namespace mfdsim
