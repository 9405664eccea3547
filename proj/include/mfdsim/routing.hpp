#pragma once

#include <limits>
#include <vector>

#include "mfdsim/network.hpp"

namespace mfdsim {

/// Segment travel times (seconds) per time period. Periods past the last one
/// reuse the last period's values.
class TravelTimeTable {
 public:
  TravelTimeTable() = default;
  TravelTimeTable(std::size_t segments, std::size_t periods, double period_s, double fill = 0.0);

  /// Free-flow traversal times for every segment and period.
  static TravelTimeTable free_flow(const Network& network, double period_s, std::size_t periods);

  std::size_t segments() const { return segments_; }
  std::size_t periods() const { return periods_; }
  double period_s() const { return period_s_; }
  std::size_t period_of(double t_s) const;

  double at(std::size_t segment, std::size_t period) const { return values_[segment * periods_ + period]; }
  double& at(std::size_t segment, std::size_t period) { return values_[segment * periods_ + period]; }
  /// Travel time of a segment entered at time t.
  double time(std::size_t segment, double t_s) const { return at(segment, period_of(t_s)); }

  /// Link traversal time starting at t, chaining segment times.
  double link_time(const Network& network, std::size_t link_ix, double t_s) const;

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool same_shape(const TravelTimeTable& other) const {
    return segments_ == other.segments_ && periods_ == other.periods_;
  }

 private:
  std::size_t segments_ = 0;
  std::size_t periods_ = 0;
  double period_s_ = 300.0;
  std::vector<double> values_;
};

struct Path {
  std::vector<std::size_t> links;     // link indices in travel order
  std::vector<std::size_t> segments;  // segment indices in travel order
  double length_m = 0.0;
  double time_s = 0.0;  // predicted travel time on the table used for routing
  bool found = false;
};

/// Time-dependent shortest path (earliest arrival) on a travel-time table.
/// Ties are broken by lower link index, making results deterministic.
Path shortest_path(const Network& network, const TravelTimeTable& table, NodeId from, NodeId to,
                   double depart_s);

/// Shortest path by physical length.
Path shortest_distance_path(const Network& network, NodeId from, NodeId to);

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// One-to-all (or all-to-one when `reverse`) Dijkstra over fixed link costs.
/// Returns the cost per node index.
std::vector<double> dijkstra_costs(const Network& network, const std::vector<double>& link_cost,
                                   std::size_t source_node_ix, bool reverse = false);

/// Fixed link costs from a table snapshot at period `period`.
std::vector<double> link_costs_at(const Network& network, const TravelTimeTable& table, std::size_t period);
std::vector<double> link_lengths(const Network& network);

/// Builds a Path from a node sequence joined by links (used by tests and
/// bus line construction). Throws DomainError when two nodes are not adjacent.
Path path_from_links(const Network& network, const std::vector<std::size_t>& links);

}  // namespace mfdsim
