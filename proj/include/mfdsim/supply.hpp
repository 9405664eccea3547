#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mfdsim/modes.hpp"
#include "mfdsim/network.hpp"

namespace mfdsim {

using EntityId = std::int64_t;

enum class VehicleStatus : std::uint8_t { Driving, Queued, Dwelling, Parked, Cruising };

/// A road vehicle inside the supply engine. `path` holds segment indices; the
/// vehicle is on path[path_pos] at `offset_m` from the segment start.
struct VehicleEntity {
  EntityId id = 0;
  TravelMode mode = TravelMode::Car;
  int capacity = 1;
  int occupancy = 0;
  std::vector<std::size_t> path;
  std::size_t path_pos = 0;
  double offset_m = 0.0;
  VehicleStatus status = VehicleStatus::Parked;
  double odometer_m = 0.0;
  /// Free-flow time of the distance driven so far.
  double free_flow_s = 0.0;
  /// Time the vehicle entered its current segment.
  double segment_entry_s = 0.0;
};

struct Arrival {
  EntityId id = 0;
  NodeId node = 0;
  double time_s = 0.0;
  VehicleEntity entity;
};

struct Entered {
  EntityId id = 0;
  double time_s = 0.0;
};

struct Traversal {
  std::size_t segment = 0;
  double entry_s = 0.0;
  double exit_s = 0.0;
};

/// Everything one step produced. `counts`, `speeds` and `queues` are the
/// per-segment state used for statistics (counts taken before discharge).
struct StepResult {
  double start_s = 0.0;
  double dt_s = 0.0;
  std::vector<Arrival> arrivals;
  std::vector<Entered> entered;
  std::vector<Traversal> traversals;
  std::vector<int> counts;
  std::vector<int> exits;
  std::vector<int> queues;
  std::vector<double> speeds;
  /// max over moving vehicles of displacement minus v_f * dt (metres).
  double max_displacement_excess_m = 0.0;
};

/// Mesoscopic link-queue supply model. Each step: segment speeds from
/// densities, movement toward the segment end, queueing at the end, discharge
/// at capacity into downstream segments with free storage, then insertion
/// from origin entry buffers.
class SupplyEngine {
 public:
  explicit SupplyEngine(const Network& network, double start_s = 0.0);

  double clock() const { return clock_; }

  /// Queues a vehicle at the entry buffer of path[0]. Throws InternalError on
  /// an empty path or a duplicate id.
  void enqueue_entry(VehicleEntity vehicle);

  /// Puts a vehicle directly on its current segment (tests, warm starts).
  /// Throws DomainError when the segment storage is full.
  void place(VehicleEntity vehicle, double offset_m, bool queued = false);

  StepResult step(double dt_s);

  const VehicleEntity* find(EntityId id) const;
  bool on_road(EntityId id) const;
  bool buffered(EntityId id) const;

  /// Node the vehicle reaches next where a new route can start: the end of
  /// its current link when on the road, its origin node when buffered.
  NodeId decision_node(EntityId id) const;

  /// Estimated seconds until an on-road vehicle reaches decision_node(), using
  /// the current segment speeds and free-flow times beyond.
  double time_to_decision_node(EntityId id) const;

  /// Replaces the route after the current link of an on-road vehicle. `tail`
  /// must start at decision_node(id); an empty tail ends the trip there.
  void reroute(EntityId id, const std::vector<std::size_t>& tail);

  /// Removes a vehicle that is still waiting in an entry buffer.
  std::optional<VehicleEntity> withdraw_from_entry(EntityId id);

  std::size_t on_road_count() const { return on_road_; }
  std::size_t buffered_count() const { return buffered_; }
  int segment_count(std::size_t s) const { return static_cast<int>(moving_[s].size() + queue_[s].size()); }
  std::size_t queue_length(std::size_t s) const { return queue_[s].size(); }
  double segment_density(std::size_t s) const;
  const Network& network() const { return *net_; }

 private:
  bool has_space(std::size_t s) const;
  void enter_segment(VehicleEntity& v, std::size_t s, double t);

  const Network* net_;
  double clock_;
  std::unordered_map<EntityId, VehicleEntity> entities_;
  std::unordered_map<EntityId, std::size_t> buffer_of_;  // buffered id -> segment
  std::vector<std::deque<EntityId>> moving_;
  std::vector<std::deque<EntityId>> queue_;
  std::vector<std::deque<EntityId>> entry_;
  std::vector<double> credit_;
  std::size_t on_road_ = 0;
  std::size_t buffered_ = 0;
};

/// Per-interval segment statistics: time-mean density (veh/km), flow (veh/h
/// from exits), time-mean model speed (km/h) and time-mean queue length.
struct SegmentInterval {
  double start_s = 0.0;
  std::vector<double> density;
  std::vector<double> flow;
  std::vector<double> speed;
  std::vector<double> queue;
};

struct SegmentStateSeries {
  double interval_s = 300.0;
  std::vector<SegmentInterval> intervals;
};

/// Folds StepResults into fixed intervals. A step is attributed to the
/// interval holding its start time.
class SegmentStatsCollector {
 public:
  SegmentStatsCollector(const Network& network, double interval_s, double start_s = 0.0);

  void record(const StepResult& step);
  /// Closes every interval up to end_s and returns the series.
  SegmentStateSeries finish(double end_s);

 private:
  SegmentInterval& interval_for(double t);

  const Network* net_;
  double interval_s_;
  double start_s_;
  SegmentStateSeries series_;
};

}  // namespace mfdsim
