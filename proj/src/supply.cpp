#include "mfdsim/supply.hpp"

#include <algorithm>
#include <cmath>

#include "mfdsim/errors.hpp"

namespace mfdsim {

SupplyEngine::SupplyEngine(const Network& network, double start_s)
    : net_(&network),
      clock_(start_s),
      moving_(network.segments().size()),
      queue_(network.segments().size()),
      entry_(network.segments().size()),
      credit_(network.segments().size(), 0.0) {}

bool SupplyEngine::has_space(std::size_t s) const {
  return segment_count(s) < net_->segments()[s].storage();
}

double SupplyEngine::segment_density(std::size_t s) const {
  return segment_count(s) / net_->segments()[s].length_km();
}

void SupplyEngine::enter_segment(VehicleEntity& v, std::size_t s, double t) {
  v.offset_m = 0.0;
  v.segment_entry_s = t;
  v.status = VehicleStatus::Driving;
  moving_[s].push_back(v.id);
}

void SupplyEngine::enqueue_entry(VehicleEntity vehicle) {
  if (vehicle.path.empty() || vehicle.path_pos >= vehicle.path.size())
    throw InternalError("vehicle " + std::to_string(vehicle.id) + " dispatched without a path");
  if (entities_.count(vehicle.id)) throw InternalError("duplicate vehicle id " + std::to_string(vehicle.id));
  const std::size_t s = vehicle.path[vehicle.path_pos];
  vehicle.status = VehicleStatus::Parked;
  vehicle.offset_m = 0.0;
  entry_[s].push_back(vehicle.id);
  buffer_of_[vehicle.id] = s;
  entities_.emplace(vehicle.id, std::move(vehicle));
  ++buffered_;
}

void SupplyEngine::place(VehicleEntity vehicle, double offset_m, bool queued) {
  if (vehicle.path.empty() || vehicle.path_pos >= vehicle.path.size())
    throw InternalError("vehicle " + std::to_string(vehicle.id) + " placed without a path");
  if (entities_.count(vehicle.id)) throw InternalError("duplicate vehicle id " + std::to_string(vehicle.id));
  const std::size_t s = vehicle.path[vehicle.path_pos];
  if (!has_space(s)) throw DomainError("segment storage full");
  const double len = net_->segments()[s].length_m;
  vehicle.segment_entry_s = clock_;
  if (queued) {
    vehicle.offset_m = len;
    vehicle.status = VehicleStatus::Queued;
    queue_[s].push_back(vehicle.id);
  } else {
    vehicle.offset_m = std::clamp(offset_m, 0.0, len);
    vehicle.status = VehicleStatus::Driving;
    // Keep moving_ ordered front-to-back by offset.
    auto& m = moving_[s];
    auto it = m.begin();
    while (it != m.end() && entities_.at(*it).offset_m >= vehicle.offset_m) ++it;
    m.insert(it, vehicle.id);
  }
  entities_.emplace(vehicle.id, std::move(vehicle));
  ++on_road_;
}

StepResult SupplyEngine::step(double dt_s) {
  if (!(dt_s > 0.0)) throw DomainError("step length must be > 0");
  const auto& segs = net_->segments();
  const std::size_t n = segs.size();
  StepResult r;
  r.start_s = clock_;
  r.dt_s = dt_s;
  r.counts.assign(n, 0);
  r.exits.assign(n, 0);
  r.queues.assign(n, 0);
  r.speeds.assign(n, 0.0);
  const double t_end = clock_ + dt_s;

  for (std::size_t s = 0; s < n; ++s) r.speeds[s] = speed_from_density(segs[s], segment_density(s));

  // Movement. Vehicles reaching the segment end join the exit queue in the
  // order they arrive there.
  for (std::size_t s = 0; s < n; ++s) {
    auto& m = moving_[s];
    if (m.empty()) continue;
    const double step_m = r.speeds[s] / 3.6 * dt_s;
    const double ff_mps = segs[s].free_flow_kmh / 3.6;
    std::deque<EntityId> still;
    for (EntityId id : m) {
      auto& v = entities_.at(id);
      const double before = v.offset_m;
      v.offset_m = std::min(segs[s].length_m, v.offset_m + step_m);
      const double moved = v.offset_m - before;
      v.odometer_m += moved;
      v.free_flow_s += moved / ff_mps;
      r.max_displacement_excess_m = std::max(r.max_displacement_excess_m, moved - ff_mps * dt_s);
      if (v.offset_m >= segs[s].length_m) {
        v.status = VehicleStatus::Queued;
        queue_[s].push_back(id);
      } else {
        still.push_back(id);
      }
    }
    m.swap(still);
  }

  for (std::size_t s = 0; s < n; ++s) {
    r.counts[s] = segment_count(s);
    r.queues[s] = static_cast<int>(queue_[s].size());
  }

  // Discharge at capacity; a blocked head vehicle blocks the whole queue.
  for (std::size_t s = 0; s < n; ++s) {
    const double per_step = segs[s].capacity_veh_h * dt_s / 3600.0;
    credit_[s] = std::min(credit_[s] + per_step, std::max(1.0, per_step));
    auto& q = queue_[s];
    while (!q.empty() && credit_[s] >= 1.0 - 1e-12) {
      const EntityId id = q.front();
      auto& v = entities_.at(id);
      const bool last = v.path_pos + 1 >= v.path.size();
      if (!last) {
        const std::size_t next = v.path[v.path_pos + 1];
        if (!has_space(next)) break;
        q.pop_front();
        credit_[s] -= 1.0;
        r.exits[s] += 1;
        r.traversals.push_back({s, v.segment_entry_s, t_end});
        ++v.path_pos;
        enter_segment(v, next, t_end);
        continue;
      }
      q.pop_front();
      credit_[s] -= 1.0;
      r.exits[s] += 1;
      r.traversals.push_back({s, v.segment_entry_s, t_end});
      v.status = VehicleStatus::Parked;
      const NodeId node = net_->links()[net_->segment_link(s)].to;
      r.arrivals.push_back({id, node, t_end, std::move(v)});
      entities_.erase(id);
      --on_road_;
    }
  }

  // Entry buffers, FIFO per origin segment.
  for (std::size_t s = 0; s < n; ++s) {
    auto& e = entry_[s];
    while (!e.empty() && has_space(s)) {
      const EntityId id = e.front();
      e.pop_front();
      buffer_of_.erase(id);
      --buffered_;
      ++on_road_;
      enter_segment(entities_.at(id), s, t_end);
      r.entered.push_back({id, t_end});
    }
  }

  clock_ = t_end;
  return r;
}

const VehicleEntity* SupplyEngine::find(EntityId id) const {
  auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : &it->second;
}

bool SupplyEngine::on_road(EntityId id) const { return entities_.count(id) && !buffer_of_.count(id); }
bool SupplyEngine::buffered(EntityId id) const { return buffer_of_.count(id) != 0; }

NodeId SupplyEngine::decision_node(EntityId id) const {
  const auto& v = entities_.at(id);
  const std::size_t s = v.path[v.path_pos];
  const auto& link = net_->links()[net_->segment_link(s)];
  return buffered(id) ? link.from : link.to;
}

double SupplyEngine::time_to_decision_node(EntityId id) const {
  const auto& v = entities_.at(id);
  if (buffered(id)) return 0.0;
  const auto& segs = net_->segments();
  const std::size_t s = v.path[v.path_pos];
  const auto& link = net_->links()[net_->segment_link(s)];
  const double speed = speed_from_density(segs[s], segment_density(s)) / 3.6;
  double t = (segs[s].length_m - v.offset_m) / speed;
  for (std::size_t k = net_->segment_position(s) + 1; k < link.segments.size(); ++k)
    t += segs[link.segments[k]].free_flow_time_s();
  return t;
}

void SupplyEngine::reroute(EntityId id, const std::vector<std::size_t>& tail) {
  if (buffered(id)) throw InternalError("reroute of a buffered vehicle; withdraw it first");
  auto& v = entities_.at(id);
  const std::size_t s = v.path[v.path_pos];
  const std::size_t link_ix = net_->segment_link(s);
  const auto& link = net_->links()[link_ix];
  if (!tail.empty()) {
    const auto& first = net_->links()[net_->segment_link(tail.front())];
    if (first.from != link.to) throw InternalError("reroute tail does not start at the decision node");
  }
  std::vector<std::size_t> path(v.path.begin(), v.path.begin() + static_cast<std::ptrdiff_t>(v.path_pos) + 1);
  for (std::size_t k = net_->segment_position(s) + 1; k < link.segments.size(); ++k) path.push_back(link.segments[k]);
  path.insert(path.end(), tail.begin(), tail.end());
  v.path = std::move(path);
}

std::optional<VehicleEntity> SupplyEngine::withdraw_from_entry(EntityId id) {
  auto b = buffer_of_.find(id);
  if (b == buffer_of_.end()) return std::nullopt;
  auto& e = entry_[b->second];
  e.erase(std::find(e.begin(), e.end(), id));
  buffer_of_.erase(b);
  --buffered_;
  auto node = entities_.extract(id);
  return std::move(node.mapped());
}

SegmentStatsCollector::SegmentStatsCollector(const Network& network, double interval_s, double start_s)
    : net_(&network), interval_s_(interval_s), start_s_(start_s) {
  if (!(interval_s > 0.0)) throw DomainError("statistics interval must be > 0");
  series_.interval_s = interval_s;
}

SegmentInterval& SegmentStatsCollector::interval_for(double t) {
  const auto k = static_cast<std::size_t>(std::floor((t - start_s_) / interval_s_ + 1e-9));
  const std::size_t n = net_->segments().size();
  while (series_.intervals.size() <= k) {
    SegmentInterval iv;
    iv.start_s = start_s_ + static_cast<double>(series_.intervals.size()) * interval_s_;
    iv.density.assign(n, 0.0);
    iv.flow.assign(n, 0.0);
    iv.speed.assign(n, 0.0);
    iv.queue.assign(n, 0.0);
    series_.intervals.push_back(std::move(iv));
  }
  return series_.intervals[k];
}

void SegmentStatsCollector::record(const StepResult& step) {
  auto& iv = interval_for(step.start_s);
  const auto& segs = net_->segments();
  const double w = step.dt_s / interval_s_;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    iv.density[s] += step.counts[s] / segs[s].length_km() * w;
    iv.flow[s] += step.exits[s] * 3600.0 / interval_s_;
    iv.speed[s] += step.speeds[s] * w;
    iv.queue[s] += step.queues[s] * w;
  }
}

SegmentStateSeries SegmentStatsCollector::finish(double end_s) {
  if (end_s > start_s_) interval_for(end_s - 1e-6);
  return series_;
}

}  // namespace mfdsim
