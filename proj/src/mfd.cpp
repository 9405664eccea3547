#include "mfdsim/mfd.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mfdsim/errors.hpp"

namespace mfdsim {

namespace {

double weighted(std::span<const double> v, std::span<const double> l, double total, const char* what) {
  if (v.empty()) throw DomainError(std::string(what) + ": empty sensor subset");
  if (v.size() != l.size()) throw DomainError(std::string(what) + ": size mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    num += v[i] * l[i];
    den += l[i];
  }
  if (!(den > 0.0)) throw DomainError(std::string(what) + ": zero sensor length");
  return num / den * total;
}

template <typename Get>
double over_sensors(const SegmentInterval& iv, const Network& net, const SensorSet& sensors, Get get,
                    const char* what) {
  std::vector<double> v, l;
  auto add = [&](std::size_t s) {
    v.push_back(get(iv, s));
    l.push_back(net.segments()[s].length_km());
  };
  if (sensors.segments.empty()) {
    for (std::size_t s = 0; s < net.segments().size(); ++s) add(s);
  } else {
    for (std::size_t s : sensors.segments) add(s);
  }
  return weighted(v, l, network_total_length(net), what);
}

std::size_t interval_count(double interval_s, double horizon_s) {
  if (!(interval_s > 0.0)) throw DomainError("interval must be > 0");
  return static_cast<std::size_t>(std::ceil(horizon_s / interval_s - 1e-9));
}

/// Adds the overlap of [a, b) with each interval, divided by the interval length.
void spread(std::vector<double>& acc, double a, double b, double interval_s) {
  if (!(b > a)) return;
  const auto n = acc.size();
  auto i0 = static_cast<std::size_t>(std::max(0.0, std::floor(a / interval_s)));
  for (std::size_t i = i0; i < n; ++i) {
    const double lo = static_cast<double>(i) * interval_s;
    const double hi = lo + interval_s;
    if (lo >= b) break;
    const double o = std::min(b, hi) - std::max(a, lo);
    if (o > 0.0) acc[i] += o / interval_s;
  }
}

}  // namespace

double accumulation(std::span<const double> density, std::span<const double> length_km, double network_km) {
  return weighted(density, length_km, network_km, "accumulation");
}

double production(std::span<const double> flow, std::span<const double> length_km, double network_km) {
  return weighted(flow, length_km, network_km, "production");
}

double gamma(std::span<const double> density) {
  const std::size_t n = density.size();
  if (n < 2) throw DomainError("gamma: needs at least 2 segments");
  double mean = 0.0;
  for (double k : density) mean += k;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double k : density) ss += (k - mean) * (k - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double passenger_production(std::span<const Completion> completions, double interval_s) {
  if (!(interval_s > 0.0)) throw DomainError("passenger_production: interval must be > 0");
  const double hours = interval_s / 3600.0;
  std::map<TravelMode, std::pair<double, double>> by_mode;  // count, distance sum
  for (const auto& c : completions) {
    if (!mode_flags(c.mode).contributes_passenger_flow) continue;
    auto& e = by_mode[c.mode];
    e.first += 1.0;
    e.second += c.distance_km;
  }
  double p = 0.0;
  for (const auto& [m, e] : by_mode) {
    const double tc = e.first / hours;
    const double td = e.second / e.first;
    p += tc * td;
  }
  return p;
}

double accumulation(const SegmentInterval& iv, const Network& net, const SensorSet& sensors) {
  return over_sensors(
      iv, net, sensors, [](const SegmentInterval& x, std::size_t s) { return x.density[s]; }, "accumulation");
}

double production(const SegmentInterval& iv, const Network& net, const SensorSet& sensors) {
  return over_sensors(
      iv, net, sensors, [](const SegmentInterval& x, std::size_t s) { return x.flow[s]; }, "production");
}

std::vector<std::array<double, kModeCount>> accumulation_by_mode(const std::vector<TrajectoryRecord>& records,
                                                                  double interval_s, double horizon_s) {
  const std::size_t n = interval_count(interval_s, horizon_s);
  std::vector<std::vector<double>> per_mode(kModeCount, std::vector<double>(n, 0.0));
  for (const auto& r : records) {
    if (r.kind != EntityKind::Vehicle) continue;
    for (const auto& l : r.legs) {
      const auto f = mode_flags(l.mode);
      if (!f.road_based || !f.contributes_vehicle_flow) continue;
      spread(per_mode[mode_index(l.mode)], l.start_s, std::min(l.end_s, horizon_s), interval_s);
    }
  }
  std::vector<std::array<double, kModeCount>> out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < kModeCount; ++m) out[i][m] = per_mode[m][i];
  return out;
}

std::vector<double> passenger_accumulation(const std::vector<TrajectoryRecord>& records, double interval_s,
                                           double horizon_s) {
  std::vector<double> acc(interval_count(interval_s, horizon_s), 0.0);
  for (const auto& r : records) {
    if (r.kind != EntityKind::Passenger || r.legs.empty()) continue;
    spread(acc, r.start_s(), std::min(r.end_s(), horizon_s), interval_s);
  }
  return acc;
}

std::vector<double> passenger_production_series(const std::vector<TrajectoryRecord>& records, double interval_s,
                                                double horizon_s) {
  const std::size_t n = interval_count(interval_s, horizon_s);
  std::vector<std::vector<Completion>> bins(n);
  for (const auto& r : records) {
    if (r.kind != EntityKind::Passenger || !r.completed || r.legs.empty()) continue;
    const double end = r.end_s();
    if (end < 0.0 || end >= horizon_s) continue;
    const auto i = std::min(n - 1, static_cast<std::size_t>(end / interval_s));
    bins[i].push_back({r.mode, r.distance_km()});
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out[i] = passenger_production(bins[i], interval_s);
  return out;
}

std::vector<MfdSample> compute_samples(const SimOutput& out, const Network& net, const SensorSet& sensors) {
  const double iv = out.segments.interval_s;
  const double horizon = out.horizon_s;
  const auto modes = accumulation_by_mode(out.trajectories, iv, horizon);
  const auto ap = passenger_accumulation(out.trajectories, iv, horizon);
  const auto pp = passenger_production_series(out.trajectories, iv, horizon);
  const std::size_t n = std::min(out.segments.intervals.size(), modes.size());
  std::vector<MfdSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = out.segments.intervals[i];
    MfdSample s;
    s.t_s = x.start_s;
    s.A_V = accumulation(x, net, sensors);
    s.P_V = production(x, net, sensors);
    if (sensors.segments.empty()) {
      s.gamma = x.density.size() >= 2 ? gamma(x.density) : 0.0;
    } else {
      std::vector<double> k;
      for (std::size_t seg : sensors.segments) k.push_back(x.density[seg]);
      s.gamma = k.size() >= 2 ? gamma(k) : 0.0;
    }
    s.A_P = ap[i];
    s.P_P = pp[i];
    s.A_mode = modes[i];
    samples.push_back(s);
  }
  return samples;
}

namespace {
double checked_exp(double e) {
  if (!std::isfinite(e) || e > 700.0) throw DomainError("MFD exponent overflow");
  return std::exp(e);
}
}  // namespace

double eval_vmfd(const MfdParams& p, double A, double g) {
  if (A < 0.0) throw DomainError("eval_vmfd: accumulation must be >= 0");
  if (A == 0.0) return 0.0;
  const double e = ((p.b * A + p.c) * A + p.d) * A + p.r * g;
  return p.a * A * checked_exp(e);
}

double eval_pmfd(const MfdParams& p, double A, double g, double A_P) {
  if (A < 0.0 || A_P < 0.0) throw DomainError("eval_pmfd: accumulations must be >= 0");
  if (A == 0.0) return 0.0;
  const double e = ((p.b * A + p.c) * A + p.d) * A + p.r * g + p.rho * A_P;
  return p.a * A * checked_exp(e);
}

double rmsn(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size() || observed.empty()) throw DomainError("rmsn: series lengths differ or empty");
  double ss = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = predicted[i] - observed[i];
    ss += e * e;
    sum += observed[i];
  }
  if (sum == 0.0) throw DomainError("rmsn: observed series sums to zero");
  return std::sqrt(static_cast<double>(observed.size()) * ss) / sum;
}

double tsi(std::span<const TripSpeed> trips) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& t : trips) {
    if (t.distance_km <= 0.0) continue;
    if (!(t.free_flow_s > 0.0) || !(t.travel_time_s > 0.0)) throw DomainError("tsi: free-flow and travel time must be > 0");
    // TS / TS0 = (TD / TT) / (TD / TT0)
    num += t.distance_km * (t.free_flow_s / t.travel_time_s);
    den += t.distance_km;
  }
  if (!(den > 0.0)) throw DomainError("tsi: zero total distance");
  return num / den;
}

std::vector<TripSpeed> trip_speeds(const std::vector<TrajectoryRecord>& records, double from_s, double to_s) {
  std::vector<TripSpeed> out;
  for (const auto& r : records) {
    if (r.kind != EntityKind::Vehicle) continue;
    for (const auto& l : r.legs) {
      if (!mode_flags(l.mode).road_based) continue;
      if (l.start_s < from_s || l.start_s >= to_s) continue;
      if (l.distance_km <= 0.0 || l.free_flow_s <= 0.0 || l.end_s <= l.start_s) continue;
      out.push_back({l.distance_km, l.end_s - l.start_s, l.free_flow_s});
    }
  }
  return out;
}

double ivd(double ivtt_min, double ivtt_free_min, std::size_t* clamped) {
  const double d = ivtt_min - ivtt_free_min;
  if (d < 0.0) {
    if (clamped) ++*clamped;
    return 0.0;
  }
  return d;
}

double mean_ivd(const std::vector<TrajectoryRecord>& records, double from_s, double to_s, std::size_t* clamped) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.kind != EntityKind::Passenger || !r.completed || r.legs.empty()) continue;
    if (r.start_s() < from_s || r.start_s() >= to_s) continue;
    const double iv = r.in_vehicle_s();
    if (iv <= 0.0) continue;
    sum += ivd(iv / 60.0, r.in_vehicle_free_flow_s() / 60.0, clamped);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace mfdsim
