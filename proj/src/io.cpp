#include "mfdsim/io.hpp"

#include <fstream>
#include <map>

#include "mfdsim/csv.hpp"
#include "mfdsim/errors.hpp"

namespace mfdsim::io {

namespace {

const std::vector<std::string> kTrajHeader = {
    "entity_id", "kind",        "mode",  "trip_index", "completed",   "routed_length_m", "leg",    "origin",
    "destination", "start_s",   "end_s", "distance_km", "free_flow_s", "leg_mode",        "status"};
const std::vector<std::string> kSegHeader = {"interval_start_s", "segment_id", "k_veh_km", "q_veh_h", "v_kmh"};
const std::vector<std::string> kEventHeader = {"time_s", "event", "request_id", "vehicle_id", "node", "fleet"};
const std::vector<std::string> kUnservedHeader = {"trip_index", "person_id", "mode", "time_s", "reason"};

std::string fmt_i(std::int64_t v) { return csv::fmt(v); }

double need_double(const csv::Reader& r, const std::string& s) {
  const auto v = csv::to_double(s);
  if (!v) throw ParseError(r.name(), r.line(), "bad number '" + s + "'");
  return *v;
}

std::int64_t need_int(const csv::Reader& r, const std::string& s) {
  const auto v = csv::to_int(s);
  if (!v) throw ParseError(r.name(), r.line(), "bad integer '" + s + "'");
  return *v;
}

void need_fields(const csv::Reader& r, const std::vector<std::string>& f, std::size_t n) {
  if (f.size() != n)
    throw ParseError(r.name(), r.line(), "expected " + std::to_string(n) + " fields, got " + std::to_string(f.size()));
}

TravelMode need_mode(const csv::Reader& r, const std::string& s) {
  const auto m = parse_mode(s);
  if (!m) throw ParseError(r.name(), r.line(), "unknown mode '" + s + "'");
  return *m;
}

std::vector<std::string> sample_header() {
  std::vector<std::string> h = {"t_s", "A_V", "P_V", "gamma", "A_P", "P_P"};
  for (TravelMode m : kAllModes) h.push_back("A_" + std::string(mode_name(m)));
  return h;
}

std::string fleet_name(FleetKind k) { return k == FleetKind::AMOD ? "AMOD" : "MOD"; }

}  // namespace

void write_trajectories(const std::filesystem::path& path, const std::vector<TrajectoryRecord>& records) {
  csv::Writer w(path);
  w.row(kTrajHeader);
  for (const auto& r : records) {
    const std::vector<std::string> head = {fmt_i(r.entity_id), std::string(entity_kind_name(r.kind)),
                                           std::string(mode_name(r.mode)), fmt_i(r.trip_index),
                                           r.completed ? "1" : "0", csv::fmt(r.routed_length_m)};
    if (r.legs.empty()) {
      auto row = head;
      for (const char* v : {"-1", "0", "0", "0", "0", "0", "0"}) row.emplace_back(v);
      row.emplace_back(mode_name(r.mode));
      row.emplace_back(leg_status_name(LegStatus::Driving));
      w.row(row);
      continue;
    }
    for (std::size_t k = 0; k < r.legs.size(); ++k) {
      const auto& l = r.legs[k];
      auto row = head;
      row.insert(row.end(), {fmt_i(static_cast<std::int64_t>(k)), fmt_i(l.origin), fmt_i(l.destination),
                             csv::fmt(l.start_s), csv::fmt(l.end_s), csv::fmt(l.distance_km), csv::fmt(l.free_flow_s),
                             std::string(mode_name(l.mode)), std::string(leg_status_name(l.status))});
      w.row(row);
    }
  }
}

std::vector<TrajectoryRecord> read_trajectories(const std::filesystem::path& path) {
  csv::Reader r(path);
  r.expect_header(kTrajHeader);
  std::vector<TrajectoryRecord> out;
  std::vector<std::string> f;
  while (r.next(f)) {
    need_fields(r, f, kTrajHeader.size());
    const std::int64_t id = need_int(r, f[0]);
    const auto kind = parse_entity_kind(f[1]);
    if (!kind) throw ParseError(r.name(), r.line(), "unknown entity kind '" + f[1] + "'");
    const std::int64_t leg = need_int(r, f[6]);
    if (leg <= 0) {
      TrajectoryRecord rec;
      rec.entity_id = id;
      rec.kind = *kind;
      rec.mode = need_mode(r, f[2]);
      rec.trip_index = need_int(r, f[3]);
      rec.completed = f[4] == "1";
      rec.routed_length_m = need_double(r, f[5]);
      out.push_back(std::move(rec));
      if (leg < 0) continue;
    } else if (out.empty() || out.back().entity_id != id ||
               static_cast<std::int64_t>(out.back().legs.size()) != leg) {
      throw ParseError(r.name(), r.line(), "legs out of order");
    }
    const auto status = parse_leg_status(f[14]);
    if (!status) throw ParseError(r.name(), r.line(), "unknown leg status '" + f[14] + "'");
    out.back().legs.push_back({need_int(r, f[7]), need_int(r, f[8]), need_double(r, f[9]), need_double(r, f[10]),
                               need_double(r, f[11]), need_double(r, f[12]), need_mode(r, f[13]), *status});
  }
  return out;
}

void write_segment_stats(const std::filesystem::path& path, const SegmentStateSeries& series, const Network& net) {
  csv::Writer w(path);
  w.row(kSegHeader);
  const auto& segs = net.segments();
  for (const auto& iv : series.intervals)
    for (std::size_t s = 0; s < segs.size(); ++s)
      w.row({csv::fmt(iv.start_s), fmt_i(segs[s].id), csv::fmt(iv.density[s]), csv::fmt(iv.flow[s]),
             csv::fmt(iv.speed[s])});
}

SegmentStateSeries read_segment_stats(const std::filesystem::path& path, const Network& net, double interval_s) {
  csv::Reader r(path);
  r.expect_header(kSegHeader);
  SegmentStateSeries out;
  out.interval_s = interval_s;
  const std::size_t n = net.segments().size();
  std::vector<std::string> f;
  while (r.next(f)) {
    need_fields(r, f, kSegHeader.size());
    const double t = need_double(r, f[0]);
    if (out.intervals.empty() || out.intervals.back().start_s != t) {
      SegmentInterval iv;
      iv.start_s = t;
      iv.density.assign(n, 0.0);
      iv.flow.assign(n, 0.0);
      iv.speed.assign(n, 0.0);
      iv.queue.assign(n, 0.0);
      out.intervals.push_back(std::move(iv));
    }
    const auto id = need_int(r, f[1]);
    std::size_t s = 0;
    try {
      s = net.segment_index(id);
    } catch (const std::exception&) {
      throw ParseError(r.name(), r.line(), "unknown segment " + f[1]);
    }
    auto& iv = out.intervals.back();
    iv.density[s] = need_double(r, f[2]);
    iv.flow[s] = need_double(r, f[3]);
    iv.speed[s] = need_double(r, f[4]);
  }
  return out;
}

void write_events(const std::filesystem::path& path, const std::vector<ControllerEvent>& events) {
  csv::Writer w(path);
  w.row(kEventHeader);
  for (const auto& e : events)
    w.row({csv::fmt(e.time_s), std::string(event_name(e.type)), fmt_i(e.request), fmt_i(e.vehicle), fmt_i(e.node),
           fleet_name(e.fleet)});
}

std::vector<ControllerEvent> read_events(const std::filesystem::path& path) {
  csv::Reader r(path);
  r.expect_header(kEventHeader);
  std::vector<ControllerEvent> out;
  std::vector<std::string> f;
  while (r.next(f)) {
    need_fields(r, f, kEventHeader.size());
    const auto type = parse_event(f[1]);
    if (!type) throw ParseError(r.name(), r.line(), "unknown event '" + f[1] + "'");
    if (f[5] != "AMOD" && f[5] != "MOD") throw ParseError(r.name(), r.line(), "unknown fleet '" + f[5] + "'");
    out.push_back({need_double(r, f[0]), *type, need_int(r, f[2]), need_int(r, f[3]), need_int(r, f[4]),
                   f[5] == "AMOD" ? FleetKind::AMOD : FleetKind::MOD});
  }
  return out;
}

void write_unserved(const std::filesystem::path& path, const std::vector<UnservedTrip>& unserved) {
  csv::Writer w(path);
  w.row(kUnservedHeader);
  for (const auto& u : unserved) {
    std::string reason = u.reason;
    for (char& c : reason)
      if (c == ',' || c == '\n') c = ';';
    w.row({fmt_i(u.trip_index), fmt_i(u.person_id), std::string(mode_name(u.mode)), csv::fmt(u.time_s), reason});
  }
}

std::vector<UnservedTrip> read_unserved(const std::filesystem::path& path) {
  csv::Reader r(path);
  r.expect_header(kUnservedHeader);
  std::vector<UnservedTrip> out;
  std::vector<std::string> f;
  while (r.next(f)) {
    need_fields(r, f, kUnservedHeader.size());
    out.push_back({need_int(r, f[0]), need_int(r, f[1]), need_mode(r, f[2]), need_double(r, f[3]), f[4]});
  }
  return out;
}

void write_convergence(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows) {
  csv::Writer w(path);
  w.row({"iteration", "max_rel_gap", "mean_tt_s"});
  for (const auto& c : rows) w.row({fmt_i(c.iteration), csv::fmt(c.max_rel_gap), csv::fmt(c.mean_tt_s)});
}

void write_mfd_samples(const std::filesystem::path& path, const std::vector<MfdSample>& samples) {
  csv::Writer w(path);
  w.row(sample_header());
  for (const auto& s : samples) {
    std::vector<std::string> row = {csv::fmt(s.t_s), csv::fmt(s.A_V), csv::fmt(s.P_V),
                                    csv::fmt(s.gamma), csv::fmt(s.A_P), csv::fmt(s.P_P)};
    for (double a : s.A_mode) row.push_back(csv::fmt(a));
    w.row(row);
  }
}

std::vector<MfdSample> read_mfd_samples(const std::filesystem::path& path) {
  csv::Reader r(path);
  const auto header = sample_header();
  r.expect_header(header);
  std::vector<MfdSample> out;
  std::vector<std::string> f;
  while (r.next(f)) {
    need_fields(r, f, header.size());
    MfdSample s;
    s.t_s = need_double(r, f[0]);
    s.A_V = need_double(r, f[1]);
    s.P_V = need_double(r, f[2]);
    s.gamma = need_double(r, f[3]);
    s.A_P = need_double(r, f[4]);
    s.P_P = need_double(r, f[5]);
    for (std::size_t m = 0; m < kModeCount; ++m) s.A_mode[m] = need_double(r, f[6 + m]);
    out.push_back(s);
  }
  return out;
}

void write_hysteresis(const std::filesystem::path& path, const std::vector<EpisodeHysteresis>& episodes) {
  csv::Writer w(path);
  w.row({"episode", "A", "h"});
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& r = episodes[e].result;
    for (std::size_t k = 0; k < r.grid_A.size(); ++k)
      w.row({fmt_i(static_cast<std::int64_t>(e)), csv::fmt(r.grid_A[k]), csv::fmt(r.h[k])});
  }
}

void write_json(const std::filesystem::path& path, const json& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << value.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

json to_json(const MfdParams& p) {
  return {{"kind", p.kind == MfdKind::vMFD ? "vMFD" : "pMFD"},
          {"a", p.a},
          {"b", p.b},
          {"c", p.c},
          {"d", p.d},
          {"r", p.r},
          {"rho", p.rho}};
}

json to_json(const FitReport& r) {
  return {{"params", to_json(r.params)},
          {"Z", r.Z},
          {"RMSN", r.rmsn},
          {"samples", r.samples},
          {"flags",
           {{"speed_constraint_satisfied", r.speed_constraint_satisfied},
            {"speed_constraint_active", r.speed_constraint_active},
            {"production_constraint_active", r.production_constraint_active}}},
          {"solver",
           {{"iterations", r.iterations},
            {"penalty_rounds", r.penalty_rounds},
            {"start_index", r.start_index},
            {"trace", r.trace},
            {"trace_stage", r.trace_stage}}}};
}

json to_json(const FleetKpis& k) {
  return {{"requests", k.requests},
          {"served", k.served},
          {"expired", k.expired},
          {"mean_wait_min", k.mean_wait_min},
          {"service_rate", k.service_rate},
          {"empty_vkt_share", k.empty_vkt_share},
          {"fleet_vkt_km", k.fleet_vkt_km},
          {"utilization", k.utilization}};
}

json to_json(const ImpactReport& r) {
  auto row = [](const ImpactRow& x) {
    return json{{"vkt_km", x.vkt_km},
                {"fuel_kwh", x.fuel_kwh},
                {"electric_kwh", x.electric_kwh},
                {"nox_kg", x.nox_kg},
                {"pm_kg", x.pm_kg}};
  };
  json modes = json::object();
  for (const auto& x : r.rows) modes[std::string(mode_name(x.mode))] = row(x);
  return {{"tsi", r.tsi}, {"modes", modes}, {"total", row(r.total)}};
}

json to_json(const ConservationSample& c) {
  return {{"time_s", c.time_s},     {"on_road", c.on_road},     {"buffered", c.buffered},
          {"off_road", c.off_road}, {"completed", c.completed}, {"not_departed", c.not_departed},
          {"rejected", c.rejected}, {"total", c.total}};
}

}  // namespace mfdsim::io
