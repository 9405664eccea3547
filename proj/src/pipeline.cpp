#include "mfdsim/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "mfdsim/errors.hpp"

namespace mfdsim {

using nlohmann::json;

namespace {

/// Episodes shorter than this many samples, and dips shorter than it, are
/// treated as noise when splitting a simulated day.
constexpr std::size_t kEpisodeMinRun = 3;

std::string fleet_kind_name(FleetKind k) { return k == FleetKind::AMOD ? "AMOD" : "MOD"; }

json shares_json(const std::array<double, kModeCount>& s) {
  json j = json::object();
  for (TravelMode m : kAllModes) j[std::string(mode_name(m))] = s[mode_index(m)];
  return j;
}

json trace_json(const std::vector<ConvergenceRow>& rows) {
  json a = json::array();
  for (const auto& r : rows) a.push_back({{"iteration", r.iteration}, {"max_rel_gap", r.max_rel_gap}, {"mean_tt_s", r.mean_tt_s}});
  return a;
}

/// null when the value cannot be computed (no trips in the window).
json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> safe_tsi(const std::vector<TrajectoryRecord>& recs, double from, double to) {
  const auto trips = trip_speeds(recs, from, to);
  if (trips.empty()) return std::nullopt;
  try {
    return tsi(trips);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

}  // namespace

SimulationRun simulate_scenario(const Scenario& s, const Simulator& simulate) {
  SimulationRun run;
  ScenarioInputs in = s.inputs();
  if (s.config.initial_mode_choice) {
    const double period = s.config.stats_interval_s;
    const auto periods = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(s.config.horizon_s / period)));
    const auto t0 = TravelTimeTable::free_flow(s.network, period, periods);
    SkimConfig sc;
    sc.walk_speed_kmh = in.config.walk_speed_kmh;
    const auto skims = build_skims(s.network, t0, s.bus_lines, s.rail_lines, {}, s.config.horizon_s, sc);
    in.trips = mode_shift(in.trips, skims, s.network, s.config.fares, s.config.choice);
  }
  run.initial_trips = in.trips;
  run.result = day_to_day_loop(in, s.day_to_day(), simulate);
  return run;
}

std::vector<std::string> write_simulation(const std::filesystem::path& dir, const Scenario& s,
                                          const SimulationRun& run) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  write_network_csv(s.network, dir / "network");
  for (const char* f : {"nodes.csv", "links.csv", "segments.csv", "zones.csv"})
    if (std::filesystem::exists(dir / "network" / f)) files.push_back(std::string("network/") + f);

  const SimOutput& out = run.result.last.output;
  write_trips(dir / "trips.csv", run.result.trips);
  files.emplace_back("trips.csv");
  io::write_trajectories(dir / "trajectories.csv", out.trajectories);
  files.emplace_back("trajectories.csv");
  io::write_segment_stats(dir / "segment_stats.csv", out.segments, s.network);
  files.emplace_back("segment_stats.csv");
  io::write_events(dir / "events.csv", out.events);
  files.emplace_back("events.csv");
  io::write_unserved(dir / "unserved.csv", out.unserved);
  files.emplace_back("unserved.csv");
  io::write_convergence(dir / "convergence.csv", run.result.last.learning.trace);
  files.emplace_back("convergence.csv");
  for (std::size_t d = 0; d < run.result.skims.size(); ++d) {
    const std::string name = "skims_day" + std::to_string(d) + ".csv";
    run.result.skims[d].write_csv(dir / name, static_cast<int>(d));
    files.push_back(name);
  }

  json info;
  info["name"] = s.config.name;
  info["seed"] = s.config.seed;
  info["horizon_s"] = out.horizon_s;
  info["stats_interval_s"] = out.segments.interval_s;
  info["dt_s"] = s.config.dt_s;
  info["trip_count"] = out.trip_count;
  info["boarded_passengers"] = out.boarded_passengers;
  info["unserved"] = out.unserved.size();
  info["max_displacement_excess_m"] = out.max_displacement_excess_m;
  json fleets = json::array();
  for (const auto& f : out.fleets)
    fleets.push_back({{"kind", fleet_kind_name(f.kind)}, {"four_seaters", f.four_seaters}, {"six_seaters", f.six_seaters}});
  info["fleets"] = fleets;
  info["initial_mode_shares"] = shares_json(mode_shares(run.initial_trips));
  json days = json::array();
  for (const auto& d : run.result.days)
    days.push_back({{"day", d.day}, {"mode_shares", shares_json(d.shares)}, {"converged", d.converged},
                    {"convergence", trace_json(d.trace)}});
  info["days"] = days;
  bool holds = true;
  for (const auto& c : out.conservation) holds = holds && c.holds();
  info["conservation"] = {{"samples", out.conservation.size()}, {"all_hold", holds},
                          {"last", out.conservation.empty() ? json(nullptr) : io::to_json(out.conservation.back())}};
  io::write_json(dir / "run.json", info);
  files.emplace_back("run.json");
  return files;
}

LoadedRun load_run(const std::filesystem::path& dir) {
  for (const char* f : {"run.json", "trajectories.csv", "segment_stats.csv", "events.csv", "unserved.csv"})
    if (!std::filesystem::exists(dir / f)) throw ParseError((dir / f).string(), 0, "missing input file");
  LoadedRun r;
  r.info = io::read_json(dir / "run.json");
  r.network = load_network_csv(dir / "network");
  try {
    r.output.horizon_s = r.info.at("horizon_s").get<double>();
    r.output.trip_count = r.info.at("trip_count").get<std::size_t>();
    r.output.boarded_passengers = r.info.at("boarded_passengers").get<std::size_t>();
    for (const auto& f : r.info.at("fleets")) {
      FleetSpec s;
      s.kind = f.at("kind").get<std::string>() == "AMOD" ? FleetKind::AMOD : FleetKind::MOD;
      s.four_seaters = f.at("four_seaters").get<int>();
      s.six_seaters = f.at("six_seaters").get<int>();
      r.output.fleets.push_back(s);
    }
    r.output.segments = io::read_segment_stats(dir / "segment_stats.csv", r.network,
                                               r.info.at("stats_interval_s").get<double>());
  } catch (const json::exception& e) {
    throw ParseError((dir / "run.json").string(), 0, e.what());
  }
  r.output.trajectories = io::read_trajectories(dir / "trajectories.csv");
  r.output.events = io::read_events(dir / "events.csv");
  r.output.unserved = io::read_unserved(dir / "unserved.csv");
  return r;
}

Analysis analyze_run(const LoadedRun& run) {
  const SimOutput& out = run.output;
  Analysis a;
  a.samples = compute_samples(out, run.network);

  std::vector<BranchSample> branch;
  for (const auto& s : a.samples) branch.push_back({s.t_s, s.A_V, s.P_V});
  json episodes = json::array();
  double h_total = 0.0;
  for (auto& ep : split_branches(branch, 0.2, kEpisodeMinRun)) {
    io::EpisodeHysteresis eh;
    eh.result = hysteresis(ep.loading, ep.unloading);
    eh.episode = std::move(ep);
    if (eh.result.ok) h_total += eh.result.total;
    episodes.push_back({{"start_s", eh.episode.start_s},
                        {"peak_s", eh.episode.peak_s},
                        {"end_s", eh.episode.end_s},
                        {"ok", eh.result.ok},
                        {"diagnostic", eh.result.diagnostic},
                        {"total", eh.result.total},
                        {"max_h", eh.result.max_h}});
    a.hysteresis.push_back(std::move(eh));
  }

  double max_av = 0, max_pv = 0, max_g = 0, max_ap = 0, max_pp = 0, sum_pv = 0, sum_pp = 0;
  for (const auto& s : a.samples) {
    max_av = std::max(max_av, s.A_V);
    max_pv = std::max(max_pv, s.P_V);
    max_g = std::max(max_g, s.gamma);
    max_ap = std::max(max_ap, s.A_P);
    max_pp = std::max(max_pp, s.P_P);
    sum_pv += s.P_V;
    sum_pp += s.P_P;
  }
  const double n = a.samples.empty() ? 1.0 : static_cast<double>(a.samples.size());

  const auto hours = static_cast<int>(std::ceil(out.horizon_s / 3600.0));
  json tsi_h = json::array(), ivd_h = json::array();
  std::size_t clamped = 0;
  for (int h = 0; h < hours; ++h) {
    const double from = h * 3600.0, to = std::min(out.horizon_s, from + 3600.0);
    tsi_h.push_back(optional_number(safe_tsi(out.trajectories, from, to)));
    ivd_h.push_back(mean_ivd(out.trajectories, from, to));
  }
  const auto tsi_all = safe_tsi(out.trajectories, 0.0, out.horizon_s);
  const double ivd_all = mean_ivd(out.trajectories, 0.0, out.horizon_s, &clamped);

  const double tsi_for_emissions = std::clamp(tsi_all.value_or(1.0), 1e-9, 1.0);
  a.impact = impact_report(impact_inputs(out, tsi_for_emissions));

  json vkt = json::object();
  for (const auto& row : a.impact.rows) vkt[std::string(mode_name(row.mode))] = row.vkt_km;
  vkt["total"] = a.impact.total.vkt_km;

  json fleets = json::object();
  for (const auto& f : out.fleets) {
    std::vector<ControllerEvent> ev;
    for (const auto& e : out.events)
      if (e.fleet == f.kind) ev.push_back(e);
    const auto k = fleet_kpis(ev, fleet_leg_summaries(out, f.kind), static_cast<std::size_t>(f.size()), out.horizon_s);
    fleets[fleet_kind_name(f.kind)] = io::to_json(k);
  }

  std::size_t completed = 0, passengers = 0;
  for (const auto& r : out.trajectories)
    if (r.kind == EntityKind::Passenger) {
      ++passengers;
      if (r.completed) ++completed;
    }

  a.kpis = {{"scenario", run.info.value("name", "")},
            {"horizon_s", out.horizon_s},
            {"mfd",
             {{"max_A_V", max_av},
              {"max_P_V", max_pv},
              {"max_gamma", max_g},
              {"max_A_P", max_ap},
              {"max_P_P", max_pp},
              {"mean_P_V", sum_pv / n},
              {"mean_P_P", sum_pp / n}}},
            {"vkt_km", vkt},
            {"tsi", {{"all_day", optional_number(tsi_all)}, {"hourly", tsi_h}}},
            {"ivd", {{"mean_min", ivd_all}, {"hourly", ivd_h}, {"clamped", clamped}}},
            {"hysteresis", {{"total", h_total}, {"episodes", episodes}}},
            {"fleets", fleets},
            {"energy",
             {{"fuel_kwh", a.impact.total.fuel_kwh},
              {"electric_kwh", a.impact.total.electric_kwh},
              {"nox_kg", a.impact.total.nox_kg},
              {"pm_kg", a.impact.total.pm_kg}}},
            {"trips",
             {{"count", out.trip_count},
              {"passengers", passengers},
              {"completed", completed},
              {"unserved", out.unserved.size()}}}};
  return a;
}

std::vector<std::string> write_analysis(const std::filesystem::path& dir, const Analysis& a) {
  std::filesystem::create_directories(dir);
  io::write_mfd_samples(dir / "mfd_samples.csv", a.samples);
  io::write_hysteresis(dir / "hysteresis.csv", a.hysteresis);
  io::write_json(dir / "kpis.json", a.kpis);
  io::write_json(dir / "impact_report.json", io::to_json(a.impact));
  return {"mfd_samples.csv", "hysteresis.csv", "kpis.json", "impact_report.json"};
}

json compare_kpis(const std::vector<std::string>& names, const std::vector<json>& kpis) {
  if (names.size() != kpis.size() || kpis.size() < 2) throw ConfigError("report", "needs at least two analyses");
  const double h0 = kpis.front().at("horizon_s").get<double>();
  for (std::size_t k = 1; k < kpis.size(); ++k)
    if (kpis[k].at("horizon_s").get<double>() != h0)
      throw ConfigError("horizon_s", "scenario '" + names[k] + "' has a different horizon");

  static const std::vector<std::string> metrics = {
      "/mfd/max_A_V",       "/mfd/max_P_V",         "/mfd/max_gamma",   "/mfd/max_A_P",    "/mfd/max_P_P",
      "/mfd/mean_P_V",      "/mfd/mean_P_P",        "/vkt_km/total",    "/tsi/all_day",    "/ivd/mean_min",
      "/hysteresis/total",  "/energy/fuel_kwh",     "/energy/electric_kwh", "/energy/nox_kg", "/energy/pm_kg"};
  json out;
  out["scenarios"] = names;
  out["baseline"] = names.front();
  out["horizon_s"] = h0;
  json m = json::object();
  for (const auto& path : metrics) {
    const json::json_pointer ptr(path);
    json values = json::array(), delta = json::array(), rel = json::array();
    const json& base = kpis.front().contains(ptr) ? kpis.front().at(ptr) : json(nullptr);
    for (const auto& k : kpis) {
      const json v = k.contains(ptr) ? k.at(ptr) : json(nullptr);
      values.push_back(v);
      if (!v.is_number() || !base.is_number()) {
        delta.push_back(nullptr);
        rel.push_back(nullptr);
        continue;
      }
      const double d = v.get<double>() - base.get<double>();
      delta.push_back(d);
      rel.push_back(base.get<double>() != 0.0 ? json(d / base.get<double>()) : json(nullptr));
    }
    m[path.substr(1)] = {{"values", values}, {"delta", delta}, {"relative_delta", rel}};
  }
  out["metrics"] = m;
  json tsi = json::object(), episodes = json::object();
  for (std::size_t k = 0; k < kpis.size(); ++k) {
    tsi[names[k]] = kpis[k].at("/tsi/hourly"_json_pointer);
    episodes[names[k]] = kpis[k].at("/hysteresis/episodes"_json_pointer);
  }
  out["tsi_hourly"] = tsi;
  out["hysteresis_episodes"] = episodes;
  return out;
}

}  // namespace mfdsim
