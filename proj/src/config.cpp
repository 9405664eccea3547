#include "mfdsim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "mfdsim/errors.hpp"

namespace mfdsim {

using nlohmann::json;

namespace {

/// JSON object accessor that reports errors by dotted field path.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }
  const json& raw(const std::string& key) const { return j_.at(key); }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items())
      if (!ok.count(k)) throw ConfigError(field(k), "unknown field");
  }

  double number(const std::string& key, double def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(field(key), "must be finite");
    return d;
  }

  long long integer(const std::string& key, long long def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "must be an integer");
    return v.get<long long>();
  }

  bool boolean(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "must be a string");
    return v.get<std::string>();
  }

  Obj object(const std::string& key) const { return Obj(j_.at(key), field(key)); }

  const json& array(const std::string& key) const {
    const json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(field(key), "must be an array");
    return v;
  }

 private:
  const json& j_;
  std::string path_;
};

TravelMode mode_of(const std::string& name, const std::string& field) {
  const auto m = parse_mode(name);
  if (!m) throw ConfigError(field, "unknown mode '" + name + "'");
  return *m;
}

void positive(double v, const std::string& field) {
  if (!(v > 0.0)) throw ConfigError(field, "must be > 0");
}

ControllerConfig parse_controller(const Obj& o) {
  o.allow({"batch_interval_s", "max_wait_min", "max_detour_min", "rebalancing", "parking", "hotspot_top_k"});
  ControllerConfig c;
  c.batch_interval_s = o.number("batch_interval_s", c.batch_interval_s);
  c.max_wait_min = o.number("max_wait_min", c.max_wait_min);
  c.max_detour_min = o.number("max_detour_min", c.max_detour_min);
  positive(c.batch_interval_s, o.field("batch_interval_s"));
  positive(c.max_wait_min, o.field("max_wait_min"));
  if (c.max_detour_min < 0.0) throw ConfigError(o.field("max_detour_min"), "must be >= 0");
  const std::string pol = o.string("rebalancing", "nearest_parking");
  if (pol == "nearest_parking")
    c.policy = RebalancePolicy::NearestParking;
  else if (pol == "cruise_hotspot")
    c.policy = RebalancePolicy::CruiseHotspot;
  else
    throw ConfigError(o.field("rebalancing"), "expected nearest_parking or cruise_hotspot");
  if (o.has("parking")) {
    for (const auto& v : o.array("parking")) {
      if (!v.is_number_integer()) throw ConfigError(o.field("parking"), "node ids must be integers");
      c.parking.push_back(v.get<NodeId>());
    }
  }
  const long long k = o.integer("hotspot_top_k", static_cast<long long>(c.hotspot_top_k));
  if (k < 1) throw ConfigError(o.field("hotspot_top_k"), "must be >= 1");
  c.hotspot_top_k = static_cast<std::size_t>(k);
  return c;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path q(p);
  return q.is_absolute() || base.empty() ? q : base / q;
}

std::array<double, 24> two_peak_hours() {
  std::array<double, 24> w{};
  double s = 0.0;
  for (int h = 0; h < 24; ++h) {
    const double x = h + 0.5;
    w[h] = 0.2 + 6.0 * std::exp(-std::pow((x - 8.0) / 1.2, 2)) + 5.0 * std::exp(-std::pow((x - 18.0) / 1.5, 2));
    if (h < 5) w[h] *= 0.2;
    s += w[h];
  }
  for (auto& v : w) v /= s;
  return w;
}

}  // namespace

ScenarioConfig parse_config(const json& j, const std::filesystem::path& base) {
  const Obj root(j, "");
  root.allow({"name", "seed", "horizon_s", "stats_interval_s", "dt_s", "modes", "amod_pricing_factor", "fleets",
              "learning", "days", "initial_mode_choice", "mode_shift", "network", "demand", "transit", "fares",
              "choice", "carpool_share"});
  ScenarioConfig c;
  c.name = root.string("name", c.name);
  const long long seed = root.integer("seed", 1);
  if (seed < 0) throw ConfigError("seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.horizon_s = root.number("horizon_s", c.horizon_s);
  c.stats_interval_s = root.number("stats_interval_s", c.stats_interval_s);
  c.dt_s = root.number("dt_s", c.dt_s);
  c.amod_pricing_factor = root.number("amod_pricing_factor", c.amod_pricing_factor);
  c.carpool_share = root.number("carpool_share", c.carpool_share);
  c.days = static_cast<int>(root.integer("days", 1));
  c.initial_mode_choice = root.boolean("initial_mode_choice", false);
  c.mode_shift = root.boolean("mode_shift", false);

  if (root.has("modes")) {
    for (const auto& v : root.array("modes")) {
      if (!v.is_string()) throw ConfigError("modes", "entries must be mode names");
      const TravelMode m = mode_of(v.get<std::string>(), "modes");
      c.available[mode_index(m)] = true;
    }
  } else {
    c.available = ChoiceParams::existing_modes().available;
  }

  if (root.has("fleets")) {
    const auto& arr = root.array("fleets");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Obj o(arr[i], "fleets[" + std::to_string(i) + "]");
      o.allow({"kind", "size", "four_seaters", "six_seaters", "controller"});
      FleetConfig f;
      const std::string kind = o.string("kind", "AMOD");
      if (kind == "AMOD")
        f.kind = FleetKind::AMOD;
      else if (kind == "MOD")
        f.kind = FleetKind::MOD;
      else
        throw ConfigError(o.field("kind"), "expected AMOD or MOD");
      f.four_seaters = static_cast<int>(o.integer("four_seaters", 0));
      f.six_seaters = static_cast<int>(o.integer("six_seaters", 0));
      f.size = static_cast<int>(o.integer("size", f.four_seaters + f.six_seaters));
      if (f.four_seaters < 0) throw ConfigError(o.field("four_seaters"), "must be >= 0");
      if (f.six_seaters < 0) throw ConfigError(o.field("six_seaters"), "must be >= 0");
      if (f.size != f.four_seaters + f.six_seaters)
        throw ConfigError(o.field("size"), "fleet size " + std::to_string(f.size) +
                                               " differs from four_seaters + six_seaters = " +
                                               std::to_string(f.four_seaters + f.six_seaters));
      if (o.has("controller")) f.controller = parse_controller(o.object("controller"));
      c.fleets.push_back(f);
    }
  }

  if (root.has("learning")) {
    const Obj o = root.object("learning");
    o.allow({"w", "tolerance", "max_iterations"});
    c.learning.w = o.number("w", c.learning.w);
    c.learning.tolerance = o.number("tolerance", c.learning.tolerance);
    c.learning.max_iterations = static_cast<int>(o.integer("max_iterations", c.learning.max_iterations));
  }

  if (!root.has("network")) throw ConfigError("network", "missing");
  {
    const Obj o = root.object("network");
    o.allow({"path", "grid"});
    if (o.has("path")) {
      c.network.path = resolve(base, o.string("path", ""));
    } else if (o.has("grid")) {
      const Obj g = o.object("grid");
      g.allow({"rows", "cols", "spacing_m", "segments_per_link", "lanes", "free_flow_kmh", "jam_density",
               "capacity_veh_h", "alpha", "beta", "min_speed_kmh", "zone_block"});
      GridSpec& s = c.network.grid;
      s.rows = static_cast<int>(g.integer("rows", s.rows));
      s.cols = static_cast<int>(g.integer("cols", s.cols));
      s.spacing_m = g.number("spacing_m", s.spacing_m);
      s.segments_per_link = static_cast<int>(g.integer("segments_per_link", s.segments_per_link));
      s.lanes = static_cast<int>(g.integer("lanes", s.lanes));
      s.free_flow_kmh = g.number("free_flow_kmh", s.free_flow_kmh);
      s.jam_density = g.number("jam_density", s.jam_density);
      s.capacity_veh_h = g.number("capacity_veh_h", s.capacity_veh_h);
      s.alpha = g.number("alpha", s.alpha);
      s.beta = g.number("beta", s.beta);
      s.min_speed_kmh = g.number("min_speed_kmh", s.min_speed_kmh);
      s.zone_block = static_cast<int>(g.integer("zone_block", s.zone_block));
      if (s.rows < 2 || s.cols < 2) throw ConfigError(g.field("rows"), "grid needs at least 2 rows and 2 columns");
      if (s.segments_per_link < 1) throw ConfigError(g.field("segments_per_link"), "must be >= 1");
      if (s.lanes < 1) throw ConfigError(g.field("lanes"), "must be >= 1");
      if (s.zone_block < 1) throw ConfigError(g.field("zone_block"), "must be >= 1");
      positive(s.spacing_m, g.field("spacing_m"));
      positive(s.jam_density, g.field("jam_density"));
      positive(s.capacity_veh_h, g.field("capacity_veh_h"));
      positive(s.alpha, g.field("alpha"));
      positive(s.beta, g.field("beta"));
      if (!(s.min_speed_kmh > 0.0 && s.min_speed_kmh < s.free_flow_kmh))
        throw ConfigError(g.field("min_speed_kmh"), "must satisfy 0 < min_speed_kmh < free_flow_kmh");
    } else {
      throw ConfigError("network", "needs 'path' or 'grid'");
    }
  }

  if (!root.has("demand")) throw ConfigError("demand", "missing");
  {
    const Obj o = root.object("demand");
    o.allow({"file", "trips", "shape", "mode_shares", "shared_fraction"});
    if (o.has("file")) {
      c.demand.file = resolve(base, o.string("file", ""));
    } else {
      const long long n = o.integer("trips", 0);
      if (n < 0) throw ConfigError(o.field("trips"), "must be >= 0");
      c.demand.trips = static_cast<std::size_t>(n);
      const std::string shape = o.string("shape", "two_peak");
      if (shape == "two_peak")
        c.demand.shape = DemandShape::TwoPeak;
      else if (shape == "uniform")
        c.demand.shape = DemandShape::Uniform;
      else
        throw ConfigError(o.field("shape"), "expected two_peak or uniform");
      c.demand.shared_fraction = o.number("shared_fraction", c.demand.shared_fraction);
      if (c.demand.shared_fraction < 0.0 || c.demand.shared_fraction > 1.0)
        throw ConfigError(o.field("shared_fraction"), "must be in [0, 1]");
      if (o.has("mode_shares")) {
        const Obj ms = o.object("mode_shares");
        double sum = 0.0;
        for (const auto& [k, v] : o.raw("mode_shares").items()) {
          const TravelMode m = mode_of(k, ms.field(k));
          if (!v.is_number() || v.get<double>() < 0.0) throw ConfigError(ms.field(k), "must be a number >= 0");
          c.demand.mode_shares[mode_index(m)] = v.get<double>();
          sum += v.get<double>();
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(o.field("mode_shares"), "must sum to 1");
      } else {
        c.demand.mode_shares[mode_index(TravelMode::Car)] = 1.0;
      }
    }
  }

  if (root.has("transit")) {
    const Obj o = root.object("transit");
    o.allow({"grid_lines", "bus_headway_min", "bus_stop_every", "rail_headway_s", "rail_station_every"});
    TransitConfig& t = c.transit;
    t.grid_lines = o.boolean("grid_lines", t.grid_lines);
    t.bus_headway_min = o.number("bus_headway_min", t.bus_headway_min);
    t.bus_stop_every = static_cast<int>(o.integer("bus_stop_every", t.bus_stop_every));
    t.rail_headway_s = o.number("rail_headway_s", t.rail_headway_s);
    t.rail_station_every = static_cast<int>(o.integer("rail_station_every", t.rail_station_every));
    positive(t.bus_headway_min, o.field("bus_headway_min"));
    positive(t.rail_headway_s, o.field("rail_headway_s"));
    if (t.bus_stop_every < 1) throw ConfigError(o.field("bus_stop_every"), "must be >= 1");
    if (t.rail_station_every < 1) throw ConfigError(o.field("rail_station_every"), "must be >= 1");
  }

  if (root.has("fares")) {
    const Obj o = root.object("fares");
    o.allow({"base", "per_km_low", "per_km_high", "tier_km", "per_min", "shared_discount"});
    FareSchedule& f = c.fares;
    f.base = o.number("base", f.base);
    f.per_km_low = o.number("per_km_low", f.per_km_low);
    f.per_km_high = o.number("per_km_high", f.per_km_high);
    f.tier_km = o.number("tier_km", f.tier_km);
    f.per_min = o.number("per_min", f.per_min);
    f.shared_discount = o.number("shared_discount", f.shared_discount);
    for (const char* k : {"base", "per_km_low", "per_km_high", "tier_km", "per_min"})
      if (o.number(k, 0.0) < 0.0) throw ConfigError(o.field(k), "must be >= 0");
    if (!(f.shared_discount > 0.0 && f.shared_discount <= 1.0))
      throw ConfigError(o.field("shared_discount"), "must be in (0, 1]");
  }

  c.choice.available = c.available;
  if (root.has("choice")) {
    const Obj o = root.object("choice");
    o.allow({"asc", "cost_coef", "value_of_time", "car_cost_per_km", "pt_fare_base", "pt_fare_per_km", "seed"});
    ChoiceParams& p = c.choice;
    p.cost_coef = o.number("cost_coef", p.cost_coef);
    p.value_of_time = o.number("value_of_time", p.value_of_time);
    p.car_cost_per_km = o.number("car_cost_per_km", p.car_cost_per_km);
    p.pt_fare_base = o.number("pt_fare_base", p.pt_fare_base);
    p.pt_fare_per_km = o.number("pt_fare_per_km", p.pt_fare_per_km);
    positive(p.value_of_time, o.field("value_of_time"));
    const long long s = o.integer("seed", static_cast<long long>(p.seed));
    if (s < 0) throw ConfigError(o.field("seed"), "must be >= 0");
    p.seed = static_cast<std::uint64_t>(s);
    if (o.has("asc")) {
      const Obj a = o.object("asc");
      for (const auto& [k, v] : o.raw("asc").items()) {
        const TravelMode m = mode_of(k, a.field(k));
        if (!v.is_number()) throw ConfigError(a.field(k), "must be a number");
        p.asc[mode_index(m)] = v.get<double>();
      }
    }
  }
  c.choice.shared_fraction = c.demand.shared_fraction;
  c.fares.amod_pricing_factor = c.amod_pricing_factor;
  validate_config(c);
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", e.what());
  }
  return parse_config(j, path.parent_path());
}

void validate_config(const ScenarioConfig& c) {
  positive(c.horizon_s, "horizon_s");
  positive(c.dt_s, "dt_s");
  positive(c.stats_interval_s, "stats_interval_s");
  const double ratio = c.stats_interval_s / c.dt_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) throw ConfigError("stats_interval_s", "must be a multiple of dt_s");
  positive(c.amod_pricing_factor, "amod_pricing_factor");
  if (c.carpool_share < 0.0 || c.carpool_share > 1.0) throw ConfigError("carpool_share", "must be in [0, 1]");
  if (c.days < 1) throw ConfigError("days", "must be >= 1");
  c.learning.validate();
  for (std::size_t i = 0; i < c.fleets.size(); ++i)
    if (c.fleets[i].size != c.fleets[i].four_seaters + c.fleets[i].six_seaters)
      throw ConfigError("fleets[" + std::to_string(i) + "].size", "differs from the composition sum");
  auto has_fleet = [&](FleetKind k) {
    for (const auto& f : c.fleets)
      if (f.kind == k && f.size > 0) return true;
    return false;
  };
  if (c.available[mode_index(TravelMode::AMOD)] && !has_fleet(FleetKind::AMOD))
    throw ConfigError("fleets", "AMOD is an available mode but no AMOD fleet is configured");
  for (TravelMode m : kAllModes)
    if (c.demand.mode_shares[mode_index(m)] > 0.0 && m != TravelMode::Freight && !c.available[mode_index(m)])
      throw ConfigError("demand.mode_shares", "mode " + std::string(mode_name(m)) + " is not available");
}

ScenarioInputs Scenario::inputs() const {
  ScenarioInputs in;
  in.network = &network;
  in.trips = trips;
  in.bus_lines = bus_lines;
  in.rail_lines = rail_lines;
  in.config.dt_s = config.dt_s;
  in.config.stats_interval_s = config.stats_interval_s;
  in.config.horizon_s = config.horizon_s;
  in.config.carpool_share = config.carpool_share;
  in.config.seed = config.seed;
  for (const auto& f : config.fleets) {
    FleetSpec s;
    s.kind = f.kind;
    s.four_seaters = f.four_seaters;
    s.six_seaters = f.six_seaters;
    s.controller = f.controller;
    if (s.controller.parking.empty())
      for (const auto& z : network.zones()) s.controller.parking.push_back(z.centroid);
    in.fleets.push_back(std::move(s));
  }
  return in;
}

DayToDayConfig Scenario::day_to_day() const {
  DayToDayConfig d;
  d.days = config.days;
  d.mode_shift = config.mode_shift;
  d.learning = config.learning;
  d.fares = config.fares;
  d.choice = config.choice;
  return d;
}

Scenario build_scenario(const ScenarioConfig& config) {
  Scenario s;
  s.config = config;
  const bool grid = !config.network.path.has_value();
  s.network = grid ? make_grid_network(config.network.grid) : load_network_csv(*config.network.path);
  if (config.demand.file) {
    auto loaded = load_trips(*config.demand.file);
    if (!loaded.rejected.empty())
      throw ConfigError("demand.file", "line " + std::to_string(loaded.rejected.front().line) + ": " +
                                           loaded.rejected.front().reason);
    s.trips = std::move(loaded.trips);
  } else {
    DemandProfile p = DemandProfile::uniform(config.demand.trips, config.seed);
    if (config.demand.shape == DemandShape::TwoPeak)
      for (auto& h : p.hourly) h = two_peak_hours();
    p.mode_shares = config.demand.mode_shares;
    p.shared_fraction = config.demand.shared_fraction;
    s.trips = generate_trips(p, s.network, config.seed);
  }
  if (grid && config.transit.grid_lines) {
    s.bus_lines = grid_bus_lines(config.network.grid, config.transit.bus_headway_min, config.transit.bus_stop_every);
    s.rail_lines = grid_rail_lines(config.network.grid, config.transit.rail_headway_s, 40.0,
                                   config.transit.rail_station_every);
  }
  return s;
}

}  // namespace mfdsim
