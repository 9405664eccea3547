#include "mfdsim/demand.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfdsim/csv.hpp"
#include "mfdsim/errors.hpp"
#include "mfdsim/rng.hpp"

namespace mfdsim {

std::string_view service_name(ServiceType s) {
  switch (s) {
    case ServiceType::None: return "none";
    case ServiceType::Single: return "single";
    case ServiceType::Shared: return "shared";
  }
  return "none";
}

std::string_view activity_name(Activity a) {
  switch (a) {
    case Activity::Work: return "Work";
    case Activity::Education: return "Education";
    case Activity::Shopping: return "Shopping";
    case Activity::Other: return "Other";
  }
  return "Other";
}

namespace {

std::optional<ServiceType> parse_service(std::string_view s) {
  if (s == "none" || s.empty()) return ServiceType::None;
  if (s == "single") return ServiceType::Single;
  if (s == "shared") return ServiceType::Shared;
  return std::nullopt;
}

std::optional<Activity> parse_activity(std::string_view s) {
  if (s == "Work") return Activity::Work;
  if (s == "Education") return Activity::Education;
  if (s == "Shopping") return Activity::Shopping;
  if (s == "Other") return Activity::Other;
  return std::nullopt;
}

bool is_on_demand(TravelMode m) { return m == TravelMode::MOD || m == TravelMode::AMOD; }

}  // namespace

double taxi_fare(double distance_km, double duration_min, const FareSchedule& f) {
  if (distance_km < 0.0 || duration_min < 0.0) throw DomainError("taxi_fare: negative distance or duration");
  const double low = std::min(distance_km, f.tier_km);
  const double high = std::max(0.0, distance_km - f.tier_km);
  return f.base + low * f.per_km_low + high * f.per_km_high + duration_min * f.per_min;
}

double amod_fare(double taxi_fare_sgd, double pricing_factor, bool shared, double shared_discount) {
  const double single = taxi_fare_sgd * pricing_factor;
  return shared ? single * shared_discount : single;
}

DemandProfile DemandProfile::uniform(std::size_t trips, std::uint64_t seed) {
  DemandProfile p;
  for (auto& h : p.hourly) h.fill(1.0 / 24.0);
  p.mode_shares[mode_index(TravelMode::Car)] = 1.0;
  p.total_trips = trips;
  p.seed = seed;
  return p;
}

void DemandProfile::validate() const {
  auto near_one = [](double s) { return std::abs(s - 1.0) <= 1e-9; };
  for (std::size_t a = 0; a < kActivityCount; ++a) {
    double s = 0.0;
    for (double w : hourly[a]) {
      if (w < 0.0) throw DomainError("hourly weights must be non-negative");
      s += w;
    }
    if (activity_shares[a] > 0.0 && !near_one(s))
      throw DomainError("hourly weights of " + std::string(activity_name(static_cast<Activity>(a))) +
                        " must sum to 1");
  }
  double as = 0.0;
  for (double w : activity_shares) as += w;
  if (!near_one(as)) throw DomainError("activity shares must sum to 1");
  double ms = 0.0;
  for (double w : mode_shares) {
    if (w < 0.0) throw DomainError("mode shares must be non-negative");
    ms += w;
  }
  if (!near_one(ms)) throw DomainError("mode shares must sum to 1");
  if (shared_fraction < 0.0 || shared_fraction > 1.0) throw DomainError("shared_fraction must be in [0, 1]");
}

TripTable generate_trips(const DemandProfile& profile, const Network& network, std::uint64_t seed) {
  profile.validate();
  if (profile.total_trips == 0) return {};
  if (network.nodes().size() < 2) throw DomainError("generate_trips: network needs at least two nodes");

  // Zone sampling frame; a zoneless network samples nodes uniformly.
  std::vector<std::vector<NodeId>> frames;
  std::vector<double> weights;
  if (network.zones().empty()) {
    std::vector<NodeId> all;
    for (const auto& n : network.nodes()) all.push_back(n.id);
    frames.push_back(std::move(all));
    weights.push_back(1.0);
  } else {
    for (const auto& z : network.zones()) {
      frames.push_back(z.nodes);
      weights.push_back(z.demand_weight);
    }
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (!(wsum > 0.0)) throw DomainError("generate_trips: all zone demand weights are zero");

  Rng rng(hash_keys(seed, 0x7452495053ULL));
  auto draw_node = [&] {
    const auto& frame = frames[rng.categorical(weights)];
    return frame[rng.below(frame.size())];
  };

  TripTable trips;
  trips.reserve(profile.total_trips);
  for (std::size_t i = 0; i < profile.total_trips; ++i) {
    Trip t;
    t.person_id = static_cast<std::int64_t>(i);
    const auto a = rng.categorical(profile.activity_shares);
    t.activity = static_cast<Activity>(a);
    const auto hour = rng.categorical(profile.hourly[a]);
    t.departure_s = static_cast<double>(hour * 3600 + rng.below(3600));
    t.mode = kAllModes[rng.categorical(profile.mode_shares)];
    t.origin = draw_node();
    int attempts = 0;
    do {
      t.destination = draw_node();
      if (++attempts > 1000) throw DomainError("generate_trips: cannot draw a destination distinct from origin");
    } while (t.destination == t.origin);
    if (is_on_demand(t.mode))
      t.service = rng.uniform() < profile.shared_fraction ? ServiceType::Shared : ServiceType::Single;
    trips.push_back(t);
  }
  std::stable_sort(trips.begin(), trips.end(), [](const Trip& a, const Trip& b) {
    return a.departure_s < b.departure_s || (a.departure_s == b.departure_s && a.person_id < b.person_id);
  });
  return trips;
}

namespace {
const std::vector<std::string> kTripHeader = {"person_id", "origin_node", "dest_node", "departure_s",
                                              "mode",      "service_type", "activity"};
}

TripLoadResult load_trips(const std::filesystem::path& path) {
  csv::Reader r(path);
  r.expect_header(kTripHeader);
  TripLoadResult out;
  std::vector<std::string> row;
  while (r.next(row)) {
    if (row.size() != kTripHeader.size())
      throw ParseError(r.name(), r.line(), "expected 7 fields, got " + std::to_string(row.size()));
    const auto pid = csv::to_int(row[0]);
    const auto o = csv::to_int(row[1]);
    const auto d = csv::to_int(row[2]);
    const auto dep = csv::to_double(row[3]);
    if (!pid || !o || !d || !dep) throw ParseError(r.name(), r.line(), "unparsable numeric field");
    const auto mode = parse_mode(row[4]);
    const auto svc = parse_service(row[5]);
    const auto act = parse_activity(row[6]);
    if (!mode) throw ParseError(r.name(), r.line(), "unknown mode '" + row[4] + "'");
    if (!svc) throw ParseError(r.name(), r.line(), "unknown service_type '" + row[5] + "'");
    if (!act) throw ParseError(r.name(), r.line(), "unknown activity '" + row[6] + "'");

    if (*dep < 0.0 || *dep >= 86400.0) {
      out.rejected.push_back({r.line(), "departure_s outside [0, 86400)"});
      continue;
    }
    if (*o == *d) {
      out.rejected.push_back({r.line(), "origin equals destination"});
      continue;
    }
    out.trips.push_back(Trip{*pid, *o, *d, *dep, *mode, *svc, *act});
  }
  return out;
}

void write_trips(const std::filesystem::path& path, const TripTable& trips) {
  csv::Writer w(path);
  w.row(kTripHeader);
  for (const auto& t : trips)
    w.row({csv::fmt(t.person_id), csv::fmt(t.origin), csv::fmt(t.destination), csv::fmt(t.departure_s),
           std::string(mode_name(t.mode)), std::string(service_name(t.service)),
           std::string(activity_name(t.activity))});
}

ChoiceParams ChoiceParams::existing_modes() {
  ChoiceParams p;
  for (auto m : {TravelMode::Car, TravelMode::Taxi, TravelMode::MOD, TravelMode::Bus, TravelMode::Rail,
                 TravelMode::Other})
    p.available[mode_index(m)] = true;
  return p;
}

double generalized_cost(const Trip& trip, TravelMode mode, const SkimMatrix& skims, const Network& network,
                        const FareSchedule& fares, const ChoiceParams& params, bool shared) {
  if (!params.available[mode_index(mode)]) return std::numeric_limits<double>::infinity();
  const ZoneId oz = network.zone_of(trip.origin);
  const ZoneId dz = network.zone_of(trip.destination);
  const auto period = skims.period_of(trip.departure_s);
  const SkimEntry* e = skims.find(oz, dz, mode, period);
  if (e == nullptr)
    throw DomainError("mode_shift: missing skim entry for zones " + std::to_string(oz) + "->" +
                      std::to_string(dz) + " mode " + std::string(mode_name(mode)));
  double fare = 0.0;
  switch (mode) {
    case TravelMode::Car: fare = params.car_cost_per_km * e->distance_km; break;
    case TravelMode::Taxi: fare = taxi_fare(e->distance_km, e->ivt_min, fares); break;
    case TravelMode::MOD: fare = taxi_fare(e->distance_km, e->ivt_min, fares) * params.mod_fare_factor; break;
    case TravelMode::AMOD:
      fare = amod_fare(taxi_fare(e->distance_km, e->ivt_min, fares), fares.amod_pricing_factor, shared,
                       fares.shared_discount);
      break;
    case TravelMode::Bus:
    case TravelMode::Rail: fare = params.pt_fare_base + params.pt_fare_per_km * e->distance_km; break;
    default: break;
  }
  return e->ivt_min + e->wait_min + fare / params.value_of_time;
}

namespace {

bool wants_shared(const Trip& trip, std::size_t index, const ChoiceParams& params) {
  if (trip.service == ServiceType::Shared) return true;
  if (trip.service == ServiceType::Single) return false;
  return bits_to_unit(hash_keys(params.seed, index, 0x5348415245ULL)) < params.shared_fraction;
}

}  // namespace

std::array<double, kModeCount> choice_probabilities(const Trip& trip, const SkimMatrix& skims,
                                                    const Network& network, const FareSchedule& fares,
                                                    const ChoiceParams& params) {
  std::array<double, kModeCount> p{};
  std::array<double, kModeCount> u{};
  double umax = -std::numeric_limits<double>::infinity();
  const bool shared = trip.service == ServiceType::Shared;
  for (auto m : kPersonModes) {
    const double gc = generalized_cost(trip, m, skims, network, fares, params, shared);
    u[mode_index(m)] = std::isinf(gc) ? -std::numeric_limits<double>::infinity()
                                      : params.asc[mode_index(m)] - params.cost_coef * gc;
    umax = std::max(umax, u[mode_index(m)]);
  }
  double z = 0.0;
  for (auto m : kPersonModes) {
    const double e = std::isinf(u[mode_index(m)]) ? 0.0 : std::exp(u[mode_index(m)] - umax);
    p[mode_index(m)] = e;
    z += e;
  }
  if (z > 0.0)
    for (auto& v : p) v /= z;
  return p;
}

TripTable mode_shift(const TripTable& trips, const SkimMatrix& skims, const Network& network,
                     const FareSchedule& fares, const ChoiceParams& params) {
  TripTable out = trips;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Trip& t = out[i];
    if (t.mode == TravelMode::Freight) continue;
    const bool shared = wants_shared(t, i, params);
    double best = -std::numeric_limits<double>::infinity();
    TravelMode choice = t.mode;
    bool any = false;
    for (auto m : kPersonModes) {
      const double gc = generalized_cost(t, m, skims, network, fares, params, shared);
      if (std::isinf(gc)) continue;
      const double u = params.asc[mode_index(m)] - params.cost_coef * gc;
      const double draw = bits_to_unit(hash_keys(params.seed, i, mode_index(m) + 1));
      const double total = u - std::log(-std::log(draw));
      if (!any || total > best) {
        best = total;
        choice = m;
        any = true;
      }
    }
    if (!any) continue;
    t.mode = choice;
    if (is_on_demand(choice))
      t.service = shared ? ServiceType::Shared : ServiceType::Single;
    else
      t.service = ServiceType::None;
  }
  return out;
}

std::array<double, kModeCount> mode_shares(const TripTable& trips) {
  std::array<double, kModeCount> s{};
  if (trips.empty()) return s;
  for (const auto& t : trips) s[mode_index(t.mode)] += 1.0;
  for (auto& v : s) v /= static_cast<double>(trips.size());
  return s;
}

}  // namespace mfdsim
