#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "mfdsim/demand.hpp"
#include "mfdsim/errors.hpp"
#include "mfdsim/modes.hpp"

using namespace mfdsim;

namespace {

// Upper 1% point of chi-square with 23 degrees of freedom.
constexpr double kChi2_23_01 = 41.638;

Network grid3() {
  GridSpec g;
  g.rows = 3;
  g.cols = 3;
  g.zone_block = 1;
  return make_grid_network(g);
}

/// Every person mode gets the same in-vehicle time and distance.
SkimMatrix flat_skims(const Network& net, double ivt_min, double dist_km) {
  std::vector<ZoneId> zones;
  for (const auto& z : net.zones()) zones.push_back(z.id);
  SkimMatrix s(zones, 24, 3600.0);
  for (auto o : zones)
    for (auto d : zones)
      for (auto m : kPersonModes)
        for (std::size_t p = 0; p < 24; ++p) s.at(o, d, m, p) = SkimEntry{ivt_min, 0.0, dist_km};
  return s;
}

TripTable od_trips(const Network& net, std::size_t n, TravelMode mode) {
  TripTable t;
  for (std::size_t i = 0; i < n; ++i) {
    Trip x;
    x.person_id = static_cast<std::int64_t>(i);
    x.origin = net.nodes()[i % net.nodes().size()].id;
    x.destination = net.nodes()[(i + 1 + i / 7) % net.nodes().size()].id;
    if (x.destination == x.origin) x.destination = net.nodes()[(i + 2) % net.nodes().size()].id;
    x.departure_s = static_cast<double>((i * 37) % 86400);
    x.mode = mode;
    t.push_back(x);
  }
  return t;
}

}  // namespace

TEST_CASE("mode flag matrix") {
  struct Row {
    TravelMode m;
    bool v, p, road;
  };
  const Row rows[] = {
      {TravelMode::Car, true, true, true},        {TravelMode::Taxi, true, true, true},
      {TravelMode::MOD, true, true, true},        {TravelMode::MOD_OP, true, false, true},
      {TravelMode::AMOD, true, true, true},       {TravelMode::AMOD_OP, true, false, true},
      {TravelMode::Bus, false, true, true},       {TravelMode::Bus_OP, true, false, true},
      {TravelMode::Rail, false, true, false},     {TravelMode::Rail_OP, false, false, false},
      {TravelMode::Other, false, true, false},    {TravelMode::Freight, true, false, true},
  };
  static_assert(std::size(rows) == kModeCount);
  for (const auto& r : rows) {
    CAPTURE(mode_name(r.m));
    const auto f = mode_flags(r.m);
    CHECK(f.contributes_vehicle_flow == r.v);
    CHECK(f.contributes_passenger_flow == r.p);
    CHECK(f.road_based == r.road);
    CHECK(parse_mode(mode_name(r.m)) == r.m);
  }
  CHECK(parse_mode("Carpool") == TravelMode::Car);
  CHECK_FALSE(parse_mode("Hovercraft").has_value());
}

TEST_CASE("taxi fare examples") {
  CHECK(taxi_fare(0.0, 0.0) == doctest::Approx(3.20).epsilon(1e-12));
  CHECK(taxi_fare(5.0, 10.0) == doctest::Approx(3.2 + 5 * 0.55 + 10 * 0.29).epsilon(1e-12));
  CHECK(taxi_fare(5.0, 10.0) == doctest::Approx(8.85).epsilon(1e-12));
  CHECK(taxi_fare(12.0, 20.0) == doctest::Approx(15.76).epsilon(1e-12));
  CHECK_THROWS_AS(taxi_fare(-1.0, 0.0), DomainError);
  CHECK_THROWS_AS(taxi_fare(1.0, -0.5), DomainError);
}

TEST_CASE("taxi fare is continuous and nondecreasing") {
  double prev = taxi_fare(0.0, 7.0);
  for (int i = 1; i <= 4000; ++i) {
    const double d = i * 0.005;
    const double f = taxi_fare(d, 7.0);
    REQUIRE(f >= prev);
    // Largest jump over a 5 m step is the high rate times the step.
    REQUIRE(f - prev <= 0.63 * 0.005 + 1e-12);
    prev = f;
  }
  CHECK(taxi_fare(3.0, 12.0) >= taxi_fare(3.0, 11.0));
}

TEST_CASE("amod fare examples") {
  CHECK(amod_fare(8.85, 1.00, false) == 8.85);
  CHECK(amod_fare(8.85, 0.75, false) == doctest::Approx(6.6375).epsilon(1e-12));
  CHECK(amod_fare(8.85, 0.75, true) == doctest::Approx(4.978125).epsilon(1e-12));
  for (double f : {0.75, 1.0, 1.25, 0.4})
    for (double t : {3.2, 8.85, 40.0}) CHECK(amod_fare(t, f, true) == 0.75 * amod_fare(t, f, false));
}

TEST_CASE("generate_trips basics") {
  const Network net = grid3();
  CHECK(generate_trips(DemandProfile::uniform(0, 1), net, 1).empty());
  const auto a = generate_trips(DemandProfile::uniform(500, 1), net, 9);
  const auto b = generate_trips(DemandProfile::uniform(500, 1), net, 9);
  CHECK(a == b);
  CHECK(a != generate_trips(DemandProfile::uniform(500, 1), net, 10));
  for (const auto& t : a) {
    CHECK(t.origin != t.destination);
    CHECK(t.departure_s >= 0.0);
    CHECK(t.departure_s < 86400.0);
  }
  CHECK_THROWS_AS(generate_trips(DemandProfile::uniform(5, 1), Network{}, 1), DomainError);
}

TEST_CASE("generate_trips writes byte-identical tables") {
  const Network net = grid3();
  const auto dir = testutil::temp_dir("gen");
  write_trips(dir / "a.csv", generate_trips(DemandProfile::uniform(300, 1), net, 4));
  write_trips(dir / "b.csv", generate_trips(DemandProfile::uniform(300, 1), net, 4));
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
}

TEST_CASE("hourly histogram matches the multinomial") {
  const Network net = grid3();
  const std::size_t n = 10000;
  const auto trips = generate_trips(DemandProfile::uniform(n, 1), net, 2024);
  REQUIRE(trips.size() == n);
  std::array<double, 24> counts{};
  for (const auto& t : trips) counts[static_cast<std::size_t>(t.departure_s / 3600.0)] += 1.0;
  const double e = static_cast<double>(n) / 24.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - e) * (c - e) / e;
  CHECK(chi2 < kChi2_23_01);
  const double p = 1.0 / 24.0;
  for (double c : counts) CHECK(std::abs(c - e) <= 3.0 * std::sqrt(n * p * (1.0 - p)));
}

TEST_CASE("per-activity chi-square rejects at its nominal rate") {
  // Over many seeds the 0.01-level test may only fire about 1% of the time;
  // 3% of 400 tests is more than 5 binomial standard deviations away.
  const Network net = grid3();
  int rejected = 0;
  const int seeds = 100;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto trips = generate_trips(DemandProfile::uniform(10000, 1), net, static_cast<std::uint64_t>(seed));
    std::array<std::array<double, 24>, kActivityCount> by_act{};
    std::array<double, kActivityCount> act_n{};
    for (const auto& t : trips) {
      by_act[static_cast<std::size_t>(t.activity)][static_cast<std::size_t>(t.departure_s / 3600.0)] += 1.0;
      act_n[static_cast<std::size_t>(t.activity)] += 1.0;
    }
    for (std::size_t a = 0; a < kActivityCount; ++a) {
      const double ea = act_n[a] / 24.0;
      double chi2 = 0.0;
      for (double c : by_act[a]) chi2 += (c - ea) * (c - ea) / ea;
      rejected += chi2 >= kChi2_23_01;
    }
  }
  CHECK(rejected <= 12);
}

TEST_CASE("origins follow zone demand weights") {
  GridSpec g;
  g.rows = 2;
  g.cols = 4;
  g.zone_block = 2;
  NetworkBuilder b;
  const Network base = make_grid_network(g);
  REQUIRE(base.zones().size() == 2);
  for (const auto& n : base.nodes()) b.add_node(n);
  for (const auto& l : base.links()) b.add_link(l.id, l.from, l.to);
  for (const auto& s : base.segments()) b.add_segment(s);
  Zone z0 = base.zones()[0], z1 = base.zones()[1];
  z0.demand_weight = 3.0;
  z1.demand_weight = 1.0;
  b.add_zone(z0).add_zone(z1);
  const Network net = b.build();
  const auto trips = generate_trips(DemandProfile::uniform(8000, 1), net, 5);
  double in0 = 0.0;
  for (const auto& t : trips) in0 += net.zone_of(t.origin) == z0.id;
  const double p = in0 / 8000.0;
  CHECK(std::abs(p - 0.75) <= 3.0 * std::sqrt(0.75 * 0.25 / 8000.0));
}

TEST_CASE("load_trips") {
  const auto dir = testutil::temp_dir("trips");
  const std::string header = "person_id,origin_node,dest_node,departure_s,mode,service_type,activity\n";
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(dir / name);
    f << header << body;
    return dir / name;
  };
  SUBCASE("header only") { CHECK(load_trips(write("e.csv", "")).trips.empty()); }
  SUBCASE("three rows") {
    const auto r = load_trips(write("t.csv",
                                    "1,0,3,100,Car,none,Work\n"
                                    "2,3,0,200,AMOD,shared,Shopping\n"
                                    "3,4,5,86399,Bus,none,Other\n"));
    CHECK(r.trips.size() == 3);
    CHECK(r.rejected.empty());
    CHECK(r.trips[1].service == ServiceType::Shared);
  }
  SUBCASE("departure outside the day") {
    const auto r = load_trips(write("bad.csv", "1,0,3,100,Car,none,Work\n2,0,3,90000,Car,none,Work\n"));
    CHECK(r.trips.size() == 1);
    REQUIRE(r.rejected.size() == 1);
    CHECK(r.rejected[0].line == 3);
  }
  SUBCASE("origin equals destination") {
    const auto r = load_trips(write("od.csv", "1,4,4,10,Car,none,Work\n"));
    CHECK(r.rejected.size() == 1);
  }
  SUBCASE("bad header") {
    std::ofstream(dir / "h.csv") << "person,origin\n";
    CHECK_THROWS_AS(load_trips(dir / "h.csv"), ParseError);
  }
  SUBCASE("bad number") {
    try {
      load_trips(write("n.csv", "1,0,3,100,Car,none,Work\nx,0,3,1,Car,none,Work\n"));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("round trip") {
    const auto trips = generate_trips(DemandProfile::uniform(50, 1), grid3(), 3);
    write_trips(dir / "rt.csv", trips);
    CHECK(load_trips(dir / "rt.csv").trips == trips);
  }
}

TEST_CASE("unavailable AMOD gets no share") {
  const Network net = grid3();
  const auto skims = flat_skims(net, 10.0, 3.0);
  auto params = ChoiceParams::existing_modes();
  const auto out = mode_shift(od_trips(net, 2000, TravelMode::AMOD), skims, net, {}, params);
  CHECK(out.size() == 2000);
  CHECK(mode_shares(out)[mode_index(TravelMode::AMOD)] == 0.0);
  for (const auto& t : out) CHECK(params.available[mode_index(t.mode)]);
}

TEST_CASE("equal utilities split evenly") {
  const Network net = grid3();
  const auto skims = flat_skims(net, 12.0, 4.0);
  ChoiceParams params;
  params.available[mode_index(TravelMode::Car)] = true;
  params.available[mode_index(TravelMode::Bus)] = true;
  params.car_cost_per_km = 0.0;
  params.pt_fare_base = 0.0;
  params.pt_fare_per_km = 0.0;
  const auto trips = od_trips(net, 10000, TravelMode::Car);
  const auto p = choice_probabilities(trips[0], skims, net, {}, params);
  CHECK(p[mode_index(TravelMode::Car)] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p[mode_index(TravelMode::Bus)] == doctest::Approx(0.5).epsilon(1e-12));
  const auto shares = mode_shares(mode_shift(trips, skims, net, {}, params));
  const double sd = std::sqrt(0.25 / 10000.0);
  CHECK(std::abs(shares[mode_index(TravelMode::Car)] - 0.5) <= 3.0 * sd);
  CHECK(shares[mode_index(TravelMode::Car)] + shares[mode_index(TravelMode::Bus)] == doctest::Approx(1.0));
}

TEST_CASE("cheaper AMOD never loses share") {
  const Network net = grid3();
  const auto skims = flat_skims(net, 15.0, 6.0);
  auto params = ChoiceParams::existing_modes();
  params.available[mode_index(TravelMode::AMOD)] = true;
  const auto trips = od_trips(net, 3000, TravelMode::Bus);
  FareSchedule hi, lo;
  hi.amod_pricing_factor = 1.25;
  lo.amod_pricing_factor = 0.75;
  const auto a = mode_shift(trips, skims, net, hi, params);
  const auto b = mode_shift(trips, skims, net, lo, params);
  CHECK(mode_shares(b)[mode_index(TravelMode::AMOD)] >= mode_shares(a)[mode_index(TravelMode::AMOD)]);
  CHECK(mode_shares(b)[mode_index(TravelMode::AMOD)] > 0.0);
  // Common random numbers: a trip on AMOD at the high price stays on AMOD.
  for (std::size_t i = 0; i < trips.size(); ++i)
    if (a[i].mode == TravelMode::AMOD) CHECK(b[i].mode == TravelMode::AMOD);
  const auto pa = choice_probabilities(trips[0], skims, net, hi, params);
  const auto pb = choice_probabilities(trips[0], skims, net, lo, params);
  CHECK(pb[mode_index(TravelMode::AMOD)] > pa[mode_index(TravelMode::AMOD)]);
}

TEST_CASE("mode_shift keeps freight and trip count") {
  const Network net = grid3();
  const auto skims = flat_skims(net, 10.0, 3.0);
  auto trips = od_trips(net, 100, TravelMode::Car);
  for (std::size_t i = 0; i < trips.size(); i += 5) trips[i].mode = TravelMode::Freight;
  const auto out = mode_shift(trips, skims, net, {}, ChoiceParams::existing_modes());
  REQUIRE(out.size() == trips.size());
  for (std::size_t i = 0; i < trips.size(); ++i) {
    CHECK((trips[i].mode == TravelMode::Freight) == (out[i].mode == TravelMode::Freight));
    CHECK(out[i].departure_s == trips[i].departure_s);
  }
  CHECK(mode_shift(trips, skims, net, {}, ChoiceParams::existing_modes()) == out);
}

TEST_CASE("missing skim entry is a domain error") {
  const Network net = grid3();
  std::vector<ZoneId> zones;
  for (const auto& z : net.zones()) zones.push_back(z.id);
  const SkimMatrix empty(zones, 1, 86400.0);
  CHECK_THROWS_AS(mode_shift(od_trips(net, 3, TravelMode::Car), empty, net, {}, ChoiceParams::existing_modes()),
                  DomainError);
}

TEST_CASE("profile validation") {
  auto p = DemandProfile::uniform(10, 1);
  p.mode_shares[mode_index(TravelMode::Bus)] = 0.5;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = DemandProfile::uniform(10, 1);
  p.hourly[0][3] += 0.1;
  CHECK_THROWS_AS(p.validate(), DomainError);
}
