#include <doctest.h>

#include <random>

#include "mfdsim/errors.hpp"
#include "mfdsim/impact.hpp"

using namespace mfdsim;

TEST_CASE("bev energy examples") {
  CHECK(bev_energy({}).total_kwh() == 0.0);
  const std::vector<BevTrip> one{{5.0, false}};
  CHECK(bev_energy(one).total_kwh() == doctest::Approx(2.73585).epsilon(1e-12));
  const std::vector<BevTrip> two{{1.0, false}, {20.0, true}};
  const auto e = bev_energy(two);
  // (233 + 166 * 20) * 2.99 Wh
  CHECK(e.total_kwh() * 1000.0 == doctest::Approx(10623.47).epsilon(1e-12));
  CHECK(e.service_kwh * 1000.0 == doctest::Approx(233.0 * 2.99).epsilon(1e-12));
  CHECK(e.operational_kwh * 1000.0 == doctest::Approx(166.0 * 20.0 * 2.99).epsilon(1e-12));
  CHECK_THROWS_AS(bev_energy(std::vector<BevTrip>{{-1.0, false}}), DomainError);
}

TEST_CASE("bev tiers change only at 2 and 10 km") {
  CHECK(bev_ecr_wh_km(0.5) == 233.0);
  CHECK(bev_ecr_wh_km(2.0) == 233.0);
  CHECK(bev_ecr_wh_km(2.0001) == 183.0);
  CHECK(bev_ecr_wh_km(10.0) == 183.0);
  CHECK(bev_ecr_wh_km(10.0001) == 166.0);
  double prev = bev_ecr_wh_km(0.0);
  int jumps = 0;
  for (int i = 1; i <= 3000; ++i) {
    const double v = bev_ecr_wh_km(i * 0.01);
    CHECK(v <= prev);
    if (v != prev) ++jumps;
    prev = v;
  }
  CHECK(jumps == 2);
}

TEST_CASE("ice energy examples") {
  CHECK(ice_energy(0.0, Fuel::Gasoline) == 0.0);
  CHECK(ice_energy(100.0, Fuel::Gasoline) == doctest::Approx(100.0 / (47.0 * 0.04775) * 1.17).epsilon(1e-12));
  CHECK(ice_energy(100.0, Fuel::Gasoline) == doctest::Approx(52.13).epsilon(1e-3));
  CHECK(ice_energy(100.0, Fuel::Diesel) == doctest::Approx(42.29).epsilon(1e-3));
  CHECK(ice_energy(100.0, "diesel") == ice_energy(100.0, Fuel::Diesel));
  CHECK_THROWS_AS(ice_energy(100.0, "hydrogen"), DomainError);
  CHECK_THROWS_AS(parse_fuel("Petrol"), DomainError);
}

TEST_CASE("emissions") {
  const auto zero = emissions(VehicleClass::CarPetrol, 0.0, 0.7);
  CHECK(zero.nox_kg == 0.0);
  CHECK(zero.pm_kg == 0.0);
  const auto car = emissions(VehicleClass::CarPetrol, 1000.0, 1.0);
  CHECK(car.nox_kg == doctest::Approx(0.043).epsilon(1e-12));
  CHECK(car.pm_kg == doctest::Approx(0.0037).epsilon(1e-12));
  CHECK(emissions(VehicleClass::Bus, 1000.0, 0.5).nox_kg == doctest::Approx(1.11).epsilon(1e-12));
  CHECK(emissions(VehicleClass::Bus, 1000.0, 0.2).nox_kg == doctest::Approx(1.11).epsilon(1e-12));
  CHECK(emissions(VehicleClass::Truck, 1000.0, 0.75).pm_kg == doctest::Approx(0.00805).epsilon(1e-12));
  CHECK_THROWS_AS(emissions(VehicleClass::CarPetrol, 10.0, 0.0), DomainError);
  CHECK_THROWS_AS(emissions(VehicleClass::CarPetrol, 10.0, 1.01), DomainError);
  CHECK_THROWS_AS(emissions(VehicleClass::CarPetrol, -1.0, 0.9), DomainError);
}

TEST_CASE("emissions are nonincreasing in tsi") {
  for (auto cls : {VehicleClass::CarPetrol, VehicleClass::Bus, VehicleClass::Truck}) {
    double prev_n = 1e300, prev_p = 1e300;
    for (int i = 1; i <= 1000; ++i) {
      const auto m = emissions(cls, 500.0, i / 1000.0);
      CHECK(m.nox_kg <= prev_n);
      CHECK(m.pm_kg <= prev_p);
      prev_n = m.nox_kg;
      prev_p = m.pm_kg;
    }
  }
}

TEST_CASE("energy is additive and homogeneous") {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> d(0.0, 30.0);
  std::vector<BevTrip> trips;
  for (int i = 0; i < 200; ++i) trips.push_back({d(gen), i % 3 == 0});
  const double whole = bev_energy(trips).total_kwh();
  std::bernoulli_distribution coin(0.5);
  for (int k = 0; k < 20; ++k) {
    std::vector<BevTrip> a, b;
    for (const auto& t : trips) (coin(gen) ? a : b).push_back(t);
    CHECK(bev_energy(a).total_kwh() + bev_energy(b).total_kwh() == doctest::Approx(whole).epsilon(1e-12));
  }
  // Within a tier, scaling the distance scales the energy.
  const std::vector<BevTrip> t3{{3.0, false}}, t6{{6.0, false}};
  CHECK(bev_energy(t6).total_kwh() == doctest::Approx(2.0 * bev_energy(t3).total_kwh()).epsilon(1e-12));
  CHECK(ice_energy(70.0, Fuel::Diesel) == doctest::Approx(ice_energy(30.0, Fuel::Diesel) + ice_energy(40.0, Fuel::Diesel)));
  CHECK(ice_energy(300.0, Fuel::Gasoline) == doctest::Approx(3.0 * ice_energy(100.0, Fuel::Gasoline)));
}

TEST_CASE("report totals equal row sums") {
  ImpactInputs in;
  in.tsi = 0.8;
  in.vkt[mode_index(TravelMode::Car)] = 1200.0;
  in.vkt[mode_index(TravelMode::Taxi)] = 300.0;
  in.vkt[mode_index(TravelMode::Bus_OP)] = 150.0;
  in.vkt[mode_index(TravelMode::Freight)] = 90.0;
  in.bev_trips = {{4.0, false}, {1.5, true}, {12.0, false}};
  const auto r = impact_report(in);
  ImpactRow sum;
  for (const auto& row : r.rows) {
    sum.vkt_km += row.vkt_km;
    sum.fuel_kwh += row.fuel_kwh;
    sum.electric_kwh += row.electric_kwh;
    sum.nox_kg += row.nox_kg;
    sum.pm_kg += row.pm_kg;
  }
  CHECK(r.total.vkt_km == doctest::Approx(sum.vkt_km).epsilon(1e-9));
  CHECK(r.total.fuel_kwh == doctest::Approx(sum.fuel_kwh).epsilon(1e-9));
  CHECK(r.total.electric_kwh == doctest::Approx(sum.electric_kwh).epsilon(1e-9));
  CHECK(r.total.nox_kg == doctest::Approx(sum.nox_kg).epsilon(1e-9));
  CHECK(r.total.pm_kg == doctest::Approx(sum.pm_kg).epsilon(1e-9));
  // Electric fleet: energy but no tailpipe.
  const auto& amod = r.rows[mode_index(TravelMode::AMOD)];
  const auto& amod_op = r.rows[mode_index(TravelMode::AMOD_OP)];
  CHECK(amod.electric_kwh == doctest::Approx((4.0 * 183.0 + 12.0 * 166.0) * 2.99 / 1000.0).epsilon(1e-12));
  CHECK(amod_op.electric_kwh == doctest::Approx(1.5 * 233.0 * 2.99 / 1000.0).epsilon(1e-12));
  CHECK(amod.nox_kg == 0.0);
  CHECK(amod.fuel_kwh == 0.0);
  // Car row checked by hand.
  const auto& car = r.rows[mode_index(TravelMode::Car)];
  CHECK(car.fuel_kwh == doctest::Approx(ice_energy(1200.0, Fuel::Gasoline)).epsilon(1e-12));
  CHECK(car.nox_kg == doctest::Approx(emissions(VehicleClass::CarPetrol, 1200.0, 0.8).nox_kg).epsilon(1e-12));
}

TEST_CASE("factor validation") {
  EnergyFactors f;
  CHECK_NOTHROW(f.validate());
  f.ecr_mid_wh_km = 300.0;
  CHECK_THROWS(f.validate());
  EnergyFactors g;
  g.production_factor = 0.0;
  CHECK_THROWS(g.validate());
}
