#include "mfdsim/impact.hpp"

#include <cmath>
#include <string>

#include "mfdsim/errors.hpp"

namespace mfdsim {

void EnergyFactors::validate() const {
  for (double v : {ecr_short_wh_km, ecr_mid_wh_km, ecr_long_wh_km, tier1_km, tier2_km, production_factor, mpge_gasoline,
                   mpge_diesel, km_per_kwh_per_mpge, ratio_gasoline, ratio_diesel})
    if (!(v > 0.0)) throw DomainError("energy factors must be > 0");
  if (ecr_mid_wh_km > ecr_short_wh_km || ecr_long_wh_km > ecr_mid_wh_km || tier2_km < tier1_km)
    throw DomainError("energy tiers must be nonincreasing with distance");
}

double bev_ecr_wh_km(double distance_km, const EnergyFactors& f) {
  if (!(distance_km >= 0.0)) throw DomainError("bev_ecr: distance must be >= 0");
  if (distance_km <= f.tier1_km) return f.ecr_short_wh_km;
  if (distance_km <= f.tier2_km) return f.ecr_mid_wh_km;
  return f.ecr_long_wh_km;
}

BevEnergy bev_energy(std::span<const BevTrip> trips, const EnergyFactors& f) {
  BevEnergy e;
  for (const auto& t : trips) {
    const double kwh = t.distance_km * bev_ecr_wh_km(t.distance_km, f) * f.production_factor / 1000.0;
    (t.operational ? e.operational_kwh : e.service_kwh) += kwh;
  }
  return e;
}

std::string_view fuel_name(Fuel f) { return f == Fuel::Gasoline ? "gasoline" : "diesel"; }

Fuel parse_fuel(std::string_view name) {
  if (name == "gasoline") return Fuel::Gasoline;
  if (name == "diesel") return Fuel::Diesel;
  throw DomainError("unknown fuel '" + std::string(name) + "'");
}

double ice_energy(double vkt, Fuel fuel, const EnergyFactors& f) {
  if (!(vkt >= 0.0)) throw DomainError("ice_energy: vkt must be >= 0");
  const double mpge = fuel == Fuel::Gasoline ? f.mpge_gasoline : f.mpge_diesel;
  const double ratio = fuel == Fuel::Gasoline ? f.ratio_gasoline : f.ratio_diesel;
  return vkt / (mpge * f.km_per_kwh_per_mpge) * ratio;
}

double ice_energy(double vkt, std::string_view fuel, const EnergyFactors& f) {
  return ice_energy(vkt, parse_fuel(fuel), f);
}

std::string_view vehicle_class_name(VehicleClass c) {
  switch (c) {
    case VehicleClass::CarPetrol: return "car-petrol";
    case VehicleClass::Bus: return "bus";
    case VehicleClass::Truck: return "truck";
  }
  return "?";
}

const EmissionRange& EmissionFactors::of(VehicleClass c) const {
  switch (c) {
    case VehicleClass::Bus: return bus;
    case VehicleClass::Truck: return truck;
    default: return car;
  }
}

EmissionMass emissions(VehicleClass cls, double vkt, double tsi, const EmissionFactors& f) {
  if (!(tsi > 0.0 && tsi <= 1.0)) throw DomainError("emissions: tsi must be in (0, 1]");
  if (!(vkt >= 0.0)) throw DomainError("emissions: vkt must be >= 0");
  const EmissionRange& r = f.of(cls);
  // Share of the way from the congested end to the free-flow end.
  const double s = tsi <= f.tsi_low ? 0.0 : (tsi - f.tsi_low) / (1.0 - f.tsi_low);
  const double nox = r.nox_high_g_km + s * (r.nox_low_g_km - r.nox_high_g_km);
  const double pm = r.pm_high_g_km + s * (r.pm_low_g_km - r.pm_high_g_km);
  return {nox * vkt / 1000.0, pm * vkt / 1000.0};
}

EmissionMass emissions(std::span<const ClassVkt> vkt, double tsi, const EmissionFactors& f) {
  EmissionMass m;
  for (const auto& v : vkt) {
    const EmissionMass e = emissions(v.cls, v.vkt, tsi, f);
    m.nox_kg += e.nox_kg;
    m.pm_kg += e.pm_kg;
  }
  return m;
}

ModeTechnology mode_technology(TravelMode m) {
  switch (m) {
    case TravelMode::Car:
    case TravelMode::Taxi:
    case TravelMode::MOD:
    case TravelMode::MOD_OP: return {false, true, Fuel::Gasoline, VehicleClass::CarPetrol};
    case TravelMode::Bus_OP: return {false, true, Fuel::Diesel, VehicleClass::Bus};
    case TravelMode::Freight: return {false, true, Fuel::Diesel, VehicleClass::Truck};
    case TravelMode::AMOD:
    case TravelMode::AMOD_OP: return {true, false, Fuel::Gasoline, VehicleClass::CarPetrol};
    default: return {};
  }
}

ImpactReport impact_report(const ImpactInputs& in, const EnergyFactors& ef, const EmissionFactors& em) {
  ImpactReport rep;
  rep.tsi = in.tsi;
  for (TravelMode m : kAllModes) {
    ImpactRow& row = rep.rows[mode_index(m)];
    row.mode = m;
    row.vkt_km = in.vkt[mode_index(m)];
    const ModeTechnology tech = mode_technology(m);
    if (tech.fuelled && row.vkt_km > 0.0) {
      row.fuel_kwh = ice_energy(row.vkt_km, tech.fuel, ef);
      const EmissionMass e = emissions(tech.cls, row.vkt_km, in.tsi, em);
      row.nox_kg = e.nox_kg;
      row.pm_kg = e.pm_kg;
    }
  }
  const BevEnergy bev = bev_energy(in.bev_trips, ef);
  rep.rows[mode_index(TravelMode::AMOD)].electric_kwh = bev.service_kwh;
  rep.rows[mode_index(TravelMode::AMOD_OP)].electric_kwh = bev.operational_kwh;
  for (const auto& r : rep.rows) {
    rep.total.vkt_km += r.vkt_km;
    rep.total.fuel_kwh += r.fuel_kwh;
    rep.total.electric_kwh += r.electric_kwh;
    rep.total.nox_kg += r.nox_kg;
    rep.total.pm_kg += r.pm_kg;
  }
  return rep;
}

ImpactInputs impact_inputs(const SimOutput& out, double tsi) {
  ImpactInputs in;
  in.tsi = tsi;
  for (const auto& rec : out.trajectories) {
    if (rec.kind != EntityKind::Vehicle) continue;
    for (const auto& leg : rec.legs) {
      const ModeFlags fl = mode_flags(leg.mode);
      if (!fl.road_based || !fl.contributes_vehicle_flow) continue;
      in.vkt[mode_index(leg.mode)] += leg.distance_km;
      if (leg.mode == TravelMode::AMOD || leg.mode == TravelMode::AMOD_OP)
        in.bev_trips.push_back({leg.distance_km, leg.mode == TravelMode::AMOD_OP});
    }
  }
  return in;
}

}  // namespace mfdsim
