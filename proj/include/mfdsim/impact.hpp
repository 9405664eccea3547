#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "mfdsim/modes.hpp"
#include "mfdsim/simulation.hpp"

namespace mfdsim {

struct EnergyFactors {
  /// BEV consumption tiers, Wh/km, split at 2 km and 10 km of trip distance.
  double ecr_short_wh_km = 233.0;
  double ecr_mid_wh_km = 183.0;
  double ecr_long_wh_km = 166.0;
  double tier1_km = 2.0;
  double tier2_km = 10.0;
  double production_factor = 2.99;
  double mpge_gasoline = 47.0;
  double mpge_diesel = 52.0;
  double km_per_kwh_per_mpge = 0.04775;
  double ratio_gasoline = 1.17;
  double ratio_diesel = 1.05;

  void validate() const;
};

/// Consumption rate of one BEV trip by its distance tier.
double bev_ecr_wh_km(double distance_km, const EnergyFactors& f = {});

struct BevTrip {
  double distance_km = 0.0;
  /// Empty movement (pickup, cruising, parking) rather than passenger service.
  bool operational = false;
};

struct BevEnergy {
  double service_kwh = 0.0;
  double operational_kwh = 0.0;
  double total_kwh() const { return service_kwh + operational_kwh; }
};

/// Well-to-wheels BEV energy, summed per trip. Throws DomainError on a
/// negative distance.
BevEnergy bev_energy(std::span<const BevTrip> trips, const EnergyFactors& f = {});

enum class Fuel { Gasoline, Diesel };

std::string_view fuel_name(Fuel f);
/// Throws DomainError for anything but "gasoline" or "diesel".
Fuel parse_fuel(std::string_view name);

/// Fuel energy (kWh) of `vkt` km driven on the given fuel.
double ice_energy(double vkt, Fuel fuel, const EnergyFactors& f = {});
double ice_energy(double vkt, std::string_view fuel, const EnergyFactors& f = {});

enum class VehicleClass { CarPetrol, Bus, Truck };

std::string_view vehicle_class_name(VehicleClass c);

struct EmissionRange {
  double nox_low_g_km = 0.0;
  double nox_high_g_km = 0.0;
  double pm_low_g_km = 0.0;
  double pm_high_g_km = 0.0;
};

struct EmissionFactors {
  EmissionRange car{0.043, 0.063, 0.0037, 0.0037};
  EmissionRange bus{0.69, 1.11, 0.015, 0.015};
  EmissionRange truck{0.28, 0.44, 0.0061, 0.010};
  /// TSI at and below which the high end of each range applies.
  double tsi_low = 0.5;

  const EmissionRange& of(VehicleClass c) const;
};

struct EmissionMass {
  double nox_kg = 0.0;
  double pm_kg = 0.0;
};

/// Rates run linearly from the high end at tsi_low to the low end at tsi 1.
/// Throws DomainError unless 0 < tsi <= 1 and vkt >= 0.
EmissionMass emissions(VehicleClass cls, double vkt, double tsi, const EmissionFactors& f = {});

struct ClassVkt {
  VehicleClass cls = VehicleClass::CarPetrol;
  double vkt = 0.0;
};
EmissionMass emissions(std::span<const ClassVkt> vkt, double tsi, const EmissionFactors& f = {});

/// Energy source of a vehicle mode. Electric modes have no fuel or tailpipe.
struct ModeTechnology {
  bool electric = false;
  bool fuelled = false;
  Fuel fuel = Fuel::Gasoline;
  VehicleClass cls = VehicleClass::CarPetrol;
};
ModeTechnology mode_technology(TravelMode m);

struct ImpactRow {
  TravelMode mode = TravelMode::Car;
  double vkt_km = 0.0;
  double fuel_kwh = 0.0;
  double electric_kwh = 0.0;
  double nox_kg = 0.0;
  double pm_kg = 0.0;
};

struct ImpactReport {
  double tsi = 1.0;
  std::array<ImpactRow, kModeCount> rows{};
  ImpactRow total;
};

struct ImpactInputs {
  /// Vehicle-km per mode (indexed by mode_index).
  std::array<double, kModeCount> vkt{};
  /// AMOD fleet legs; service legs feed AMOD, empty legs AMOD_OP.
  std::vector<BevTrip> bev_trips;
  double tsi = 1.0;
};

ImpactReport impact_report(const ImpactInputs& in, const EnergyFactors& ef = {}, const EmissionFactors& em = {});

/// VKT per mode and AMOD legs from vehicle trajectories.
ImpactInputs impact_inputs(const SimOutput& out, double tsi);

}  // namespace mfdsim
