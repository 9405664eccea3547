#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "mfdsim/demand.hpp"
#include "mfdsim/routing.hpp"
#include "mfdsim/simulation.hpp"
#include "mfdsim/skims.hpp"

namespace mfdsim {

/// t_i * w + t_S * (1 - w), elementwise. Throws DomainError on a shape
/// mismatch or w outside [0, 1].
TravelTimeTable blend_travel_times(const TravelTimeTable& t_i, const TravelTimeTable& t_s, double w);

/// max |b - a| / a over all cells (a > 0).
double max_relative_gap(const TravelTimeTable& a, const TravelTimeTable& b);
double mean_travel_time(const TravelTimeTable& t);

struct LearningConfig {
  double w = 0.5;
  double tolerance = 0.01;
  int max_iterations = 20;

  void validate() const;
};

struct ConvergenceRow {
  int iteration = 0;
  double max_rel_gap = 0.0;
  double mean_tt_s = 0.0;

  bool operator==(const ConvergenceRow&) const = default;
};

struct LearningResult {
  TravelTimeTable table;
  std::vector<ConvergenceRow> trace;
  /// False when max_iterations ran out first (a warning, not an error).
  bool converged = false;
};

/// Observed supply times for a routing table.
using SupplyFunction = std::function<TravelTimeTable(const TravelTimeTable&)>;

/// Iterates t_{i+1} = blend(t_i, supply(t_i), w) until the relative change
/// between iterates drops below the tolerance.
LearningResult learn_travel_times(const TravelTimeTable& t0, const SupplyFunction& supply, const LearningConfig& cfg);

using Simulator = std::function<SimOutput(const ScenarioInputs&)>;

struct WithinDayResult {
  LearningResult learning;
  /// Output of the last simulated iteration.
  SimOutput output;
};

/// Routing table starts at inputs.routing, or free-flow on stats-interval
/// periods when empty.
WithinDayResult within_day_loop(const ScenarioInputs& inputs, const LearningConfig& cfg,
                                const Simulator& simulate = run_scenario);

struct SkimConfig {
  double period_s = 3600.0;
  /// Used when the controller log has no completed pickups at all.
  double default_fleet_wait_min = 5.0;
  double taxi_wait_min = 5.0;
  double walk_speed_kmh = 5.0;
};

/// Mean pickup wait (minutes) per skim period for one fleet kind, from
/// REQUEST/PICKUP pairs keyed by request time. Periods without pickups get
/// the all-day mean, or nullopt when there is none.
std::vector<std::optional<double>> fleet_wait_means(const std::vector<ControllerEvent>& events, FleetKind kind,
                                                    std::size_t periods, double period_s);

/// Zone-centroid skims for every person mode. Road times come from `times`.
SkimMatrix build_skims(const Network& network, const TravelTimeTable& times, const std::vector<BusLine>& bus_lines,
                       const std::vector<RailLine>& rail_lines, const std::vector<ControllerEvent>& events,
                       double horizon_s, const SkimConfig& cfg = {});

/// Skims from a finished run: observed times and the run's controller log.
SkimMatrix build_skims(const Network& network, const SimOutput& out, const std::vector<BusLine>& bus_lines,
                       const std::vector<RailLine>& rail_lines, const SkimConfig& cfg = {});

struct DayToDayConfig {
  int days = 1;
  bool mode_shift = true;
  LearningConfig learning;
  SkimConfig skims;
  FareSchedule fares;
  ChoiceParams choice = ChoiceParams::existing_modes();
  /// AMOD pricing factor per day; the last value repeats. Empty = fares.
  std::vector<double> amod_pricing_by_day;
};

struct DayResult {
  int day = 0;
  std::array<double, kModeCount> shares{};
  std::vector<ConvergenceRow> trace;
  bool converged = false;
};

struct DayToDayResult {
  TripTable trips;
  WithinDayResult last;
  std::vector<DayResult> days;
  std::vector<SkimMatrix> skims;
};

DayToDayResult day_to_day_loop(const ScenarioInputs& inputs, const DayToDayConfig& cfg,
                               const Simulator& simulate = run_scenario);

}  // namespace mfdsim
