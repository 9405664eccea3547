#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mfdsim/config.hpp"
#include "mfdsim/equilibrium.hpp"
#include "mfdsim/io.hpp"
#include "mfdsim/manifest.hpp"

namespace mfdsim {

struct SimulationRun {
  /// Trip table entering the first day (after the optional initial choice).
  TripTable initial_trips;
  DayToDayResult result;
};

/// Initial mode choice on free-flow skims (when configured), then the
/// day-to-day loop.
SimulationRun simulate_scenario(const Scenario& scenario, const Simulator& simulate = run_scenario);

/// Writes every simulation output into `dir` and returns the file names
/// written, relative to `dir`, in a fixed order.
std::vector<std::string> write_simulation(const std::filesystem::path& dir, const Scenario& scenario,
                                          const SimulationRun& run);

/// A simulation directory read back from disk.
struct LoadedRun {
  Network network;
  SimOutput output;
  nlohmann::json info;
};

/// Throws ParseError when a file is missing or malformed.
LoadedRun load_run(const std::filesystem::path& dir);

struct Analysis {
  std::vector<MfdSample> samples;
  std::vector<io::EpisodeHysteresis> hysteresis;
  ImpactReport impact;
  nlohmann::json kpis;
};

Analysis analyze_run(const LoadedRun& run);
std::vector<std::string> write_analysis(const std::filesystem::path& dir, const Analysis& analysis);

/// Side-by-side deltas of kpis.json documents against the first one.
/// Throws ConfigError("horizon_s") when horizons differ.
nlohmann::json compare_kpis(const std::vector<std::string>& names, const std::vector<nlohmann::json>& kpis);

}  // namespace mfdsim
