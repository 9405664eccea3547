#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfdsim/equilibrium.hpp"
#include "mfdsim/fit.hpp"
#include "mfdsim/fleet.hpp"
#include "mfdsim/hysteresis.hpp"
#include "mfdsim/impact.hpp"
#include "mfdsim/mfd.hpp"
#include "mfdsim/simulation.hpp"

namespace mfdsim::io {

using json = nlohmann::json;

/// One row per leg; a record without legs gets a single row with leg -1.
void write_trajectories(const std::filesystem::path& path, const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> read_trajectories(const std::filesystem::path& path);

void write_segment_stats(const std::filesystem::path& path, const SegmentStateSeries& series, const Network& net);
/// Queue lengths are not persisted and read back as zero.
SegmentStateSeries read_segment_stats(const std::filesystem::path& path, const Network& net, double interval_s);

void write_events(const std::filesystem::path& path, const std::vector<ControllerEvent>& events);
std::vector<ControllerEvent> read_events(const std::filesystem::path& path);

void write_unserved(const std::filesystem::path& path, const std::vector<UnservedTrip>& unserved);
std::vector<UnservedTrip> read_unserved(const std::filesystem::path& path);

void write_convergence(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows);

void write_mfd_samples(const std::filesystem::path& path, const std::vector<MfdSample>& samples);
std::vector<MfdSample> read_mfd_samples(const std::filesystem::path& path);

struct EpisodeHysteresis {
  Episode episode;
  HysteresisResult result;
};
void write_hysteresis(const std::filesystem::path& path, const std::vector<EpisodeHysteresis>& episodes);

/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const json& value);
json read_json(const std::filesystem::path& path);

json to_json(const MfdParams& p);
json to_json(const FitReport& r);
json to_json(const FleetKpis& k);
json to_json(const ImpactReport& r);
json to_json(const ConservationSample& c);

}  // namespace mfdsim::io
