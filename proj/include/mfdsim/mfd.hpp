#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "mfdsim/modes.hpp"
#include "mfdsim/network.hpp"
#include "mfdsim/simulation.hpp"
#include "mfdsim/supply.hpp"

namespace mfdsim {

/// Length-weighted mean density scaled to the network length:
/// (sum k_n l_n / sum l_n) * L_N. Throws DomainError on an empty subset.
double accumulation(std::span<const double> density, std::span<const double> length_km, double network_km);

/// Same weighting applied to segment flows (veh/h), giving veh-km/h.
double production(std::span<const double> flow, std::span<const double> length_km, double network_km);

/// Sample standard deviation of segment densities. Needs at least 2 values.
double gamma(std::span<const double> density);

struct Completion {
  TravelMode mode = TravelMode::Car;
  double distance_km = 0.0;
};

/// Sum over passenger modes of (completions per hour) * (mean distance).
double passenger_production(std::span<const Completion> completions, double interval_s);

/// Segment subset used as the sensor set. Empty = every segment.
struct SensorSet {
  std::vector<std::size_t> segments;
};

double accumulation(const SegmentInterval& iv, const Network& net, const SensorSet& sensors = {});
double production(const SegmentInterval& iv, const Network& net, const SensorSet& sensors = {});

/// Time-mean number of active vehicle legs per mode for every interval of
/// [0, horizon). Only modes that are road-based and carry vehicle flow count.
std::vector<std::array<double, kModeCount>> accumulation_by_mode(const std::vector<TrajectoryRecord>& records,
                                                                  double interval_s, double horizon_s);

/// Time-mean number of travellers between their first departure and last
/// arrival, per interval.
std::vector<double> passenger_accumulation(const std::vector<TrajectoryRecord>& records, double interval_s,
                                           double horizon_s);

/// P_P per interval from completed passenger records of passenger-flow modes.
std::vector<double> passenger_production_series(const std::vector<TrajectoryRecord>& records, double interval_s,
                                                double horizon_s);

struct MfdSample {
  double t_s = 0.0;
  double A_V = 0.0;
  double P_V = 0.0;
  double gamma = 0.0;
  double A_P = 0.0;
  double P_P = 0.0;
  std::array<double, kModeCount> A_mode{};

  bool operator==(const MfdSample&) const = default;
};

std::vector<MfdSample> compute_samples(const SimOutput& out, const Network& net, const SensorSet& sensors = {});

enum class MfdKind { vMFD, pMFD };

struct MfdParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double r = 0.0;
  double rho = 0.0;
  MfdKind kind = MfdKind::vMFD;

  bool operator==(const MfdParams&) const = default;
};

/// P = a A exp(b A^3 + c A^2 + d A + r gamma). Throws DomainError for A < 0
/// or when the exponent overflows.
double eval_vmfd(const MfdParams& p, double A, double gamma);
/// eval_vmfd with rho * A_P added to the exponent.
double eval_pmfd(const MfdParams& p, double A, double gamma, double A_P);

/// sqrt(T * sum (P - P')^2) / sum P'.
double rmsn(std::span<const double> predicted, std::span<const double> observed);

struct TripSpeed {
  double distance_km = 0.0;
  double travel_time_s = 0.0;
  double free_flow_s = 0.0;
};

/// Distance-weighted ratio of trip speed to free-flow trip speed.
double tsi(std::span<const TripSpeed> trips);

/// Road vehicle movements (one entry per vehicle leg) starting in [from, to).
std::vector<TripSpeed> trip_speeds(const std::vector<TrajectoryRecord>& records, double from_s, double to_s);

/// In-vehicle delay in minutes, clamped at 0; `clamped` counts clamps.
double ivd(double ivtt_min, double ivtt_free_min, std::size_t* clamped = nullptr);

/// Mean IVD (minutes) over completed passenger trips departing in [from, to).
double mean_ivd(const std::vector<TrajectoryRecord>& records, double from_s, double to_s,
                std::size_t* clamped = nullptr);

}  // namespace mfdsim
