#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mfdsim/modes.hpp"
#include "mfdsim/network.hpp"
#include "mfdsim/skims.hpp"

namespace mfdsim {

enum class ServiceType : std::uint8_t { None, Single, Shared };
enum class Activity : std::uint8_t { Work, Education, Shopping, Other };

inline constexpr std::size_t kActivityCount = 4;

std::string_view service_name(ServiceType s);
std::string_view activity_name(Activity a);

struct Trip {
  std::int64_t person_id = 0;
  NodeId origin = 0;
  NodeId destination = 0;
  double departure_s = 0.0;
  TravelMode mode = TravelMode::Car;
  ServiceType service = ServiceType::None;
  Activity activity = Activity::Other;

  bool operator==(const Trip&) const = default;
};

using TripTable = std::vector<Trip>;

/// Taxi tariff plus the on-demand pricing knobs.
struct FareSchedule {
  double base = 3.2;          // SGD
  double per_km_low = 0.55;   // SGD/km on the first `tier_km`
  double per_km_high = 0.63;  // SGD/km beyond `tier_km`
  double tier_km = 10.0;
  double per_min = 0.29;      // SGD/min
  double amod_pricing_factor = 1.0;
  double shared_discount = 0.75;
};

/// Base + distance component + time component. The higher per-km rate only
/// applies to the distance beyond the tier boundary, so the fare is
/// continuous in distance. Throws DomainError on negative input.
double taxi_fare(double distance_km, double duration_min, const FareSchedule& fares = {});

/// AMOD price as a fraction of the taxi fare; shared rides get a further
/// discount.
double amod_fare(double taxi_fare_sgd, double pricing_factor, bool shared, double shared_discount = 0.75);

struct DemandProfile {
  /// Hourly departure weights per activity (Work, Education, Shopping, Other).
  std::array<std::array<double, 24>, kActivityCount> hourly{};
  std::array<double, kActivityCount> activity_shares{0.25, 0.25, 0.25, 0.25};
  /// Share target per mode (indexed by mode_index); non-person modes ignored.
  std::array<double, kModeCount> mode_shares{};
  /// Probability that an on-demand trip requests a shared ride.
  double shared_fraction = 0.3;
  std::size_t total_trips = 0;
  std::uint64_t seed = 1;

  static DemandProfile uniform(std::size_t trips, std::uint64_t seed);
  /// Throws DomainError when a weight vector or share vector does not sum to 1.
  void validate() const;
};

/// Synthetic trip table: activity, hour and mode are drawn from the profile;
/// origin and destination zones proportionally to zone demand weights. The
/// result is sorted by (departure, person_id).
TripTable generate_trips(const DemandProfile& profile, const Network& network, std::uint64_t seed);

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct TripLoadResult {
  TripTable trips;
  std::vector<RejectedRow> rejected;
};

/// Reads trips.csv. Structural problems (header, field count, unparsable
/// numbers) throw ParseError; rows that parse but break a Trip invariant are
/// returned in `rejected` with their line numbers.
TripLoadResult load_trips(const std::filesystem::path& path);
void write_trips(const std::filesystem::path& path, const TripTable& trips);

struct ChoiceParams {
  std::array<double, kModeCount> asc{};
  std::array<bool, kModeCount> available{};
  /// Utility per minute of generalized cost.
  double cost_coef = 0.08;
  /// SGD per minute; fares enter the generalized cost as fare / VOT.
  double value_of_time = 0.25;
  double car_cost_per_km = 0.22;
  double pt_fare_base = 0.92;
  double pt_fare_per_km = 0.07;
  double mod_fare_factor = 1.0;
  /// Probability that a new on-demand trip is shared.
  double shared_fraction = 0.3;
  std::uint64_t seed = 7;

  /// Existing modes: Car, Taxi, MOD, Bus, Rail, Other available; AMOD not.
  static ChoiceParams existing_modes();
};

/// Generalized cost (minutes) of one mode for one trip, or +inf when the
/// mode is unavailable. Throws DomainError on a missing skim entry.
double generalized_cost(const Trip& trip, TravelMode mode, const SkimMatrix& skims, const Network& network,
                        const FareSchedule& fares, const ChoiceParams& params, bool shared);

/// Multinomial-logit re-choice of every non-freight trip. Draws use
/// per-(trip, mode) Gumbel noise keyed on the seed, so two calls that only
/// differ in one mode's utility only move trips to or from that mode.
TripTable mode_shift(const TripTable& trips, const SkimMatrix& skims, const Network& network,
                     const FareSchedule& fares, const ChoiceParams& params);

/// Closed-form logit probabilities of the available person modes for a trip.
std::array<double, kModeCount> choice_probabilities(const Trip& trip, const SkimMatrix& skims,
                                                    const Network& network, const FareSchedule& fares,
                                                    const ChoiceParams& params);

/// Share of each mode in a trip table (indexed by mode_index).
std::array<double, kModeCount> mode_shares(const TripTable& trips);

}  // namespace mfdsim
