#pragma once

#include <cstdint>
#include <vector>

#include "mfdsim/mfd.hpp"

namespace mfdsim {

struct FitSample {
  double A = 0.0;
  double gamma = 0.0;
  double A_P = 0.0;
  double P = 0.0;
};

struct SolverConfig {
  int max_iterations = 500;
  /// Jittered restarts in addition to the default starting point.
  int restarts = 5;
  std::uint64_t seed = 1;
  /// Grid on [0, max A] where the speed constraint is checked.
  int grid_points = 500;
  double penalty_start = 1.0;
  double penalty_growth = 10.0;
  int max_penalty_rounds = 8;
  /// Largest allowed d(ln speed)/d(A / max A). A quadratic penalty only
  /// reaches zero in the limit.
  double constraint_tolerance = 1e-6;
  /// Relative cost decrease below which a stage stops.
  double tolerance = 1e-14;
};

struct FitReport {
  MfdParams params;
  double Z = 0.0;
  double rmsn = 0.0;
  /// Space-mean speed P/A is nonincreasing on [0, max A] (within tolerance).
  bool speed_constraint_satisfied = true;
  /// Speed constraint binds somewhere on the grid at the solution.
  bool speed_constraint_active = false;
  /// Production >= 0 holds by construction (a > 0); kept for the report.
  bool production_constraint_active = false;
  int iterations = 0;
  int penalty_rounds = 0;
  int start_index = 0;
  /// Penalized objective after every accepted step of the chosen start,
  /// with the penalty stage of each entry.
  std::vector<double> trace;
  std::vector<int> trace_stage;
  std::size_t samples = 0;
};

/// Constrained nonlinear least squares for the vMFD / pMFD exponential model.
/// Throws FitError with fewer than 20 samples or a degenerate accumulation
/// range. Deterministic for a given config.
FitReport fit_mfd(const std::vector<FitSample>& samples, MfdKind kind, const SolverConfig& config = {});

std::vector<FitSample> fit_samples(const std::vector<MfdSample>& samples, bool passenger);

}  // namespace mfdsim
