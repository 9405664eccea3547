#pragma once

#include <string>
#include <vector>

#include "mfdsim/spline.hpp"

namespace mfdsim {

struct BranchSample {
  double t_s = 0.0;
  double A = 0.0;
  double P = 0.0;
};

/// One congestion episode: loading runs up to the accumulation peak,
/// unloading from the peak on. The peak sample belongs to both branches.
struct Episode {
  std::vector<BranchSample> loading;
  std::vector<BranchSample> unloading;
  double start_s = 0.0;
  double peak_s = 0.0;
  double end_s = 0.0;
};

/// Splits a time-ordered series into episodes. Runs with A at or above
/// `min A + threshold_fraction * (max A - min A)` are episodes; each is widened to the lowest
/// sample of the neighbouring low runs. With `min_run` > 1, high runs shorter
/// than `min_run` samples are dropped and high runs separated by fewer than
/// `min_run` low samples are merged.
std::vector<Episode> split_branches(const std::vector<BranchSample>& samples, double threshold_fraction = 0.2,
                                    std::size_t min_run = 1);

struct HysteresisResult {
  bool ok = false;
  std::string diagnostic;
  double a_min = 0.0;  // overlap of the two branches
  double a_max = 0.0;
  std::vector<double> grid_A;
  std::vector<double> h;
  /// Time integral of h along the unloading branch, in (production unit) * hours.
  double total = 0.0;
  double max_h = 0.0;
  double loading_start_s = 0.0;
  double loading_end_s = 0.0;
  double unloading_start_s = 0.0;
  double unloading_end_s = 0.0;
};

/// h(A) = P_loading(A) - P_unloading(A) from smoothing splines of both
/// branches, on a uniform grid over their common accumulation range.
HysteresisResult hysteresis(const std::vector<BranchSample>& loading, const std::vector<BranchSample>& unloading,
                            const SplineConfig& spline = {}, int grid_points = 101);

}  // namespace mfdsim
