#pragma once

#include <optional>
#include <span>
#include <vector>

namespace mfdsim {

struct SplineConfig {
  /// Fixed smoothing parameter; chosen by generalized cross-validation when unset.
  std::optional<double> lambda;
  /// log10 search range of the GCV grid, relative to the data's natural scale.
  double log_min = -8.0;
  double log_max = 6.0;
  int grid = 57;
};

/// Natural cubic smoothing spline minimizing
/// sum w_i (y_i - g(x_i))^2 + lambda * integral g''(x)^2 dx.
/// Duplicate abscissae are merged (weighted mean, summed weights). Outside
/// the data range the spline continues linearly.
class SmoothingSpline {
 public:
  SmoothingSpline() = default;

  static SmoothingSpline fit(std::span<const double> x, std::span<const double> y, const SplineConfig& config = {},
                             std::span<const double> weights = {});

  double operator()(double x) const;

  double lambda() const { return lambda_; }
  double gcv_score() const { return gcv_; }
  double x_min() const { return x_.empty() ? 0.0 : x_.front(); }
  double x_max() const { return x_.empty() ? 0.0 : x_.back(); }
  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return g_; }

 private:
  std::vector<double> x_;
  std::vector<double> g_;    // fitted values at knots
  std::vector<double> g2_;   // second derivatives at knots
  double lambda_ = 0.0;
  double gcv_ = 0.0;
};

}  // namespace mfdsim
