#include "mfdsim/spline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfdsim/errors.hpp"

namespace mfdsim {

namespace {

/// Symmetric positive definite matrix with two sub-diagonals, factored in place.
class Pentadiagonal {
 public:
  explicit Pentadiagonal(std::size_t n) : d0_(n, 0.0), d1_(n, 0.0), d2_(n, 0.0) {}

  // Lower-triangle entries: (i, i), (i, i-1), (i, i-2).
  double& diag(std::size_t i) { return d0_[i]; }
  double& sub1(std::size_t i) { return d1_[i]; }
  double& sub2(std::size_t i) { return d2_[i]; }

  void factor() {
    const std::size_t n = d0_.size();
    for (std::size_t i = 0; i < n; ++i) {
      double l2 = 0.0, l1 = 0.0;
      if (i >= 2) l2 = d2_[i] / d0_[i - 2];
      if (i >= 1) l1 = (d1_[i] - (i >= 2 ? l2 * d1_[i - 1] : 0.0)) / d0_[i - 1];
      const double v = d0_[i] - l2 * l2 - l1 * l1;
      if (!(v > 0.0)) throw DomainError("smoothing spline: system not positive definite");
      d2_[i] = l2;
      d1_[i] = l1;
      d0_[i] = std::sqrt(v);
    }
  }

  void solve(std::vector<double>& b) const {
    const std::size_t n = d0_.size();
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[i];
      if (i >= 1) s -= d1_[i] * b[i - 1];
      if (i >= 2) s -= d2_[i] * b[i - 2];
      b[i] = s / d0_[i];
    }
    for (std::size_t k = n; k-- > 0;) {
      double s = b[k];
      if (k + 1 < n) s -= d1_[k + 1] * b[k + 1];
      if (k + 2 < n) s -= d2_[k + 2] * b[k + 2];
      b[k] = s / d0_[k];
    }
  }

 private:
  std::vector<double> d0_, d1_, d2_;
};

struct Data {
  std::vector<double> x, y, w, h;
};

struct Solution {
  std::vector<double> g, g2;
  double gcv = 0.0;
};

/// Column j (0-based, j = 0..n-3) of Q touches rows j, j+1, j+2.
double q_entry(const Data& d, std::size_t row, std::size_t col) {
  if (row == col) return 1.0 / d.h[col];
  if (row == col + 1) return -1.0 / d.h[col] - 1.0 / d.h[col + 1];
  if (row == col + 2) return 1.0 / d.h[col + 1];
  return 0.0;
}

Solution solve(const Data& d, double lambda, bool want_gcv) {
  const std::size_t n = d.x.size();
  const std::size_t m = n - 2;
  Pentadiagonal M(m);
  for (std::size_t j = 0; j < m; ++j) {
    M.diag(j) = (d.h[j] + d.h[j + 1]) / 3.0;
    if (j >= 1) M.sub1(j) = d.h[j] / 6.0;
  }
  // lambda * Q^T W^-1 Q, accumulated row by row of Q.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c0 = i >= 2 ? i - 2 : 0;
    const std::size_t c1 = std::min(i, m - 1);
    for (std::size_t a = c0; a <= c1; ++a) {
      for (std::size_t b = c0; b <= a; ++b) {
        const double v = lambda * q_entry(d, i, a) * q_entry(d, i, b) / d.w[i];
        if (a == b) M.diag(a) += v;
        else if (a == b + 1) M.sub1(a) += v;
        else M.sub2(a) += v;
      }
    }
  }
  M.factor();

  std::vector<double> qty(m);
  for (std::size_t j = 0; j < m; ++j)
    qty[j] = d.y[j] * q_entry(d, j, j) + d.y[j + 1] * q_entry(d, j + 1, j) + d.y[j + 2] * q_entry(d, j + 2, j);
  M.solve(qty);

  Solution s;
  s.g.resize(n);
  s.g2.assign(n, 0.0);
  for (std::size_t j = 0; j < m; ++j) s.g2[j + 1] = qty[j];
  for (std::size_t i = 0; i < n; ++i) {
    double qg = 0.0;
    const std::size_t c0 = i >= 2 ? i - 2 : 0;
    const std::size_t c1 = std::min(i, m - 1);
    for (std::size_t c = c0; c <= c1; ++c) qg += q_entry(d, i, c) * qty[c];
    s.g[i] = d.y[i] - lambda * qg / d.w[i];
  }

  if (want_gcv) {
    double trace_off = 0.0;  // trace of W^-1 Q M^-1 Q^T
    std::vector<double> z(m);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(z.begin(), z.end(), 0.0);
      const std::size_t c0 = i >= 2 ? i - 2 : 0;
      const std::size_t c1 = std::min(i, m - 1);
      for (std::size_t c = c0; c <= c1; ++c) z[c] = q_entry(d, i, c);
      std::vector<double> rhs = z;
      M.solve(rhs);
      double dot = 0.0;
      for (std::size_t c = c0; c <= c1; ++c) dot += z[c] * rhs[c];
      trace_off += dot / d.w[i];
    }
    const double tr = static_cast<double>(n) - lambda * trace_off;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) rss += d.w[i] * (d.y[i] - s.g[i]) * (d.y[i] - s.g[i]);
    const double denom = 1.0 - tr / static_cast<double>(n);
    s.gcv = denom > 1e-12 ? (rss / static_cast<double>(n)) / (denom * denom) : std::numeric_limits<double>::infinity();
  }
  return s;
}

}  // namespace

SmoothingSpline SmoothingSpline::fit(std::span<const double> x, std::span<const double> y, const SplineConfig& config,
                                     std::span<const double> weights) {
  if (x.size() != y.size() || x.empty()) throw DomainError("smoothing spline: x and y must be non-empty and equal length");
  if (!weights.empty() && weights.size() != x.size()) throw DomainError("smoothing spline: weight count mismatch");
  if (config.lambda && *config.lambda < 0.0) throw DomainError("smoothing spline: lambda must be >= 0");

  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  const double range = x[order.back()] - x[order.front()];
  const double merge_tol = 1e-10 * std::max(1.0, std::abs(range));

  Data d;
  for (std::size_t k : order) {
    const double w = weights.empty() ? 1.0 : weights[k];
    if (!(w > 0.0)) throw DomainError("smoothing spline: weights must be > 0");
    if (!d.x.empty() && x[k] - d.x.back() <= merge_tol) {
      const double wt = d.w.back() + w;
      d.y.back() = (d.y.back() * d.w.back() + y[k] * w) / wt;
      d.w.back() = wt;
      continue;
    }
    d.x.push_back(x[k]);
    d.y.push_back(y[k]);
    d.w.push_back(w);
  }
  const std::size_t n = d.x.size();
  SmoothingSpline s;
  s.x_ = d.x;
  s.g2_.assign(n, 0.0);
  if (n <= 2) {
    s.g_ = d.y;
    s.lambda_ = config.lambda.value_or(0.0);
    return s;
  }
  const double wmean = std::accumulate(d.w.begin(), d.w.end(), 0.0) / static_cast<double>(n);
  for (double& w : d.w) w /= wmean;
  for (std::size_t i = 0; i + 1 < n; ++i) d.h.push_back(d.x[i + 1] - d.x[i]);

  double lambda = 0.0;
  if (config.lambda) {
    lambda = *config.lambda;
  } else {
    // Natural scale: trace(R) / trace(Q^T W^-1 Q).
    double tr_r = 0.0, tr_q = 0.0;
    for (std::size_t j = 0; j + 2 < n; ++j) {
      tr_r += (d.h[j] + d.h[j + 1]) / 3.0;
      for (std::size_t i = j; i <= j + 2; ++i) tr_q += q_entry(d, i, j) * q_entry(d, i, j) / d.w[i];
    }
    const double scale = tr_r / tr_q;
    auto score = [&](double lg) { return solve(d, scale * std::pow(10.0, lg), true).gcv; };
    const int grid = std::max(3, config.grid);
    const double step = (config.log_max - config.log_min) / (grid - 1);
    double best_lg = config.log_min;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid; ++k) {
      const double lg = config.log_min + k * step;
      const double v = score(lg);
      if (v < best) {
        best = v;
        best_lg = lg;
      }
    }
    // Golden-section refinement around the best grid point.
    double lo = best_lg - step, hi = best_lg + step;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
    double fa = score(a), fb = score(b);
    for (int it = 0; it < 40; ++it) {
      if (fa < fb) {
        hi = b;
        b = a;
        fb = fa;
        a = hi - phi * (hi - lo);
        fa = score(a);
      } else {
        lo = a;
        a = b;
        fa = fb;
        b = lo + phi * (hi - lo);
        fb = score(b);
      }
    }
    const double refined = 0.5 * (lo + hi);
    best_lg = score(refined) <= best ? refined : best_lg;
    lambda = scale * std::pow(10.0, best_lg);
  }
  const Solution sol = solve(d, lambda, true);
  s.g_ = sol.g;
  s.g2_ = sol.g2;
  s.lambda_ = lambda;
  s.gcv_ = sol.gcv;
  return s;
}

double SmoothingSpline::operator()(double x) const {
  const std::size_t n = x_.size();
  if (n == 0) throw DomainError("smoothing spline: not fitted");
  if (n == 1) return g_[0];
  if (x <= x_.front()) {
    const double h = x_[1] - x_[0];
    const double slope = (g_[1] - g_[0]) / h - h * (2.0 * g2_[0] + g2_[1]) / 6.0;
    return g_[0] + slope * (x - x_[0]);
  }
  if (x >= x_.back()) {
    const double h = x_[n - 1] - x_[n - 2];
    const double slope = (g_[n - 1] - g_[n - 2]) / h + h * (g2_[n - 2] + 2.0 * g2_[n - 1]) / 6.0;
    return g_[n - 1] + slope * (x - x_[n - 1]);
  }
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
  const double h = x_[i + 1] - x_[i];
  const double a = x - x_[i];
  const double b = x_[i + 1] - x;
  return (a * g_[i + 1] + b * g_[i]) / h -
         a * b / 6.0 * ((1.0 + a / h) * g2_[i + 1] + (1.0 + b / h) * g2_[i]);
}

}  // namespace mfdsim
