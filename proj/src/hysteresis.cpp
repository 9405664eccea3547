#include "mfdsim/hysteresis.hpp"

#include <algorithm>
#include <cmath>

#include "mfdsim/errors.hpp"

namespace mfdsim {

std::vector<Episode> split_branches(const std::vector<BranchSample>& s, double threshold_fraction,
                                    std::size_t min_run) {
  std::vector<Episode> out;
  if (s.empty()) return out;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i].t_s < s[i - 1].t_s) throw DomainError("split_branches: samples must be time-ordered");
  double amax = 0.0, amin = s.front().A;
  for (const auto& x : s) {
    amax = std::max(amax, x.A);
    amin = std::min(amin, x.A);
  }
  if (!(amax > 0.0) || !(amax > amin)) return out;
  // Measured from the daily floor, so a constant background does not hide the troughs.
  const double theta = amin + threshold_fraction * (amax - amin);
  const std::size_t n = s.size();

  // High runs [b, e) with A >= theta.
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < n;) {
    if (s[i].A < theta) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && s[j].A >= theta) ++j;
    runs.emplace_back(i, j);
    i = j;
  }
  if (min_run > 1) {
    std::vector<std::pair<std::size_t, std::size_t>> merged;
    for (const auto& r : runs) {
      if (!merged.empty() && r.first - merged.back().second < min_run)
        merged.back().second = r.second;
      else
        merged.push_back(r);
    }
    runs.clear();
    for (const auto& r : merged)
      if (r.second - r.first >= min_run) runs.push_back(r);
  }
  auto argmin = [&](std::size_t b, std::size_t e) {
    std::size_t m = b;
    for (std::size_t k = b; k < e; ++k)
      if (s[k].A < s[m].A) m = k;
    return m;
  };
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto [b, e] = runs[r];
    const std::size_t low_before_start = r == 0 ? 0 : runs[r - 1].second;
    const std::size_t first = b == low_before_start ? b : argmin(low_before_start, b);
    const std::size_t low_after_end = r + 1 < runs.size() ? runs[r + 1].first : n;
    const std::size_t last = e == low_after_end ? e - 1 : argmin(e, low_after_end);
    std::size_t peak = first;
    for (std::size_t k = first; k <= last; ++k)
      if (s[k].A > s[peak].A) peak = k;
    Episode ep;
    ep.loading.assign(s.begin() + static_cast<std::ptrdiff_t>(first), s.begin() + static_cast<std::ptrdiff_t>(peak) + 1);
    if (peak < last)
      ep.unloading.assign(s.begin() + static_cast<std::ptrdiff_t>(peak), s.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    ep.start_s = s[first].t_s;
    ep.peak_s = s[peak].t_s;
    ep.end_s = s[last].t_s;
    out.push_back(std::move(ep));
  }
  return out;
}

HysteresisResult hysteresis(const std::vector<BranchSample>& loading, const std::vector<BranchSample>& unloading,
                            const SplineConfig& spline, int grid_points) {
  HysteresisResult r;
  if (loading.size() < 2 || unloading.size() < 2) {
    r.diagnostic = "each branch needs at least 2 samples";
    return r;
  }
  if (grid_points < 2) throw DomainError("hysteresis: grid needs at least 2 points");
  auto range = [](const std::vector<BranchSample>& b) {
    double lo = b.front().A, hi = b.front().A;
    for (const auto& x : b) {
      lo = std::min(lo, x.A);
      hi = std::max(hi, x.A);
    }
    return std::pair{lo, hi};
  };
  const auto [l_lo, l_hi] = range(loading);
  const auto [u_lo, u_hi] = range(unloading);
  r.a_min = std::max(l_lo, u_lo);
  r.a_max = std::min(l_hi, u_hi);
  r.loading_start_s = loading.front().t_s;
  r.loading_end_s = loading.back().t_s;
  r.unloading_start_s = unloading.front().t_s;
  r.unloading_end_s = unloading.back().t_s;
  if (!(r.a_max > r.a_min)) {
    r.diagnostic = "branches do not overlap in accumulation";
    return r;
  }

  auto fit = [&](const std::vector<BranchSample>& b) {
    std::vector<double> x, y;
    for (const auto& v : b) {
      x.push_back(v.A);
      y.push_back(v.P);
    }
    return SmoothingSpline::fit(x, y, spline);
  };
  const SmoothingSpline pl = fit(loading);
  const SmoothingSpline pu = fit(unloading);

  for (int k = 0; k < grid_points; ++k) {
    const double a = r.a_min + (r.a_max - r.a_min) * k / (grid_points - 1);
    const double h = pl(a) - pu(a);
    r.grid_A.push_back(a);
    r.h.push_back(h);
    r.max_h = k == 0 ? h : std::max(r.max_h, h);
  }

  // Trapezoid along the unloading clock over samples inside the overlap.
  const double tol = 1e-12 * std::max(1.0, r.a_max);
  bool have_prev = false;
  double t_prev = 0.0, h_prev = 0.0;
  for (const auto& v : unloading) {
    if (v.A < r.a_min - tol || v.A > r.a_max + tol) {
      have_prev = false;
      continue;
    }
    const double h = pl(v.A) - pu(v.A);
    if (have_prev) r.total += 0.5 * (h + h_prev) * (v.t_s - t_prev) / 3600.0;
    t_prev = v.t_s;
    h_prev = h;
    have_prev = true;
  }
  r.ok = true;
  return r;
}

}  // namespace mfdsim
