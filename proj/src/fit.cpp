#include "mfdsim/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mfdsim/errors.hpp"
#include "mfdsim/rng.hpp"

namespace mfdsim {

namespace {

struct Problem {
  std::vector<double> x, g, p, A, obs;  // scaled inputs, raw A, observations
  double p_scale = 1.0;
  std::vector<double> grid;
  bool passenger = false;
  int np = 5;
};

struct Eval {
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  double cost = 0.0;
  double max_violation = 0.0;
};

double exponent(const Problem& pr, const Eigen::VectorXd& th, std::size_t i) {
  const double x = pr.x[i];
  double e = ((th[1] * x + th[2]) * x + th[3]) * x + th[4] * pr.g[i];
  if (pr.passenger) e += th[5] * pr.p[i];
  return e;
}

double slope(const Eigen::VectorXd& th, double x) { return (3.0 * th[1] * x + 2.0 * th[2]) * x + th[3]; }

Eval evaluate(const Problem& pr, const Eigen::VectorXd& th, double mu, bool jacobian) {
  const std::size_t n = pr.obs.size();
  const std::size_t m = pr.grid.size();
  Eval ev;
  ev.r.resize(static_cast<Eigen::Index>(n + m));
  if (jacobian) ev.J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n + m), pr.np);
  const double a = std::exp(th[0]);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double model = a * pr.A[i] * std::exp(exponent(pr, th, i));
    ev.r[row] = (model - pr.obs[i]) / pr.p_scale;
    if (jacobian) {
      const double d = model / pr.p_scale;
      const double x = pr.x[i];
      ev.J(row, 0) = d;
      ev.J(row, 1) = d * x * x * x;
      ev.J(row, 2) = d * x * x;
      ev.J(row, 3) = d * x;
      ev.J(row, 4) = d * pr.g[i];
      if (pr.passenger) ev.J(row, 5) = d * pr.p[i];
    }
  }
  const double w = std::sqrt(mu / static_cast<double>(std::max<std::size_t>(1, m)));
  ev.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m; ++k) {
    const auto row = static_cast<Eigen::Index>(n + k);
    const double x = pr.grid[k];
    const double s = slope(th, x);
    ev.max_violation = std::max(ev.max_violation, s);
    ev.r[row] = s > 0.0 ? w * s : 0.0;
    if (jacobian && s > 0.0) {
      ev.J(row, 1) = w * 3.0 * x * x;
      ev.J(row, 2) = w * 2.0 * x;
      ev.J(row, 3) = w;
    }
  }
  ev.cost = ev.r.squaredNorm();
  if (!std::isfinite(ev.cost)) ev.cost = std::numeric_limits<double>::infinity();
  return ev;
}

struct StartResult {
  Eigen::VectorXd theta;
  std::vector<double> trace;
  std::vector<int> stage;
  int iterations = 0;
  int rounds = 0;
  bool feasible = false;
  bool active = false;
  double data_cost = 0.0;
};

/// Levenberg-Marquardt on one penalty weight. Returns accepted-step count.
int levenberg_marquardt(const Problem& pr, Eigen::VectorXd& th, double mu, const SolverConfig& cfg,
                        std::vector<double>& trace, std::vector<int>& stage, int stage_id) {
  Eval cur = evaluate(pr, th, mu, true);
  if (!std::isfinite(cur.cost)) return 0;
  trace.push_back(cur.cost);
  stage.push_back(stage_id);
  Eigen::MatrixXd JtJ = cur.J.transpose() * cur.J;
  double damping = 1e-3 * std::max(1e-300, JtJ.diagonal().maxCoeff());
  int accepted = 0;
  int small_steps = 0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    JtJ = cur.J.transpose() * cur.J;
    const Eigen::VectorXd g = cur.J.transpose() * cur.r;
    Eigen::MatrixXd H = JtJ;
    const double floor = 1e-12 * std::max(1e-300, JtJ.diagonal().maxCoeff());
    for (Eigen::Index k = 0; k < H.rows(); ++k) H(k, k) += damping * std::max(JtJ(k, k), floor);
    const Eigen::VectorXd step = H.ldlt().solve(-g);
    if (!step.allFinite()) {
      damping *= 4.0;
      if (damping > 1e30) break;
      continue;
    }
    const Eigen::VectorXd cand = th + step;
    Eval next = evaluate(pr, cand, mu, true);
    if (next.cost < cur.cost) {
      const double rel = (cur.cost - next.cost) / std::max(cur.cost, 1e-300);
      th = cand;
      cur = std::move(next);
      trace.push_back(cur.cost);
      stage.push_back(stage_id);
      ++accepted;
      damping = std::max(damping / 3.0, 1e-15);
      small_steps = rel < cfg.tolerance ? small_steps + 1 : 0;
      if (small_steps >= 3 || cur.cost < 1e-30) break;
    } else {
      damping *= 4.0;
      if (damping > 1e30) break;
    }
  }
  return accepted;
}

StartResult run_start(const Problem& pr, Eigen::VectorXd th, const SolverConfig& cfg) {
  StartResult s;
  double mu = cfg.penalty_start;
  for (int round = 0; round < std::max(1, cfg.max_penalty_rounds); ++round) {
    s.iterations += levenberg_marquardt(pr, th, mu, cfg, s.trace, s.stage, round);
    s.rounds = round + 1;
    const Eval ev = evaluate(pr, th, mu, false);
    if (round == 0) s.active = ev.max_violation > cfg.constraint_tolerance;
    if (ev.max_violation <= cfg.constraint_tolerance) {
      s.feasible = true;
      break;
    }
    mu *= cfg.penalty_growth;
  }
  s.theta = th;
  const Eval ev = evaluate(pr, th, 0.0, false);
  s.data_cost = ev.cost;
  if (!s.feasible) s.feasible = ev.max_violation <= cfg.constraint_tolerance;
  return s;
}

}  // namespace

FitReport fit_mfd(const std::vector<FitSample>& samples, MfdKind kind, const SolverConfig& cfg) {
  if (samples.size() < 20) throw FitError("fit_mfd: needs at least 20 samples, got " + std::to_string(samples.size()));
  double amin = std::numeric_limits<double>::infinity(), amax = 0.0, gmax = 0.0, apmax = 0.0, pmax = 0.0;
  for (const auto& s : samples) {
    if (!std::isfinite(s.A) || !std::isfinite(s.P) || !std::isfinite(s.gamma) || !std::isfinite(s.A_P) || s.A < 0.0)
      throw FitError("fit_mfd: samples must be finite with A >= 0");
    amin = std::min(amin, s.A);
    amax = std::max(amax, s.A);
    gmax = std::max(gmax, std::abs(s.gamma));
    apmax = std::max(apmax, std::abs(s.A_P));
    pmax = std::max(pmax, std::abs(s.P));
  }
  if (!(amax > 0.0) || amax - amin <= 1e-12 * amax) throw FitError("fit_mfd: degenerate accumulation range");
  double a0 = 0.0;
  for (const auto& s : samples)
    if (s.A > 0.0) a0 = std::max(a0, s.P / s.A);
  if (!(a0 > 0.0) || !(pmax > 0.0)) throw FitError("fit_mfd: production is never positive");

  Problem pr;
  pr.passenger = kind == MfdKind::pMFD;
  pr.np = pr.passenger ? 6 : 5;
  pr.p_scale = pmax;
  const double gs = gmax > 0.0 ? gmax : 1.0;
  const double ps = apmax > 0.0 ? apmax : 1.0;
  for (const auto& s : samples) {
    pr.x.push_back(s.A / amax);
    pr.g.push_back(s.gamma / gs);
    pr.p.push_back(s.A_P / ps);
    pr.A.push_back(s.A);
    pr.obs.push_back(s.P);
  }
  const int gp = std::max(2, cfg.grid_points);
  for (int k = 0; k < gp; ++k) pr.grid.push_back(static_cast<double>(k) / (gp - 1));

  Eigen::VectorXd th0 = Eigen::VectorXd::Zero(pr.np);
  th0[0] = std::log(a0);

  std::vector<StartResult> starts;
  starts.push_back(run_start(pr, th0, cfg));
  Rng rng(hash_keys(cfg.seed, 0x4649545354415254ULL));
  for (int k = 0; k < cfg.restarts; ++k) {
    Eigen::VectorXd th = th0;
    th[0] += 0.1 * rng.normal();
    for (int j = 1; j < pr.np; ++j) th[j] += 0.5 * rng.normal();
    starts.push_back(run_start(pr, th, cfg));
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < starts.size(); ++k) {
    const auto& a = starts[k];
    const auto& b = starts[best];
    if (a.feasible != b.feasible) {
      if (a.feasible) best = k;
      continue;
    }
    if (a.data_cost < b.data_cost) best = k;
  }
  const StartResult& s = starts[best];

  FitReport rep;
  rep.samples = samples.size();
  rep.params.kind = kind;
  rep.params.a = std::exp(s.theta[0]);
  rep.params.b = s.theta[1] / (amax * amax * amax);
  rep.params.c = s.theta[2] / (amax * amax);
  rep.params.d = s.theta[3] / amax;
  rep.params.r = s.theta[4] / gs;
  rep.params.rho = pr.passenger ? s.theta[5] / ps : 0.0;
  rep.speed_constraint_satisfied = s.feasible;
  rep.speed_constraint_active = s.active;
  rep.iterations = s.iterations;
  rep.penalty_rounds = s.rounds;
  rep.start_index = static_cast<int>(best);
  rep.trace = s.trace;
  rep.trace_stage = s.stage;

  std::vector<double> pred, obs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double e = exponent(pr, s.theta, i);
    const double v = rep.params.a * samples[i].A * std::exp(e);
    pred.push_back(v);
    obs.push_back(samples[i].P);
    rep.Z += (v - samples[i].P) * (v - samples[i].P);
  }
  rep.rmsn = rmsn(pred, obs);
  return rep;
}

std::vector<FitSample> fit_samples(const std::vector<MfdSample>& samples, bool passenger) {
  std::vector<FitSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.A_V, s.gamma, s.A_P, passenger ? s.P_P : s.P_V});
  return out;
}

}  // namespace mfdsim
