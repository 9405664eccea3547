#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mfdsim/errors.hpp"
#include "mfdsim/fit.hpp"
#include "mfdsim/hysteresis.hpp"
#include "mfdsim/io.hpp"
#include "mfdsim/mfd.hpp"

using namespace mfdsim;

namespace {

MfdParams example_params() {
  MfdParams p;
  p.a = 0.5;
  p.d = -0.01;
  p.r = -0.1;
  return p;
}

std::vector<FitSample> synthetic(const MfdParams& p, std::size_t n, double noise, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> eps(0.0, noise);
  std::uniform_real_distribution<double> g(0.0, 20.0);
  std::vector<FitSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    // Daily shape: two peaks of accumulation.
    const double t = static_cast<double>(i) / static_cast<double>(n);
    const double A = 20.0 + 480.0 * std::pow(std::sin(M_PI * 2.0 * t), 2.0);
    FitSample s;
    s.A = A;
    s.gamma = g(gen);
    s.P = eval_vmfd(p, A, s.gamma) * (1.0 + eps(gen));
    out.push_back(s);
  }
  return out;
}

TrajectoryRecord vehicle(std::int64_t id, TravelMode m, double t0, double t1) {
  TrajectoryRecord r;
  r.entity_id = id;
  r.kind = EntityKind::Vehicle;
  r.mode = m;
  TrajectoryLeg l;
  l.start_s = t0;
  l.end_s = t1;
  l.mode = m;
  l.distance_km = 1.0;
  l.free_flow_s = t1 - t0;
  r.legs.push_back(l);
  return r;
}

}  // namespace

TEST_CASE("accumulation and production examples") {
  const std::vector<double> k{10.0, 20.0}, q{100.0, 200.0}, l{1.0, 3.0};
  CHECK(accumulation(k, l, 4.0) == doctest::Approx(70.0).epsilon(1e-12));
  CHECK(production(q, l, 4.0) == doctest::Approx(700.0).epsilon(1e-12));
  const std::vector<double> zero{0.0, 0.0};
  CHECK(accumulation(zero, l, 4.0) == 0.0);
  CHECK(production(zero, l, 4.0) == 0.0);
  CHECK_THROWS_AS(accumulation({}, {}, 4.0), DomainError);
  CHECK_THROWS_AS(production({}, {}, 4.0), DomainError);
}

TEST_CASE("gamma") {
  CHECK(gamma(std::vector<double>{10.0, 20.0, 30.0}) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(gamma(std::vector<double>{7.0, 7.0, 7.0, 7.0}) == 0.0);
  CHECK_THROWS_AS(gamma(std::vector<double>{1.0}), DomainError);
}

TEST_CASE("passenger production") {
  CHECK(passenger_production({}, 3600.0) == 0.0);
  std::vector<Completion> one(100, {TravelMode::Car, 5.0});
  CHECK(passenger_production(one, 3600.0) == doctest::Approx(500.0).epsilon(1e-12));
  auto two = one;
  for (int i = 0; i < 50; ++i) two.push_back({TravelMode::Bus, 8.0});
  CHECK(passenger_production(two, 3600.0) == doctest::Approx(900.0).epsilon(1e-12));
  // Same completions in a 30-minute interval double the hourly rate.
  CHECK(passenger_production(one, 1800.0) == doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("eval_vmfd and eval_pmfd") {
  const auto p = example_params();
  CHECK(eval_vmfd(p, 0.0, 5.0) == 0.0);
  MfdParams unit;
  unit.a = 1.0;
  CHECK(eval_vmfd(unit, 10.0, 3.0) == 10.0);
  CHECK(eval_vmfd(p, 100.0, 5.0) == doctest::Approx(50.0 * std::exp(-1.5)).epsilon(1e-12));
  CHECK(eval_vmfd(p, 100.0, 5.0) == doctest::Approx(11.157).epsilon(1e-4));
  CHECK(eval_pmfd(p, 100.0, 5.0, 1000.0) == eval_vmfd(p, 100.0, 5.0));
  auto q = p;
  q.rho = 0.001;
  CHECK(eval_pmfd(q, 0.0, 5.0, 1000.0) == 0.0);
  CHECK(eval_pmfd(q, 100.0, 5.0, 0.0) == eval_vmfd(q, 100.0, 5.0));
  CHECK(eval_pmfd(q, 100.0, 5.0, 1000.0) == doctest::Approx(50.0 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(eval_pmfd(q, 100.0, 5.0, 1000.0) == doctest::Approx(30.33).epsilon(1e-3));
  CHECK_THROWS_AS(eval_vmfd(p, -1.0, 0.0), DomainError);
  MfdParams big;
  big.a = 1.0;
  big.b = 1.0;
  CHECK_THROWS_AS(eval_vmfd(big, 100.0, 0.0), DomainError);
}

TEST_CASE("vMFD derivative matches finite differences") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> A(1.0, 500.0), G(0.0, 30.0);
  MfdParams p;
  p.a = 0.4;
  p.b = 2e-9;
  p.c = -3e-6;
  p.d = -1e-3;
  p.r = -0.02;
  for (int i = 0; i < 100; ++i) {
    const double a = A(gen), g = G(gen);
    const double E = p.b * a * a * a + p.c * a * a + p.d * a + p.r * g;
    const double exact = p.a * std::exp(E) * (1.0 + a * (3.0 * p.b * a * a + 2.0 * p.c * a + p.d));
    const double h = 1e-4 * a;
    const double fd = (eval_vmfd(p, a + h, g) - eval_vmfd(p, a - h, g)) / (2.0 * h);
    CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
  }
}

TEST_CASE("rmsn") {
  const std::vector<double> obs{100.0, 100.0}, pred{110.0, 90.0};
  CHECK(rmsn(pred, obs) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rmsn(obs, obs) == 0.0);
  CHECK_THROWS_AS(rmsn(std::vector<double>{1.0}, std::vector<double>{0.0}), DomainError);
  CHECK_THROWS_AS(rmsn(pred, std::vector<double>{1.0}), DomainError);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(1.0, 100.0), lam(0.01, 100.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(30), b(30);
    for (auto& x : a) x = u(gen);
    for (auto& x : b) x = u(gen);
    const double l = lam(gen);
    std::vector<double> as = a, bs = b;
    for (auto& x : as) x *= l;
    for (auto& x : bs) x *= l;
    CHECK(rmsn(as, bs) == doctest::Approx(rmsn(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("tsi") {
  std::vector<TripSpeed> t{{10.0, 200.0, 100.0}, {30.0, 50.0, 50.0}};
  CHECK(tsi(t) == doctest::Approx(0.875).epsilon(1e-12));
  std::vector<TripSpeed> ff{{4.0, 60.0, 60.0}, {2.0, 10.0, 10.0}};
  CHECK(tsi(ff) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(tsi(std::vector<TripSpeed>{{0.0, 10.0, 10.0}}), DomainError);
  CHECK_THROWS_AS(tsi(std::vector<TripSpeed>{{1.0, 10.0, 0.0}}), DomainError);

  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> d(0.1, 20.0), tt(60.0, 3600.0);
  std::vector<TripSpeed> many;
  for (int i = 0; i < 50; ++i) {
    const double ff_s = tt(gen);
    many.push_back({d(gen), ff_s * (1.0 + d(gen) / 10.0), ff_s});
  }
  const double ref = tsi(many);
  std::shuffle(many.begin(), many.end(), gen);
  CHECK(tsi(many) == doctest::Approx(ref).epsilon(1e-12));
  many.push_back({0.0, 999.0, 1.0});
  CHECK(tsi(many) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("ivd") {
  CHECK(ivd(15.0, 15.0) == 0.0);
  CHECK(ivd(20.0, 15.0) == 5.0);
  std::size_t clamped = 0;
  CHECK(ivd(14.9999, 15.0, &clamped) == 0.0);
  CHECK(clamped == 1);
}

TEST_CASE("fit recovers noiseless curves") {
  const auto p = example_params();
  MfdParams truth = p;
  truth.d = -0.004;
  truth.r = -0.01;
  const auto s = synthetic(truth, 96, 0.0, 1);
  const auto rep = fit_mfd(s, MfdKind::vMFD);
  double sum_sq = 0.0;
  std::vector<double> obs, pred;
  for (const auto& x : s) {
    sum_sq += x.P * x.P;
    obs.push_back(x.P);
    pred.push_back(eval_vmfd(rep.params, x.A, x.gamma));
  }
  CHECK(rep.Z <= 1e-12 * sum_sq);
  CHECK(rep.rmsn < 1e-6);
  CHECK(rmsn(pred, obs) == doctest::Approx(rep.rmsn).epsilon(1e-6));
  CHECK(rep.samples == 96);
}

TEST_CASE("fit with 1% noise and monotone trace") {
  MfdParams truth;
  truth.a = 0.5;
  truth.c = -1e-6;
  truth.r = -0.01;
  const auto s = synthetic(truth, 288, 0.01, 3);
  const auto rep = fit_mfd(s, MfdKind::vMFD);
  std::vector<double> clean, pred;
  for (const auto& x : s) {
    clean.push_back(eval_vmfd(truth, x.A, x.gamma));
    pred.push_back(eval_vmfd(rep.params, x.A, x.gamma));
  }
  CHECK(rmsn(pred, clean) < 0.02);
  CHECK(rep.rmsn < 0.02);
  CHECK(rep.Z >= 0.0);
  REQUIRE(rep.trace.size() == rep.trace_stage.size());
  for (std::size_t i = 1; i < rep.trace.size(); ++i)
    if (rep.trace_stage[i] == rep.trace_stage[i - 1]) CHECK(rep.trace[i] <= rep.trace[i - 1] * (1.0 + 1e-12));
  // Deterministic for a fixed config.
  CHECK(fit_mfd(s, MfdKind::vMFD).params == rep.params);
}

TEST_CASE("fit keeps speed nonincreasing when the data rise") {
  // Speed climbs with A, so the unconstrained optimum breaks the constraint.
  std::vector<FitSample> s;
  for (int i = 1; i <= 60; ++i) {
    const double A = 5.0 * i;
    s.push_back(FitSample{A, 2.0, 0.0, A * 20.0 * (1.0 + 0.002 * A)});
  }
  SolverConfig cfg;
  const auto rep = fit_mfd(s, MfdKind::vMFD, cfg);
  CHECK(rep.speed_constraint_active);
  CHECK(rep.speed_constraint_satisfied);
  const auto& p = rep.params;
  const double amax = 300.0;
  for (int k = 0; k <= 1000; ++k) {
    const double A = amax * k / 1000.0;
    CHECK((3.0 * p.b * A * A + 2.0 * p.c * A + p.d) * amax <= cfg.constraint_tolerance * (1.0 + 1e-9));
  }
}

TEST_CASE("fit errors") {
  const auto s = synthetic(example_params(), 19, 0.0, 1);
  CHECK_THROWS_AS(fit_mfd(s, MfdKind::vMFD), FitError);
  std::vector<FitSample> flat(40, FitSample{50.0, 1.0, 0.0, 10.0});
  CHECK_THROWS_AS(fit_mfd(flat, MfdKind::vMFD), FitError);
}

TEST_CASE("pMFD fit uses passenger accumulation") {
  MfdParams truth;
  truth.a = 0.8;
  truth.d = -0.002;
  truth.rho = 2e-4;
  truth.kind = MfdKind::pMFD;
  std::vector<FitSample> s;
  for (int i = 0; i < 100; ++i) {
    FitSample x;
    x.A = 10.0 + 4.0 * i;
    x.A_P = 1.4 * x.A + 50.0 * std::sin(i * 0.3);
    x.P = eval_pmfd(truth, x.A, 0.0, x.A_P);
    s.push_back(x);
  }
  const auto rep = fit_mfd(s, MfdKind::pMFD);
  CHECK(rep.rmsn < 1e-4);
  CHECK(rep.params.kind == MfdKind::pMFD);
}

TEST_CASE("fitted parameter row round-trips through json") {
  MfdParams row;
  row.a = 0.284;
  row.b = 7.50e-5;
  row.c = -6.28e-10;
  row.d = 1.954e-15;
  row.r = -0.01346;
  const auto dir = testutil::temp_dir("params");
  io::write_json(dir / "row.json", io::to_json(row));
  const auto back = io::read_json(dir / "row.json");
  CHECK(back.at("a").get<double>() == row.a);
  CHECK(back.at("b").get<double>() == row.b);
  CHECK(back.at("c").get<double>() == row.c);
  CHECK(back.at("d").get<double>() == row.d);
  CHECK(back.at("r").get<double>() == row.r);
}

TEST_CASE("split_branches") {
  auto series = [](const std::vector<double>& A) {
    std::vector<BranchSample> s;
    for (std::size_t i = 0; i < A.size(); ++i) s.push_back({300.0 * static_cast<double>(i), A[i], A[i]});
    return s;
  };
  SUBCASE("monotone") {
    std::vector<double> A;
    for (int i = 0; i < 20; ++i) A.push_back(i);
    const auto eps = split_branches(series(A));
    REQUIRE(eps.size() == 1);
    CHECK(eps[0].unloading.size() <= 1);
    CHECK(eps[0].loading.back().A == 19.0);
  }
  SUBCASE("triangle") {
    std::vector<double> A;
    for (int i = 0; i <= 10; ++i) A.push_back(i);
    for (int i = 9; i >= 0; --i) A.push_back(i);
    const auto eps = split_branches(series(A));
    REQUIRE(eps.size() == 1);
    CHECK(eps[0].loading.size() == eps[0].unloading.size());
    CHECK(eps[0].loading.back().A == 10.0);
    CHECK(eps[0].unloading.front().A == 10.0);
    CHECK(eps[0].peak_s == 3000.0);
  }
  SUBCASE("two peaks") {
    std::vector<double> A;
    for (int i = 0; i < 288; ++i) {
      const double h = i / 12.0;
      A.push_back(5.0 + 100.0 * std::exp(-std::pow(h - 8.0, 2)) + 80.0 * std::exp(-std::pow(h - 18.0, 2)));
    }
    // Local-extrema oracle: interior maxima above the threshold.
    const double lo = *std::min_element(A.begin(), A.end()), hi = *std::max_element(A.begin(), A.end());
    int maxima = 0;
    for (std::size_t i = 1; i + 1 < A.size(); ++i)
      if (A[i] > A[i - 1] && A[i] >= A[i + 1] && A[i] >= lo + 0.2 * (hi - lo)) ++maxima;
    const auto eps = split_branches(series(A));
    CHECK(static_cast<int>(eps.size()) == maxima);
    CHECK(eps.size() == 2);
    for (const auto& e : eps) {
      for (std::size_t i = 1; i < e.loading.size(); ++i) CHECK(e.loading[i].t_s > e.loading[i - 1].t_s);
      for (std::size_t i = 1; i < e.unloading.size(); ++i) CHECK(e.unloading[i].t_s > e.unloading[i - 1].t_s);
    }
  }
  SUBCASE("flat") { CHECK(split_branches(series(std::vector<double>(30, 4.0))).size() <= 1); }
}

TEST_CASE("hysteresis") {
  std::vector<BranchSample> load, unload;
  for (int i = 0; i <= 100; ++i) load.push_back({60.0 * i, double(i), double(i)});
  for (int i = 0; i <= 100; ++i) {
    const double A = 100.0 - i;
    unload.push_back({6000.0 + 60.0 * i, A, 0.8 * A});
  }
  SUBCASE("self loop is zero") {
    const auto h = hysteresis(load, load);
    REQUIRE(h.ok);
    for (double v : h.h) CHECK(v == 0.0);
    CHECK(h.total == 0.0);
  }
  SUBCASE("linear loop") {
    const auto h = hysteresis(load, unload);
    REQUIRE(h.ok);
    for (std::size_t i = 0; i < h.grid_A.size(); ++i)
      CHECK(h.h[i] == doctest::Approx(0.2 * h.grid_A[i]).epsilon(0.01).scale(1.0));
    // Trapezoid of 0.2 A(t) along the unloading clock, in hours.
    double oracle = 0.0;
    for (std::size_t i = 1; i < unload.size(); ++i)
      oracle += 0.5 * (0.2 * unload[i].A + 0.2 * unload[i - 1].A) * (unload[i].t_s - unload[i - 1].t_s) / 3600.0;
    CHECK(h.total == doctest::Approx(oracle).epsilon(0.01));
  }
  SUBCASE("no overlap") {
    std::vector<BranchSample> hi;
    for (int i = 0; i < 10; ++i) hi.push_back({60.0 * i, 200.0 + i, 1.0});
    const auto h = hysteresis(load, hi);
    CHECK_FALSE(h.ok);
    CHECK_FALSE(h.diagnostic.empty());
  }
}

TEST_CASE("accumulation_by_mode counts active vehicles") {
  std::vector<TrajectoryRecord> recs;
  for (int i = 0; i < 3; ++i) recs.push_back(vehicle(i, TravelMode::Car, 0.0, 600.0));
  for (int i = 0; i < 2; ++i) recs.push_back(vehicle(10 + i, TravelMode::Bus_OP, 0.0, 600.0));
  recs.push_back(vehicle(20, TravelMode::Rail_OP, 0.0, 600.0));
  const auto a = accumulation_by_mode(recs, 300.0, 600.0);
  REQUIRE(a.size() == 2);
  for (const auto& row : a) {
    CHECK(row[mode_index(TravelMode::Car)] == doctest::Approx(3.0));
    CHECK(row[mode_index(TravelMode::Bus_OP)] == doctest::Approx(2.0));
    CHECK(row[mode_index(TravelMode::Rail_OP)] == 0.0);
    CHECK(row[mode_index(TravelMode::AMOD)] == 0.0);
    CHECK(row[mode_index(TravelMode::AMOD_OP)] == 0.0);
  }
  // Half an interval active counts one half.
  const auto half = accumulation_by_mode({vehicle(1, TravelMode::Car, 0.0, 150.0)}, 300.0, 300.0);
  CHECK(half[0][mode_index(TravelMode::Car)] == doctest::Approx(0.5));
}

TEST_CASE("density accumulation reconciles with per-mode counts") {
  GridSpec g;
  g.rows = 5;
  g.cols = 5;
  const Network net = make_grid_network(g);
  ScenarioInputs in;
  in.network = &net;
  in.config.horizon_s = 3 * 3600.0;
  in.config.carpool_share = 0.0;
  auto profile = DemandProfile::uniform(3000, 5);
  for (auto& h : profile.hourly) {
    h.fill(0.0);
    h[0] = 0.5;
    h[1] = 0.5;
  }
  in.trips = generate_trips(profile, net, 5);
  const auto out = run_scenario(in);
  const auto samples = compute_samples(out, net);
  REQUIRE(samples.size() == 36);
  double peak = 0.0;
  for (const auto& s : samples) {
    double sum = 0.0;
    for (double x : s.A_mode) sum += x;
    CHECK(std::abs(s.A_V - sum) / std::max(1.0, s.A_V) < 0.05);
    peak = std::max(peak, s.A_V);
  }
  CHECK(peak > 10.0);
}
