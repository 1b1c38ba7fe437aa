#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hfw/simulate.hpp"

using namespace hfw;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::shared_ptr<ProfileMap> lambda_omega_map() {
  static std::shared_ptr<ProfileMap> map;
  if (map) return map;
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  AnalyticWaveTrain a = analytic_wavetrain(sys, 0.2);
  WaveTrain w = solve_profile(sys, 0.2, a.sample(TorusGrid(64)), a.omega);
  map = std::make_shared<ProfileMap>(continue_family(w, 0.2, 0.45, 10), 0.22, 0.42, 16, 32);
  return map;
}

ExpansionData bump_expansion(double amplitude, int m) {
  ModulationProfile prof;
  prof.amplitude = amplitude;
  RVec x = slow_grid(prof.length, 64);
  auto map = lambda_omega_map();
  return build_expansion(map, solve_eikonal(*map, prof.k0(x), prof.length, 0.5), m);
}

RMat planar(const AnalyticWaveTrain& w, double eps, double t, const RVec& x) {
  RMat u(x.size(), 2);
  for (int j = 0; j < x.size(); ++j) u.row(j) = w.profile((w.k * x(j) + w.omega * t) / eps).transpose();
  return u;
}

RMat rotate(const RMat& u, double a) {
  RMat r(u.rows(), 2);
  r.col(0) = std::cos(a) * u.col(0) - std::sin(a) * u.col(1);
  r.col(1) = std::sin(a) * u.col(0) + std::cos(a) * u.col(1);
  return r;
}

}  // namespace

TEST_CASE("zero data stays zero") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  SimulationRun run = simulate_direct(sys, 0.05, kTwoPi, RMat::Zero(64, 2), {0.0, 0.1, 0.2});
  for (const auto& s : run.snapshots) CHECK(s.cwiseAbs().maxCoeff() == 0.0);
  CHECK(run.times.size() == 3);
}

TEST_CASE("planar wave is transported exactly") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  AnalyticWaveTrain w = analytic_wavetrain(sys, 0.28);
  const double eps = 0.02;
  const int n = 14 * 32;  // 14 wavelengths, 32 points each
  RVec x = slow_grid(kTwoPi, n);
  SimulationRun run = simulate_direct(sys, eps, kTwoPi, planar(w, eps, 0.0, x), {0.0, 0.5}, {Scheme::ETDRK4, 0.0});
  CHECK((run.snapshots[1] - planar(w, eps, 0.5, x)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(run.dt == doctest::Approx(0.01));
  SimulationRun strang = simulate_direct(sys, eps, kTwoPi, planar(w, eps, 0.0, x), {0.0, 0.5});
  // Splitting error only: the wave stays on the circle of radius r0 up to O(dt^2).
  for (int j = 0; j < n; j += 17) CHECK(std::abs(strang.snapshots[1].row(j).norm() - w.r0) < 1e-4);
}

TEST_CASE("time-step self-convergence orders") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  AnalyticWaveTrain w = analytic_wavetrain(sys, 0.3);
  const double eps = 0.05;
  const int n = 128;
  RVec x = slow_grid(kTwoPi, n);
  RMat u0 = planar(w, eps, 0.0, x);
  for (int j = 0; j < n; ++j) u0(j, 0) += 0.05 * std::cos(x(j));
  for (Scheme s : {Scheme::Strang, Scheme::ETDRK4}) {
    auto end = [&](double dt) { return simulate_direct(sys, eps, kTwoPi, u0, {0.0, 0.2}, {s, dt}).snapshots[1]; };
    RMat ref = end(0.0025);
    std::vector<double> dts{0.08, 0.04, 0.02}, errs;
    for (double dt : dts) errs.push_back((end(dt) - ref).cwiseAbs().maxCoeff());
    const double slope = loglog_slope(dts, errs);
    if (s == Scheme::Strang) {
      CHECK(std::abs(slope - 2.0) < 0.2);
    } else {
      CHECK(slope > 3.5);
    }
  }
}

TEST_CASE("rotational equivariance of lambda-omega runs") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  AnalyticWaveTrain w = analytic_wavetrain(sys, 0.3);
  const double eps = 0.05;
  RVec x = slow_grid(kTwoPi, 128);
  RMat u0 = planar(w, eps, 0.0, x);
  for (int j = 0; j < x.size(); ++j) u0(j, 1) += 0.1 * std::sin(2 * x(j));
  const double a = 0.7;
  for (Scheme s : {Scheme::Strang, Scheme::ETDRK4}) {
    RMat r1 = simulate_direct(sys, eps, kTwoPi, u0, {0.0, 0.3}, {s, 0.0}).snapshots[1];
    RMat r2 = simulate_direct(sys, eps, kTwoPi, rotate(u0, a), {0.0, 0.3}, {s, 0.0}).snapshots[1];
    CHECK((rotate(r1, a) - r2).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("guards on the direct solver") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  CHECK_THROWS_AS(simulate_direct(sys, 1e-6, kTwoPi, RMat::Zero(64, 2), {0.0, 1.0}, {Scheme::Strang, 1e-3}),
                  SimulationError);
  RMat bad = RMat::Zero(64, 2);
  bad(3, 0) = std::nan("");
  CHECK_THROWS_AS(simulate_direct(sys, 0.1, kTwoPi, bad, {0.0}), SimulationError);
  CHECK_THROWS(simulate_direct(sys, 0.1, kTwoPi, RMat::Zero(64, 3), {0.0}));
  CHECK(parse_scheme("etdrk4") == Scheme::ETDRK4);
  CHECK_THROWS(parse_scheme("euler"));
}

TEST_CASE("error norms") {
  RVec x = slow_grid(kTwoPi, 256);
  RMat a(256, 1), b = RMat::Zero(256, 1);
  a.col(0) = (3.0 * x).array().sin() + 0.2 * (40.0 * x).array().cos();
  ErrorNorms e1 = error_norms(a, b, kTwoPi, 0.05, 1);
  ErrorNorms e2 = error_norms(a, b, kTwoPi, 0.05, 2);
  CHECK(e1.hs <= e2.hs);
  CHECK(std::abs(error_norms(a, b, kTwoPi, 0.05, 0).hs - e1.l2) < 1e-12);
  CHECK(e1.linf == doctest::Approx(a.cwiseAbs().maxCoeff()));
}

TEST_CASE("constant wavenumber: prescribed runs sit at the scheme floor") {
  auto map = lambda_omega_map();
  ModulationField f = solve_eikonal(*map, RVec::Constant(64, 0.28), kTwoPi, 0.5);
  ExpansionData e = build_expansion(map, f, 2);
  ConvergenceReport r = convergence_study(e, 2, {0.04, 0.02});
  for (const auto& en : r.entries) {
    CHECK(en.initial_error == 0.0);
    CHECK(en.sup_hs < 1e-7);
  }
}

TEST_CASE("prescribed-data convergence on a bump") {
  ExpansionData e = bump_expansion(0.05, 3);
  ConvergenceReport r = convergence_study(e, 2, {0.04, 0.02, 0.01});
  REQUIRE(r.has_next);
  for (const auto& en : r.entries) {
    CHECK(en.initial_error == 0.0);
    CHECK(en.snapshots.front().linf == 0.0);
    CHECK(en.sup_hs_next < en.sup_hs);
  }
  CHECK(r.slope_hs >= 1.8);
  CHECK(r.slope_hs_next >= 2.7);
  CHECK(std::abs(r.slope_quad - r.slope_hs) < 0.2);

  // Doubling the grid leaves the measured error essentially unchanged.
  StudyOptions fine;
  fine.points_per_wavelength = 64;
  ConvergenceReport r2 = convergence_study(e, 2, {0.02}, fine);
  CHECK(r2.entries[0].nx == 2 * r.entries[1].nx);
  CHECK(std::abs(r2.entries[0].sup_hs / r.entries[1].sup_hs - 1.0) < 0.05);
}

TEST_CASE("initial layer probe") {
  ExpansionData e = bump_expansion(0.05, 2);
  LayerReport none = initial_layer_probe(e, 2, 0.02, 0.0);
  CHECK(none.final_difference == 0.0);
  CHECK(none.final_distance == none.final_distance_unperturbed);
  const double eps = 0.02;
  LayerReport p = initial_layer_probe(e, 2, eps, std::pow(eps, 3), 3);
  CHECK(p.perturbation_hs == doctest::Approx(std::pow(eps, 3)).epsilon(1e-10));
  CHECK(p.layer_growth < 2.0);
  CHECK(p.sup_distance < 0.5 * std::pow(eps, 2));
  CHECK(p.final_difference <= p.perturbation_hs * 1.01);
}
