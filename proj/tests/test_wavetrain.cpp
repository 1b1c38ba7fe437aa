#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hfw/fredholm.hpp"
#include "hfw/wavetrain.hpp"

using namespace hfw;

namespace {

WaveTrain lambda_omega_wave(double omega0, double omega1, double k, int n = 64) {
  ReactionSystem sys = make_lambda_omega(omega0, omega1);
  AnalyticWaveTrain a = analytic_wavetrain(sys, k);
  return solve_profile(sys, k, a.sample(TorusGrid(n)), a.omega);
}

}  // namespace

TEST_CASE("solve_profile from the exact guess") {
  WaveTrain w = lambda_omega_wave(1.0, 0.5, 0.6);
  CHECK(w.newton_iterations <= 1);
  CHECK(std::abs(w.omega - 1.32) < 1e-12);
  CHECK(w.residual < 1e-11);
}

TEST_CASE("solve_profile from a perturbed guess") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  AnalyticWaveTrain a = analytic_wavetrain(sys, 0.6);
  TorusGrid g(64);
  PeriodicField guess = a.sample(g);
  for (int j = 0; j < g.size(); ++j) {
    guess.values(j, 0) += 0.05 * std::cos(2 * g.node(j));
    guess.values(j, 1) += 0.05 * std::sin(3 * g.node(j) + 0.4);
  }
  WaveTrain w = solve_profile(sys, 0.6, guess, 1.25);
  CHECK(std::abs(w.omega - 1.32) < 1e-10);
  // Same profile up to phase: the radius is 0.8 everywhere.
  for (int j = 0; j < g.size(); ++j) CHECK(std::abs(w.profile.values.row(j).norm() - 0.8) < 1e-10);
  CHECK(std::abs(w.phase_value) < 1e-12);
}

TEST_CASE("solve_profile rejects the trivial solution") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  TorusGrid g(32);
  PeriodicField eq(g, 2);
  CHECK_THROWS_AS(solve_profile(sys, 0.5, eq, 1.0), TrivialSolutionError);
  CHECK_THROWS_AS(solve_profile(sys, 0.0, analytic_wavetrain(sys, 0.5).sample(g), 1.0), std::invalid_argument);
}

TEST_CASE("phase invariance of the profile solve") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  AnalyticWaveTrain a = analytic_wavetrain(sys, 0.4);
  TorusGrid g(64);
  PeriodicField base = a.sample(g);
  PeriodicField shifted = shift_nodes(base, 7);
  WaveTrain w0 = solve_profile(sys, 0.4, base, 1.2);
  WaveTrain w1 = solve_profile(sys, 0.4, shifted, 1.2);
  CHECK(std::abs(w0.omega - w1.omega) < 1e-10);
  CHECK((shift_nodes(w0.profile, 7).values - w1.profile.values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("residual decreases spectrally under grid refinement") {
  ReactionSystem sys = make_brusselator(1.0, 2.2);
  auto [guess, om] = relaxation_guess(sys, 0.15, TorusGrid(64), (RVec(2) << 1.0, 2.2).finished(), 0.3, 300.0);
  WaveTrain fine = solve_profile(sys, 0.15, guess, om);
  // Evaluate the converged fine profile, resampled onto coarser grids, in the residual.
  auto resid = [&](int n) {
    PeriodicField p(TorusGrid(n), trig_resample(fine.profile.values, n));
    return max_abs(profile_residual(sys, 0.15, fine.omega, p));
  };
  double r16 = resid(16), r32 = resid(32);
  CHECK(r16 / std::max(r32, 1e-16) > 1e3);
}

TEST_CASE("continuation reproduces the lambda-omega dispersion relation") {
  WaveTrain start = lambda_omega_wave(1.0, 0.5, 0.2);
  WaveFamily fam = continue_family(start, 0.2, 0.7, 26);
  CHECK(fam.k_min() == doctest::Approx(0.2));
  CHECK(fam.k_max() == doctest::Approx(0.7));
  for (const auto& m : fam.members) {
    CHECK(std::abs(m.omega - (1.0 + 0.5 * (1 - m.k * m.k))) < 1e-9);
    CHECK(m.residual < 1e-10);
  }
  for (size_t i = 1; i < fam.members.size(); ++i)
    CHECK((fam.members[i].profile.values - fam.members[i - 1].profile.values).cwiseAbs().maxCoeff() < 0.2);
  CHECK(fam.omega_at(fam.k_samples[3]) == fam.members[3].omega);

  auto d = omega_derivatives(fam, 0.5);
  CHECK(std::abs(d.d1 + 0.5) < 1e-6);
  CHECK(std::abs(d.d2 + 1.0) < 1e-5);
  CHECK_THROWS_AS(omega_derivatives(fam, 0.9), std::out_of_range);
}

TEST_CASE("continuation downward and single-step families") {
  WaveTrain top = lambda_omega_wave(1.0, 0.0, 0.6);
  WaveFamily fam = continue_family(top, 0.3, 0.6, 1);
  REQUIRE(fam.members.size() == 2);
  CHECK(fam.k_samples.front() == doctest::Approx(0.3));
  CHECK(fam.k_samples.back() == doctest::Approx(0.6));
  CHECK(std::abs(fam.members.front().omega - 1.0) < 1e-10);
  CHECK_THROWS_AS(continue_family(top, 0.2, 0.5, 4), std::invalid_argument);
}

TEST_CASE("omega1 = 0 gives vanishing omega derivatives") {
  WaveTrain start = lambda_omega_wave(1.0, 0.0, 0.2);
  WaveFamily fam = continue_family(start, 0.2, 0.6, 10);
  for (double k : {0.25, 0.4, 0.55}) CHECK(std::abs(omega_derivatives(fam, k).d1) < 1e-8);
}

TEST_CASE("omega is grid independent") {
  WaveTrain a = lambda_omega_wave(1.0, 0.5, 0.45, 48);
  WaveTrain b = lambda_omega_wave(1.0, 0.5, 0.45, 96);
  CHECK(std::abs(a.omega - b.omega) < 1e-8);
}

TEST_CASE("transversality") {
  WaveTrain w = lambda_omega_wave(1.0, 0.0, 0.3);
  TransversalityVerdict v = check_transversality(w);
  CHECK(v.simple);
  CHECK(std::abs(v.zero_eig) < 1e-8);
  CHECK(v.kernel_angle < 1e-5);

  // Two decoupled copies double the kernel.
  LinearizedOperator op = assemble_L(w);
  const int m = static_cast<int>(op.matrix.rows());
  RMat twice = RMat::Zero(2 * m, 2 * m);
  twice.topLeftCorner(m, m) = op.matrix;
  twice.bottomRightCorner(m, m) = op.matrix;
  CHECK_FALSE(transversality_from_matrix(twice, RVec()).simple);
}

TEST_CASE("Brusselator family near the Hopf point") {
  ReactionSystem sys = make_brusselator(1.0, 2.2);
  TorusGrid g(64);
  auto [guess, om] = relaxation_guess(sys, 0.15, g, (RVec(2) << 1.0, 2.2).finished(), 0.3, 300.0);
  WaveTrain start = solve_profile(sys, 0.15, guess, om);
  CHECK(start.residual < 1e-10);
  WaveFamily fam = continue_family(start, 0.15, 0.25, 5);
  for (const auto& m : fam.members) {
    CHECK(m.residual < 1e-10);
    CHECK(max_abs(profile_residual(sys, m.k, m.omega, m.profile)) < 1e-10);
    CHECK(check_transversality(m).simple);
  }
}
