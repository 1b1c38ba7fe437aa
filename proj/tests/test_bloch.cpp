#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hfw/bloch.hpp"
#include "hfw/fredholm.hpp"

using namespace hfw;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

WaveTrain lambda_omega_wave(double omega0, double omega1, double k, int n = 64) {
  ReactionSystem sys = make_lambda_omega(omega0, omega1);
  AnalyticWaveTrain a = analytic_wavetrain(sys, k);
  return solve_profile(sys, k, a.sample(TorusGrid(n)), a.omega);
}

// Scalar f(u) = g0 u around u = 0: every coefficient is constant.
WaveTrain linear_toy(double g0, double k, double omega, int n = 16) {
  ReactionSystem toy("linear", 1, {{{g0, {1}}}});
  return WaveTrain{toy, k, omega, PeriodicField(TorusGrid(n), 1), 0.0, 0.0, 0};
}

double rel_diff(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("L_{0,0} is the negative of the linearization") {
  WaveTrain w = lambda_omega_wave(1.0, 0.5, 0.4);
  BlochOperator b = assemble_bloch(w, 0.0);
  LinearizedOperator l = assemble_L(w);
  CHECK((b.matrix + l.matrix.cast<cplx>()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(assemble_bloch(w, -0.5), std::invalid_argument);
  CHECK_NOTHROW(assemble_bloch(w, 0.5));
}

TEST_CASE("transverse shift moves the spectrum by -eta^2") {
  WaveTrain w = lambda_omega_wave(1.0, 0.5, 0.4, 32);
  BlochOperator b0 = assemble_bloch(w, 0.15, 0.0);
  BlochOperator b1 = assemble_bloch(w, 0.15, 0.3);
  CMat diff = b1.matrix - b0.matrix + 0.09 * CMat::Identity(b0.matrix.rows(), b0.matrix.cols());
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("constant-coefficient scalar toy") {
  double g0 = 0.4, k = 0.6, omega = 1.1, xi = 0.3, eta = 0.2;
  WaveTrain w = linear_toy(g0, k, omega);
  CVec e = assemble_bloch(w, xi, eta).eigenvalues();
  for (int j = -7; j <= 7; ++j) {
    double q = j + xi;
    cplx expect(-g0 - k * k * q * q - eta * eta, -omega * q);
    double best = 1e9;
    for (int i = 0; i < e.size(); ++i) best = std::min(best, std::abs(e(i) - expect));
    CHECK(best < 1e-10);
  }
}

TEST_CASE("diffusive stability and the Eckhaus boundary") {
  std::vector<double> xis, etas{0.0, 0.05, 0.2};
  for (int i = -10; i <= 10; ++i) xis.push_back(0.045 * i);
  StabilityVerdict good = verify_diffusive_stability(lambda_omega_wave(1.0, 0.0, 0.4), xis, etas);
  CHECK(good.stable());
  CHECK(good.c > 0.0);
  CHECK(good.zero_eigenvalue < 1e-8);
  StabilityVerdict bad = verify_diffusive_stability(lambda_omega_wave(1.0, 0.0, 0.65), xis, etas);
  CHECK(bad.condition_i);
  CHECK_FALSE(bad.condition_ii);
  CHECK_FALSE(bad.failing.empty());
  CHECK(bad.zero_eigenvalue < 1e-8);
}

TEST_CASE("first-order symbol structure") {
  WaveTrain w = lambda_omega_wave(1.0, 0.5, 0.45);
  SampledSymbol s = first_order_symbol(w, cplx(0.2, -0.1));
  for (const auto& m : s.values) {
    CHECK((m.topLeftCorner(2, 2)).norm() == 0.0);
    CHECK((m.topRightCorner(2, 2) - CMat::Identity(2, 2) / w.k).norm() < 1e-15);
    CHECK(std::abs(m.trace() - cplx(2.0 * w.omega / (w.k * w.k), 0.0)) < 1e-12);
  }
  // Scalar constant G: mu^2 - (omega/k^2) mu - (lambda + g0)/k^2 = 0.
  double g0 = 0.4, k = 0.6, omega = 1.1;
  cplx lambda(0.3, 0.2);
  SampledSymbol t = first_order_symbol(linear_toy(g0, k, omega), lambda, 4);
  Eigen::ComplexEigenSolver<CMat> es(t.values[0]);
  for (int i = 0; i < 2; ++i) {
    cplx mu = es.eigenvalues()(i);
    CHECK(std::abs(mu * mu - (omega / (k * k)) * mu - (lambda + g0) / (k * k)) < 1e-12);
  }
}

TEST_CASE("monodromy of a constant symbol") {
  double g0 = 0.4, k = 0.6, omega = 0.3;
  WaveTrain w = linear_toy(g0, k, omega);
  cplx lambda(0.1, 0.25);
  PeriodMapper pm(w, 2048);
  MonodromyRecord r = pm.monodromy(lambda);
  CMat expect = matrix_exp(kTwoPi * first_order_symbol(w, lambda, 2).values[0]);
  CHECK((r.x - expect).norm() / expect.norm() < 1e-9);
}

TEST_CASE("monodromy invariants on wavetrains") {
  for (auto [w0, w1, k] : {std::tuple{0.0, 0.0, 0.4}, std::tuple{1.0, 0.5, 0.5}}) {
    WaveTrain w = lambda_omega_wave(w0, w1, k);
    PeriodMapper pm(w, 4096);
    MonodromyRecord r0 = pm.monodromy(0.0);
    // Multipliers at 1: one for a simple translation mode, a Jordan pair when omega = 0.
    // A Jordan pair splits like the square root of rounding, so its mean is compared.
    const int neutral = (w0 == 0.0) ? 2 : 1;
    std::vector<cplx> mult = r0.map.multipliers(), expo = r0.exponents;
    auto by_modulus = [](cplx a, cplx b) { return std::abs(a) < std::abs(b); };
    auto near_one = [](cplx a, cplx b) { return std::abs(a - 1.0) < std::abs(b - 1.0); };
    std::sort(mult.begin(), mult.end(), near_one);
    std::sort(expo.begin(), expo.end(), by_modulus);
    cplx mean_mult = 0.0, mean_exp = 0.0;
    for (int i = 0; i < neutral; ++i) {
      mean_mult += mult[i] / static_cast<double>(neutral);
      mean_exp += expo[i] / static_cast<double>(neutral);
    }
    CHECK(std::abs(mean_mult - 1.0) < 1e-7);
    CHECK(std::abs(mean_exp) < 1e-8);
    // Liouville: log|det X| = 2 pi n omega / k^2.
    double liouville = kTwoPi * 2.0 * w.omega / (w.k * w.k);
    CHECK(std::abs(r0.map.log_abs_det() - liouville) < 1e-8);
  }
  // Dense identities need moderate multipliers: omega = 0 keeps det X = 1 and k = 0.7
  // keeps the condition number of X near 1e7.
  WaveTrain w = lambda_omega_wave(0.0, 0.0, 0.7);
  PeriodMapper pm(w);
  cplx lambda(0.05, 0.2);
  MonodromyRecord r = pm.monodromy(lambda);
  CMat back = matrix_exp(kTwoPi * r.m1);
  CHECK((back - r.x).norm() / r.x.norm() < 1e-8);
  // W(theta) = e^{theta M1} X(theta)^{-1} closes up at 2 pi.
  std::vector<CMat> half = pm.half_step_symbol(lambda);
  auto coef = [&](double th) {
    int j = static_cast<int>(std::lround(th / (std::numbers::pi / pm.steps())));
    return half[std::clamp(j, 0, static_cast<int>(half.size()) - 1)];
  };
  CMat x2pi = integrate_linear_ode(coef, 0.0, kTwoPi, pm.steps());
  CMat wper = matrix_exp(kTwoPi * r.m1) * x2pi.inverse();
  CHECK((wper - CMat::Identity(4, 4)).norm() < 1e-7);
}

TEST_CASE("Evans function identities") {
  WaveTrain w = lambda_omega_wave(1.0, 0.5, 0.4);
  PeriodMapper pm(w);
  EvansValue v00 = pm.evans_value(0.0, 0.0);
  CHECK(std::exp(v00.log_d.real() - v00.log_scale) < 1e-7);
  cplx lambda(0.12, -0.31);
  for (double xi : {0.25, 0.375}) {
    cplx a = std::exp(pm.log_evans(lambda, xi) - pm.log_evans(lambda, 0.3));
    cplx b = std::exp(pm.log_evans(lambda, xi + 1.0) - pm.log_evans(lambda, 0.3));
    CHECK(a == b);
  }
  cplx d1 = std::exp(pm.log_evans(lambda, 0.2) - pm.log_evans(0.3, 0.0).real());
  cplx d2 = std::exp(pm.log_evans(std::conj(lambda), -0.2) - pm.log_evans(0.3, 0.0).real());
  CHECK(rel_diff(d2, std::conj(d1)) < 1e-10);
}

TEST_CASE("Evans roots agree with Bloch eigenvalues") {
  for (auto [w0, w1, k, xi] : {std::tuple{1.0, 0.5, 0.4, 0.2}, std::tuple{0.0, 0.0, 0.35, 0.1},
                              std::tuple{0.0, 0.0, 0.5, 0.5}}) {
    WaveTrain w = lambda_omega_wave(w0, w1, k);
    PeriodMapper pm(w);
    auto roots = evans_roots(pm, xi, 0.5);
    auto eigs = bloch_eigenvalues_in_disk(w, xi, 0.5);
    CHECK(!eigs.empty());
    CHECK(match_multisets(roots, eigs) < 1e-5);
    int count = 0;
    for (const auto& r : roots) count += r.multiplicity;
    CHECK(count == static_cast<int>(eigs.size()));
    // At a zero, M1 carries the exponent i xi modulo 1.
    MonodromyRecord rec = pm.monodromy(roots.front().lambda);
    double best = 1e9;
    for (cplx e : rec.exponents) {
      double im = e.imag() - xi;
      best = std::min(best, std::hypot(e.real(), im - std::round(im)));
    }
    CHECK(best < 1e-6);
  }
}

TEST_CASE("winding number counts simple and double zeros") {
  WaveTrain w = lambda_omega_wave(0.0, 0.0, 0.4);
  PeriodMapper pm(w);
  auto eigs = bloch_eigenvalues_in_disk(w, 0.2, 0.5);
  int inside = 0;
  for (cplx e : eigs) inside += (e.real() > -0.2 && e.real() < 0.05 && std::abs(e.imag()) < 0.1);
  CHECK(evans_winding(pm, 0.2, cplx(-0.2, -0.1), cplx(0.05, 0.1)) == inside);
  CHECK(evans_winding(pm, 0.2, cplx(0.1, -0.1), cplx(0.3, 0.1)) == 0);
}

TEST_CASE("neutral curve and the Whitham coefficients") {
  WaveTrain w = lambda_omega_wave(1.0, 0.5, 0.5);
  NeutralCurve nc = neutral_curve(w, 0.05, 11);
  CHECK(std::abs(nc.lambda.front()) < 1e-8);
  CHECK(std::abs(nc.omega_prime_fit + 0.5) < 1e-3);
  CHECK(std::abs(nc.c_fit - (w.omega + 0.5 * w.k)) < 1e-3);
  CHECK(nc.b_fit > 0.0);
  for (cplx l : nc.lambda) CHECK(l.real() <= 1e-10);
  CHECK_THROWS_AS(neutral_curve(w, 0.0, 11), std::invalid_argument);
}

TEST_CASE("Whitham flux consistency along a family") {
  for (double w1 : {0.5, -0.5, 0.0}) {
    WaveFamily fam = continue_family(lambda_omega_wave(1.0, w1, 0.3), 0.3, 0.5, 8);
    WhithamReport r = whitham_flux_check(fam, 0.4);
    CHECK(r.difference < 1e-3);
    if (w1 == 0.0) {
      CHECK(std::abs(r.omega_prime_evans) < 1e-6);
      CHECK(std::abs(r.omega_prime_family) < 1e-6);
    } else {
      CHECK(r.omega_prime_evans * w1 < 0.0);
    }
  }
}
