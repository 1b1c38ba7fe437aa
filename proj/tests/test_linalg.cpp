#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hfw/linalg.hpp"
#include "hfw/reaction.hpp"

using namespace hfw;
using std::numbers::pi;

namespace {

CMat random_matrix(int n, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> nd;
  CMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = scale * cplx(nd(rng), nd(rng));
  return m;
}

// Coefficient of the lambda-omega linearization about the analytic wave, first-order form.
CMat lambda_omega_symbol(double theta, double k, double omega, const ReactionSystem& sys, double r0) {
  RVec p(2);
  p << r0 * std::cos(theta), r0 * std::sin(theta);
  RMat g = sys.jacobian(p);
  CMat m = CMat::Zero(4, 4);
  m.block(0, 2, 2, 2) = CMat::Identity(2, 2) / k;
  m.block(2, 0, 2, 2) = g.cast<cplx>() / k;
  m.block(2, 2, 2, 2) = (omega / (k * k)) * CMat::Identity(2, 2);
  return m;
}

}  // namespace

TEST_CASE("integrate_linear_ode: constant coefficients give the exponential") {
  std::mt19937 rng(1);
  CMat a = random_matrix(3, rng);
  a *= 2.0 / a.norm();
  CMat x = integrate_linear_ode([&](double) { return a; }, 0.0, 2 * pi, 2048);
  CMat e = matrix_exp(2 * pi * a);
  CHECK((x - e).norm() / e.norm() < 1e-10);
}

TEST_CASE("integrate_linear_ode: scalar case and fourth-order convergence") {
  auto a = [](double t) { return CMat::Constant(1, 1, cplx(std::sin(t) + 0.3 * std::cos(2 * t), 0.2)); };
  // integral of the coefficient over a period is 0.4 pi i
  cplx exact = std::exp(cplx(0.0, 0.4 * pi));
  double e1 = std::abs(integrate_linear_ode(a, 0, 2 * pi, 16)(0, 0) - exact);
  double e2 = std::abs(integrate_linear_ode(a, 0, 2 * pi, 32)(0, 0) - exact);
  CHECK(std::abs(integrate_linear_ode(a, 0, 2 * pi, 2048)(0, 0) - exact) < 1e-10);
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}

TEST_CASE("integrate_linear_ode: Liouville identity for the lambda-omega linearization") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.0);
  AnalyticWaveTrain w = analytic_wavetrain(sys, 0.6);
  auto a = [&](double t) { return lambda_omega_symbol(t, w.k, w.omega, sys, w.r0); };
  // Oracle: quadrature of tr A over the period. The determinant is read from the
  // factored map; a dense determinant of X loses the small multipliers.
  double tr_int = 0.0;
  const int nq = 256;
  for (int j = 0; j < nq; ++j) tr_int += a(2 * pi * j / nq).trace().real() * 2 * pi / nq;
  FactoredPeriodMap fm = factored_period_map(a, 2048);
  CHECK(std::abs(fm.log_abs_det() - tr_int) < 1e-8);
  CHECK(std::abs(std::arg(fm.det_shifted(0.0))) < 1e-8);
}

TEST_CASE("integrate_linear_ode: half-period cocycle") {
  auto a = [](double t) {
    CMat m(2, 2);
    m << cplx(0.1 * std::cos(t), 0), cplx(1, 0), cplx(-1 - 0.3 * std::sin(t), 0), cplx(0, 0.2);
    return m;
  };
  CMat full = integrate_linear_ode(a, 0, 2 * pi, 512);
  CMat x1 = integrate_linear_ode(a, 0, pi, 256);
  CMat x2 = integrate_linear_ode(a, pi, 2 * pi, 256);
  CHECK((full - x2 * x1).norm() < 1e-12);
  CHECK_THROWS_AS(integrate_linear_ode([](double) { return CMat::Constant(1, 1, NAN); }, 0, 1, 4), NumericalError);
}

TEST_CASE("factored period map agrees with the direct map and keeps multipliers") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  AnalyticWaveTrain w = analytic_wavetrain(sys, 0.5);
  auto a = [&](double t) { return lambda_omega_symbol(t, w.k, w.omega, sys, w.r0); };
  CMat x = integrate_linear_ode(a, 0, 2 * pi, 512);
  FactoredPeriodMap fm = factored_period_map(a, 512);
  CHECK((fm.dense() - x).norm() / x.norm() < 1e-9);
  FactoredPeriodMap fine = factored_period_map(a, 2048);
  // Liouville: log det X = 2 pi tr M = 2 pi * 2 omega / k^2 (the dense det is useless here).
  CHECK(std::abs(fine.log_abs_det() - 2 * pi * 2 * w.omega / (w.k * w.k)) < 1e-7);
  // lambda = 0: the translation mode gives multiplier 1.
  CHECK(std::abs(fm.det_shifted(1.0)) < 1e-7 * std::exp(fm.log_abs_det()));
}

TEST_CASE("matrix_log_normalized") {
  CHECK(matrix_log_normalized(CMat::Identity(3, 3)).norm() < 1e-14);
  std::mt19937 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    CMat a = random_matrix(4, rng, 0.12);
    CMat x = matrix_exp(2 * pi * a);
    CHECK((matrix_log_normalized(x) - a).norm() < 1e-10);
  }
  CMat minus = -CMat::Identity(1, 1);
  LogResult lr = matrix_log_details(minus);
  CHECK(lr.exponents[0].imag() == doctest::Approx(0.5));
  CMat sing = CMat::Zero(2, 2);
  sing(0, 0) = 1.0;
  CHECK_THROWS_AS(matrix_log_normalized(sing), NumericalError);
}

TEST_CASE("matrix_log_normalized: Jordan cluster at 1 maps to a nilpotent log") {
  CMat j(2, 2);
  j << 1.0, 1.0, 0.0, 1.0;
  CMat x3 = CMat::Zero(3, 3);
  x3.block(0, 0, 2, 2) = j;
  x3(2, 2) = std::exp(2 * pi * 0.3);
  CMat l = matrix_log_normalized(x3, true);
  CHECK((matrix_exp(2 * pi * l) - x3).norm() < 1e-12);
  CHECK(std::abs(l(0, 0)) < 1e-14);
  CHECK(std::abs(l(2, 2) - 0.3) < 1e-13);
}

TEST_CASE("factored logarithm reconstructs the period map") {
  ReactionSystem sys = make_lambda_omega(1.0, 0.5);
  AnalyticWaveTrain w = analytic_wavetrain(sys, 0.5);
  auto a = [&](double t) { return lambda_omega_symbol(t, w.k, w.omega, sys, w.r0); };
  FactoredPeriodMap fm = factored_period_map(a, 512);
  FactoredLog fl = matrix_log_factored(fm, true);
  CMat x = fm.dense();
  CHECK((matrix_exp(2 * pi * fl.m1) - x).norm() / x.norm() < 1e-8);
  double closest = 1e9;
  for (cplx e : fl.exponents) closest = std::min(closest, std::abs(e));
  CHECK(closest < 1e-6);
}

TEST_CASE("ordered_schur_split") {
  CMat d = CMat::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = -1.0;
  SchurSplit s = ordered_schur_split(d, 0.5);
  CHECK(s.n_plus() == 1);
  CHECK(s.n_minus() == 1);
  CHECK(s.n_neutral() == 0);
  CHECK(std::abs(s.p_plus(0, 0) - 1.0) < 1e-14);
  CHECK(std::abs(s.p_minus(0, 0) + 1.0) < 1e-14);

  CMat jb = CMat::Zero(2, 2);
  jb(0, 1) = 1.0;
  SchurSplit sj = ordered_schur_split(jb, 0.5);
  CHECK(sj.n_neutral() == 2);
  CHECK((sj.neutral - jb).norm() < 1e-14);

  CHECK_THROWS_AS(ordered_schur_split(d, 1.0), GapViolation);

  std::mt19937 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    CMat m = random_matrix(6, rng);
    SchurSplit r = ordered_schur_split(m, 0.1, 1e-12);
    CMat t = r.transform;
    CMat bd = t * m * r.transform_inv;
    int np = r.n_plus(), nn = r.n_neutral(), nm = r.n_minus();
    CMat expect = CMat::Zero(6, 6);
    expect.block(0, 0, np, np) = r.p_plus;
    expect.block(np, np, nn, nn) = r.neutral;
    expect.block(np + nn, np + nn, nm, nm) = r.p_minus;
    CHECK((bd - expect).norm() < 1e-10 * m.norm());
    // Oracle: direct eigensolve counts.
    Eigen::ComplexEigenSolver<CMat> es(m);
    int cp = 0, cm = 0;
    for (int i = 0; i < 6; ++i) {
      cp += es.eigenvalues()(i).real() > 0.1;
      cm += es.eigenvalues()(i).real() < -0.1;
    }
    CHECK(cp == np);
    CHECK(cm == nm);
    for (cplx v : r.eig_plus) CHECK(v.real() > 0.1);
  }
}

TEST_CASE("lyapunov_symmetrizer") {
  CMat s = lyapunov_symmetrizer(CMat::Identity(2, 2), 1);
  CHECK(min_eig_hermitian(s) > 0);
  CHECK(min_eig_hermitian(s * CMat::Identity(2, 2)) >= 0.5 - 1e-12);
  CMat dg = CMat::Zero(2, 2);
  dg(0, 0) = 1.0;
  dg(1, 1) = 2.0;
  CMat sd = lyapunov_symmetrizer(dg, 1);
  CHECK(std::abs(sd(0, 1)) < 1e-14);
  CHECK(sd(0, 0).real() > 0);
  CHECK(sd(1, 1).real() > 0);

  std::mt19937 rng(2);
  std::uniform_real_distribution<double> ud(0.3, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    CMat v = random_matrix(4, rng);
    CMat diag = CMat::Zero(4, 4);
    for (int i = 0; i < 4; ++i) diag(i, i) = cplx(ud(rng), 2 * ud(rng) - 1);
    CMat p = v * diag * v.inverse();
    for (int sign : {1, -1}) {
      CMat pp = static_cast<double>(sign) * p;
      CMat sp = lyapunov_symmetrizer(pp, sign);
      CHECK((sp - sp.adjoint()).norm() < 1e-12 * sp.norm());
      CHECK(min_eig_hermitian(static_cast<double>(sign) * (sp * pp)) >= 0.1);
    }
  }
  CMat mixed = CMat::Zero(2, 2);
  mixed(0, 0) = 1.0;
  mixed(1, 1) = -1.0;
  CHECK_THROWS_AS(lyapunov_symmetrizer(mixed, 1), NumericalError);
}
