#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hfw/fredholm.hpp"

using namespace hfw;

namespace {

WaveTrain lambda_omega_wave(double omega0, double omega1, double k, int n = 64) {
  ReactionSystem sys = make_lambda_omega(omega0, omega1);
  AnalyticWaveTrain a = analytic_wavetrain(sys, k);
  return solve_profile(sys, k, a.sample(TorusGrid(n)), a.omega);
}

PeriodicField random_field(const TorusGrid& g, int dim, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  PeriodicField f(g, dim);
  for (int c = 0; c < dim; ++c)
    for (int q = 0; q <= 6; ++q) {
      double a = nd(rng) / (1 + q * q), b = nd(rng) / (1 + q * q);
      for (int j = 0; j < g.size(); ++j) f.values(j, c) += a * std::cos(q * g.node(j)) + b * std::sin(q * g.node(j));
    }
  return f;
}

double max_diff(const PeriodicField& a, const PeriodicField& b) { return (a.values - b.values).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("L annihilates the translation mode") {
  for (double w1 : {0.0, 0.5}) {
    WaveTrain w = lambda_omega_wave(1.0, w1, 0.3);
    LinearizedOperator op = assemble_L(w);
    CHECK((op.matrix * op.dp).norm() < 1e-9);
    Eigen::EigenSolver<RMat> es(op.matrix);
    double smallest = 1e9;
    for (int i = 0; i < es.eigenvalues().size(); ++i) smallest = std::min(smallest, std::abs(es.eigenvalues()(i)));
    CHECK(smallest < 1e-8);
  }
}

TEST_CASE("constant-coefficient scalar toy diagonalizes in Fourier modes") {
  // f(u) = g0 u, so f' = g0: eigenvalues omega i j + g0 + k^2 j^2.
  double g0 = 0.7, k = 0.5, omega = 1.3;
  ReactionSystem toy("linear", 1, {{{g0, {1}}}});
  TorusGrid g(16);
  RMat op = linearization_matrix(toy, k, omega, PeriodicField(g, 1));
  Eigen::EigenSolver<RMat> es(op);
  for (int j = -7; j <= 7; ++j) {
    cplx expect(g0 + k * k * j * j, omega * j);
    double best = 1e9;
    for (int i = 0; i < 16; ++i) best = std::min(best, std::abs(es.eigenvalues()(i) - expect));
    CHECK(best < 1e-10);
  }
}

TEST_CASE("adjoint null vector and the range condition") {
  WaveTrain w = lambda_omega_wave(1.0, 0.5, 0.4);
  LinearizedOperator op = assemble_L(w);
  AdjointNullData adj = adjoint_null(op);
  CHECK(std::abs(adj.normalization - 1.0) < 1e-10);
  CHECK((op.matrix.transpose() * adj.h.flat()).norm() < 1e-9);
  std::mt19937 rng(1);
  for (int t = 0; t < 20; ++t) {
    PeriodicField v = random_field(op.grid, 2, rng);
    CHECK(std::abs(inner(adj.h, op.apply(v))) < 1e-9);
  }
}

TEST_CASE("self-adjoint toy: h is proportional to the kernel") {
  // omega = 0, k = 1, f(u) = -u: L = -1 - d^2 is symmetric with kernel {cos, sin};
  // a symmetric rank-one term lifts cos and leaves sin.
  ReactionSystem toy("shift", 1, {{{-1.0, {1}}}});
  TorusGrid g(16);
  RMat op = linearization_matrix(toy, 1.0, 0.0, PeriodicField(g, 1));
  CHECK((op - op.transpose()).norm() < 1e-12);
  RVec c(16), s(16);
  for (int j = 0; j < 16; ++j) {
    c(j) = std::cos(g.node(j));
    s(j) = std::sin(g.node(j));
  }
  LinearizedOperator lo;
  lo.grid = g;
  lo.dim = 1;
  lo.k = 1.0;
  lo.matrix = op + c * c.transpose() / c.squaredNorm();
  lo.dp = s;
  AdjointNullData adj = adjoint_null(lo);
  RVec h = adj.h.flat();
  CHECK((h - (h.dot(s) / s.squaredNorm()) * s).norm() < 1e-10 * h.norm());
}

TEST_CASE("partial inverse properties") {
  for (double w1 : {0.0, 0.5}) {
    WaveTrain w = lambda_omega_wave(1.0, w1, 0.35);
    LinearizedOperator op = assemble_L(w);
    AdjointNullData adj = adjoint_null(op);
    PartialInverse r(op, adj);
    PeriodicField dp = w.dtheta();
    CHECK(max_abs(r.apply(dp)) < 1e-9);
    std::mt19937 rng(7);
    for (int t = 0; t < 20; ++t) {
      PeriodicField f = random_field(op.grid, 2, rng);
      PeriodicField g = random_field(op.grid, 2, rng);
      PeriodicField proj(op.grid, RMat(f.values - r.project_kernel(f).values));
      CHECK(std::abs(r.h_integral(proj)) < 1e-12);
      CHECK(max_diff(op.apply(r.apply(proj)), proj) < 1e-9);
      CHECK(max_diff(op.apply(r.apply(f)), proj) < 1e-9);
      // Pi0 is a projection.
      PeriodicField p1 = r.project_kernel(f);
      CHECK(max_diff(r.project_kernel(p1), p1) < 1e-12);
      // Linearity.
      PeriodicField comb(op.grid, RMat(2.0 * f.values - 3.0 * g.values));
      CHECK(max_diff(r.apply(comb), PeriodicField(op.grid, RMat(2.0 * r.apply(f).values - 3.0 * r.apply(g).values))) <
            1e-12 * std::max(1.0, max_abs(r.apply(comb))) * 10);
    }
  }
}

TEST_CASE("bordered matrix is nonsingular exactly when the kernel is simple") {
  WaveTrain w = lambda_omega_wave(1.0, 0.5, 0.35);
  LinearizedOperator op = assemble_L(w);
  AdjointNullData adj = adjoint_null(op);
  const int m = static_cast<int>(op.matrix.rows());
  RMat b = RMat::Zero(m + 1, m + 1);
  b.topLeftCorner(m, m) = op.matrix;
  b.block(0, m, m, 1) = op.dp;
  b.block(m, 0, 1, m) = op.grid.spacing() * adj.h.flat().transpose();
  Eigen::FullPivLU<RMat> lu(b);
  lu.setThreshold(1e-10);
  CHECK(lu.rank() == m + 1);
  CHECK(check_transversality(w).simple);
}

TEST_CASE("partial inverse is bounded on C^m") {
  WaveTrain w64 = lambda_omega_wave(1.0, 0.5, 0.4, 64);
  WaveTrain w128 = lambda_omega_wave(1.0, 0.5, 0.4, 128);
  auto build = [](const WaveTrain& w) {
    LinearizedOperator op = assemble_L(w);
    return PartialInverse(op, adjoint_null(op));
  };
  PartialInverse r64 = build(w64), r128 = build(w128);
  GrowthReport g0 = verify_bounded_on_Cm(r64, 0);
  CHECK(g0.max_ratio < 1e3);
  for (int m = 0; m <= 2; ++m) {
    GrowthReport a = verify_bounded_on_Cm(r64, m);
    GrowthReport b = verify_bounded_on_Cm(r128, m);
    CHECK(std::isfinite(a.max_ratio));
    CHECK(std::abs(a.max_ratio - b.max_ratio) < 0.2 * a.max_ratio);
  }
  CHECK_THROWS_AS(verify_bounded_on_Cm(r64, 5), std::invalid_argument);
}
