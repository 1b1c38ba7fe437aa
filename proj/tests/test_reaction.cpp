#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hfw/reaction.hpp"

using namespace hfw;

namespace {

RMat fd_jacobian(const ReactionSystem& s, const RVec& u, double h) {
  RMat j(s.dim(), s.dim());
  for (int c = 0; c < s.dim(); ++c) {
    RVec up = u, um = u;
    up(c) += h;
    um(c) -= h;
    j.col(c) = (s.f(up) - s.f(um)) / (2 * h);
  }
  return j;
}

// Central differences of the (order-1) tensor give the order tensor.
std::vector<double> fd_tensor(const ReactionSystem& s, const RVec& u, int order, double h) {
  const int n = s.dim();
  long slots = 1;
  for (int k = 0; k < order - 1; ++k) slots *= n;
  std::vector<double> out(n * slots * n);
  for (int c = 0; c < n; ++c) {
    RVec up = u, um = u;
    up(c) += h;
    um(c) -= h;
    auto tp = s.derivative_tensor(up, order - 1);
    auto tm = s.derivative_tensor(um, order - 1);
    for (long i = 0; i < n * slots; ++i) out[i + n * slots * c] = (tp[i] - tm[i]) / (2 * h);
  }
  return out;
}

std::vector<ReactionSystem> catalog() {
  return {make_lambda_omega(1.0, 0.5), make_lambda_omega(0.3, -1.2), make_brusselator(1.0, 2.2),
          make_brusselator(2.0, 4.5)};
}

}  // namespace

TEST_CASE("lambda-omega values") {
  auto s = make_lambda_omega(1.0, 0.0);
  RVec e1(2);
  e1 << 1.0, 0.0;
  RVec f = s.f(e1);
  CHECK(std::abs(f(0)) < 1e-15);
  CHECK(f(1) == doctest::Approx(-1.0));
  CHECK(s.f(RVec::Zero(2)).norm() == 0.0);

  auto s2 = make_lambda_omega(1.0, 0.5);
  RMat j = s2.jacobian(e1);
  CHECK((j - fd_jacobian(s2, e1, 1e-5)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("lambda-omega is rotation equivariant") {
  auto s = make_lambda_omega(0.7, 0.4);
  std::mt19937 rng(0);
  std::uniform_real_distribution<double> ud(-1.5, 1.5);
  for (int t = 0; t < 20; ++t) {
    RVec u(2);
    u << ud(rng), ud(rng);
    double phi = ud(rng) * 2;
    Eigen::Matrix2d r;
    r << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    CHECK((s.f(r * u) - r * s.f(u)).norm() < 1e-13);
  }
}

TEST_CASE("brusselator equilibrium and Hopf threshold") {
  double a = 1.3, b = 2.0;
  auto s = make_brusselator(a, b);
  RVec eq(2);
  eq << a, b / a;
  CHECK(s.f(eq).norm() < 1e-14);
  // Jacobian of the textbook vector field -f at equilibrium: [[b-1, a^2], [-b, -a^2]];
  // its trace vanishes at b = 1 + a^2.
  auto hopf = make_brusselator(a, 1 + a * a);
  RVec eqh(2);
  eqh << a, (1 + a * a) / a;
  CHECK(std::abs(hopf.jacobian(eqh).trace()) < 1e-13);
  CHECK(hopf.jacobian(eqh).determinant() > 0);
  CHECK_THROWS_AS(make_brusselator(-1.0, 1.0), std::invalid_argument);
}

TEST_CASE("derivative tensors pass finite-difference checks and are symmetric") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  for (const auto& s : catalog()) {
    const int n = s.dim();
    for (int t = 0; t < 20; ++t) {
      RVec u(n);
      for (int i = 0; i < n; ++i) u(i) = ud(rng);
      RMat j = s.jacobian(u);
      RMat jf = fd_jacobian(s, u, 1e-5);
      CHECK((j - jf).norm() <= 1e-6 * std::max(1.0, j.norm()));
      for (int order = 2; order <= 4; ++order) {
        auto exact = s.derivative_tensor(u, order);
        auto approx = fd_tensor(s, u, order, 1e-5);
        double num = 0, den = 0;
        for (size_t i = 0; i < exact.size(); ++i) {
          num += (exact[i] - approx[i]) * (exact[i] - approx[i]);
          den += exact[i] * exact[i];
        }
        CHECK(std::sqrt(num) <= 1e-6 * std::max(1.0, std::sqrt(den)));
      }
      auto h = s.derivative_tensor(u, 2);
      for (int i = 0; i < n; ++i)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) CHECK(h[i + n * (a + n * b)] == h[i + n * (b + n * a)]);
    }
    CHECK(s.max_derivative_order() == 4);
  }
}

TEST_CASE("multilinear derivative agrees with tensor contraction") {
  auto s = make_brusselator(1.0, 3.0);
  RVec u(2), v(2), w(2);
  u << 0.3, -0.8;
  v << 1.1, 0.4;
  w << -0.2, 0.9;
  auto t = s.derivative_tensor(u, 2);
  RVec contr = RVec::Zero(2);
  for (int i = 0; i < 2; ++i)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) contr(i) += t[i + 2 * (a + 2 * b)] * v(a) * w(b);
  CHECK((s.derivative_apply(u, {v, w}) - contr).norm() < 1e-14);
  CHECK((s.derivative_apply(u, {v}) - s.jacobian(u) * v).norm() < 1e-14);
}

TEST_CASE("analytic lambda-omega wave train") {
  auto s = make_lambda_omega(1.0, 0.5);
  auto w = analytic_wavetrain(s, 0.6);
  CHECK(w.r0 == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(w.omega == doctest::Approx(1.32).epsilon(1e-15));
  TorusGrid g(64);
  PeriodicField p = w.sample(g);
  CHECK(max_abs(profile_residual(s, w.k, w.omega, p)) < 1e-12);

  auto s0 = make_lambda_omega(1.0, 0.0);
  CHECK(analytic_wavetrain(s0, 0.6).omega == 1.0);
  CHECK(analytic_wavetrain(s0, 0.3).omega == 1.0);
  CHECK_THROWS_AS(analytic_wavetrain(s, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(analytic_wavetrain(make_brusselator(1, 2), 0.5), std::invalid_argument);
}

TEST_CASE("user polynomial systems merge duplicate monomials") {
  ReactionSystem s("cubic", 1, {{{1.0, {3}}, {2.0, {3}}, {-1.0, {1}}}});
  RVec u(1);
  u << 2.0;
  CHECK(s.f(u)(0) == doctest::Approx(3.0 * 8 - 2));
  CHECK(s.degree() == 3);
  CHECK_THROWS_AS(ReactionSystem("bad", 1, {{{1.0, {1, 1}}}}), std::invalid_argument);
}
