#include "hfw/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "hfw/fredholm.hpp"

namespace hfw {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// (i kappa q)^order applied to the DFT slot of wavenumber q; odd orders drop the Nyquist slot.
cplx derivative_symbol(int slot, int n, int order, double kappa) {
  if (order == 0) return 1.0;
  if (n % 2 == 0 && slot == n / 2 && order % 2 == 1) return 0.0;
  cplx s(0.0, kappa * wavenumber(slot, n));
  cplx out = 1.0;
  for (int r = 0; r < order; ++r) out *= s;
  return out;
}

// Zero-pads DFT coefficients of length n (rows) to length m, splitting the Nyquist slot.
CMat pad_spectrum(const CMat& c, int m) {
  const int n = static_cast<int>(c.rows());
  if (m < n) throw std::invalid_argument("pad_spectrum: target shorter than source");
  CMat out = CMat::Zero(m, c.cols());
  for (int j = 0; j < n; ++j) {
    int q = wavenumber(j, n);
    if (n % 2 == 0 && j == n / 2) {
      out.row(q) += 0.5 * c.row(j);
      out.row(m - q) += 0.5 * c.row(j);
    } else {
      out.row(q >= 0 ? q : m + q) += c.row(j);
    }
  }
  return out * (static_cast<double>(m) / n);
}

RMat broadcast_rows(const RVec& s, int n_theta, int dim) {
  RMat out(s.size() * n_theta, dim);
  for (int j = 0; j < s.size(); ++j) out.middleRows(j * n_theta, n_theta).setConstant(s(j));
  return out;
}

// d_x^a d_theta^b of a (nx * n_theta) x dim slow-fast array.
RMat slow_fast_derivative(const RMat& f, int nx, int n_theta, double length, int a, int b) {
  if (a == 0 && b == 0) return f;
  RMat out(f.rows(), f.cols());
  const double kappa = kTwoPi / length;
  for (int c = 0; c < f.cols(); ++c) {
    Eigen::Map<const RMat> block(f.col(c).data(), n_theta, nx);  // (l, j)
    CMat z = dft_columns(block.cast<cplx>());                    // along theta
    CMat zt = dft_columns(CMat(z.transpose()));                  // along x: (qx, qtheta)
    for (int qx = 0; qx < nx; ++qx) {
      cplx sx = derivative_symbol(qx, nx, a, kappa);
      for (int qt = 0; qt < n_theta; ++qt) zt(qx, qt) *= sx * derivative_symbol(qt, n_theta, b, 1.0);
    }
    CMat back = idft_columns(CMat(idft_columns(zt).transpose()));
    Eigen::Map<RMat> dst(out.col(c).data(), n_theta, nx);
    dst = back.real();
  }
  return out;
}

double k0_bump(const ModulationProfile& p, double x, double* derivative) {
  const double kappa = kTwoPi / p.length;
  const double w2 = p.width * p.width;
  const double arg = kappa * (x - p.center);
  const double b = std::exp((std::cos(arg) - 1.0) / w2);
  if (derivative) *derivative = p.amplitude * b * (-std::sin(arg) * kappa / w2);
  return p.q + p.amplitude * (b - p.bump_mean());
}

RVec interpolate_nodes(const std::vector<RVec>& v, const RVec& w) {
  RVec out = w(0) * v[0];
  for (size_t i = 1; i < v.size(); ++i) out += w(static_cast<int>(i)) * v[i];
  return out;
}

RMat interpolate_nodes(const std::vector<RMat>& v, const RVec& w) {
  RMat out = w(0) * v[0];
  for (size_t i = 1; i < v.size(); ++i) out += w(static_cast<int>(i)) * v[i];
  return out;
}

template <class Vec>
std::vector<Vec> chebyshev_time_derivative(const std::vector<Vec>& v, const RMat& d) {
  std::vector<Vec> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    Vec acc = d(static_cast<int>(i), 0) * v[0];
    for (size_t j = 1; j < v.size(); ++j) acc += d(static_cast<int>(i), static_cast<int>(j)) * v[j];
    out[i] = acc;
  }
  return out;
}

// RK4 for y' = rhs(t, y) through the increasing times of `grid`, substeps <= max_step.
// Callback after every full step gets (t, y).
template <class Rhs, class Check>
std::vector<RVec> rk4_through_nodes(const ChebyshevGrid& grid, const RVec& y0, double max_step, Rhs&& rhs,
                                    Check&& check, int* steps_taken) {
  std::vector<RVec> out;
  out.push_back(y0);
  RVec y = y0;
  int steps = 0;
  for (int i = 1; i < grid.size(); ++i) {
    const double t0 = grid.point(i - 1);
    const double span = grid.point(i) - t0;
    const int n = std::max(1, static_cast<int>(std::ceil(span / max_step - 1e-12)));
    const double h = span / n;
    for (int s = 0; s < n; ++s) {
      const double t = t0 + s * h;
      RVec k1 = rhs(t, y);
      RVec k2 = rhs(t + 0.5 * h, RVec(y + 0.5 * h * k1));
      RVec k3 = rhs(t + 0.5 * h, RVec(y + 0.5 * h * k2));
      RVec k4 = rhs(t + h, RVec(y + h * k3));
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      ++steps;
      check(t + h, y);
    }
    out.push_back(y);
  }
  if (steps_taken) *steps_taken = steps;
  return out;
}

// Operator data at one slow point: h for the solvability integral and the bordered solve.
struct SlowPoint {
  PeriodicField profile;
  PeriodicField dp, ddp;
  double omega = 0.0;
  double k = 0.0;
  AdjointNullData adj;
};

LinearizedOperator make_operator(const ReactionSystem& sys, double k, double omega, const PeriodicField& p) {
  LinearizedOperator op;
  op.k = k;
  op.omega = omega;
  op.grid = p.grid;
  op.dim = p.dim();
  op.matrix = linearization_matrix(sys, k, omega, p);
  op.dp = fourier_diff(p, 1).flat();
  return op;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// ProfileMap

ProfileMap::ProfileMap(const WaveFamily& family, double k_lo, double k_hi, int n_nodes, int n_theta)
    : cheb_(k_lo, k_hi, n_nodes), grid_(n_theta) {
  const double tol = 1e-9 * std::max(1.0, family.k_max());
  if (k_lo < family.k_min() - tol || k_hi > family.k_max() + tol) {
    throw KRangeError("ProfileMap: k range [" + std::to_string(k_lo) + ", " + std::to_string(k_hi) +
                      "] leaves the family interval");
  }
  const WaveTrain& seed = family.nearest(0.5 * (k_lo + k_hi));
  PeriodicField ref(grid_, trig_resample(seed.profile.values, n_theta));
  std::vector<std::optional<WaveTrain>> solved(n_nodes);
  int start = 0;
  for (int i = 1; i < n_nodes; ++i) {
    if (std::abs(cheb_.point(i) - seed.k) < std::abs(cheb_.point(start) - seed.k)) start = i;
  }
  auto solve_at = [&](int i, const PeriodicField& guess, double omega_guess) {
    solved[i] = solve_profile(seed.system, cheb_.point(i), guess, omega_guess, ref);
  };
  solve_at(start, ref, family.omega_at(cheb_.point(start)));
  for (int i = start + 1; i < n_nodes; ++i) solve_at(i, solved[i - 1]->profile, family.omega_at(cheb_.point(i)));
  for (int i = start - 1; i >= 0; --i) solve_at(i, solved[i + 1]->profile, family.omega_at(cheb_.point(i)));
  for (auto& s : solved) nodes_.push_back(std::move(*s));
  omega_nodes_.resize(n_nodes);
  for (int i = 0; i < n_nodes; ++i) omega_nodes_(i) = nodes_[i].omega;
  omega_prime_nodes_ = cheb_.diff() * omega_nodes_;
}

RVec ProfileMap::weights_checked(double k) const {
  if (!std::isfinite(k) || !contains(k)) {
    throw KRangeError("k = " + std::to_string(k) + " outside the profile map range [" + std::to_string(k_lo()) +
                      ", " + std::to_string(k_hi()) + "]");
  }
  return cheb_.weights(k);
}

PeriodicField ProfileMap::profile(double k) const {
  RVec w = weights_checked(k);
  RMat v = w(0) * nodes_[0].profile.values;
  for (size_t i = 1; i < nodes_.size(); ++i) v += w(static_cast<int>(i)) * nodes_[i].profile.values;
  return PeriodicField(grid_, v);
}

double ProfileMap::omega(double k) const { return weights_checked(k).dot(omega_nodes_); }

double ProfileMap::omega_prime(double k) const { return weights_checked(k).dot(omega_prime_nodes_); }

double ProfileMap::max_node_residual() const {
  double r = 0.0;
  for (const auto& n : nodes_) r = std::max(r, n.residual);
  return r;
}

// ---------------------------------------------------------------------------------------------
// Slow grid utilities

double ModulationProfile::bump_mean() const {
  // mean of exp((cos - 1) / w^2) over a period is e^{-1/w^2} I_0(1/w^2)
  const double z = 1.0 / (width * width);
  return std::exp(-z) * std::cyl_bessel_i(0.0, z);
}

RVec ModulationProfile::k0(const RVec& x) const {
  RVec out(x.size());
  for (int j = 0; j < x.size(); ++j) out(j) = k0_bump(*this, x(j), nullptr);
  return out;
}

RVec slow_grid(double length, int n) {
  RVec x(n);
  for (int j = 0; j < n; ++j) x(j) = length * j / n;
  return x;
}

bool phase_admissible(double q, double length, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) return false;
  const double turns = q * length / (kTwoPi * eps);
  return std::abs(turns - std::round(turns)) < 1e-9 * std::max(1.0, turns);
}

RVec periodic_derivative(const RVec& f, double length, int order) {
  const int n = static_cast<int>(f.size());
  CMat c = dft_columns(CMat(f.cast<cplx>()));
  for (int j = 0; j < n; ++j) c(j, 0) *= derivative_symbol(j, n, order, kTwoPi / length);
  return idft_columns(c).col(0).real();
}

RVec periodic_upsample(const RVec& f, int n_out) {
  const int n = static_cast<int>(f.size());
  if (n_out == n) return f;
  CMat c = dft_columns(CMat(f.cast<cplx>()));
  return idft_columns(pad_spectrum(c, n_out)).col(0).real();
}

RVec ModulationField::psi(int i) const { return q * x + psi_tilde.at(i); }

// ---------------------------------------------------------------------------------------------
// Eikonal

ModulationField solve_eikonal(const ProfileMap& map, const RVec& k0, double length, double T,
                              const EikonalOptions& opt) {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("solve_eikonal: T must be positive");
  if (k0.size() < 8) throw std::invalid_argument("solve_eikonal: need at least 8 slow points");
  ModulationField out;
  out.length = length;
  out.x = slow_grid(length, static_cast<int>(k0.size()));
  out.q = k0.mean();
  out.t = ChebyshevGrid(0.0, T, opt.n_time);
  out.max_step = opt.max_step;
  for (int j = 0; j < k0.size(); ++j) {
    if (!map.contains(k0(j))) throw KRangeError("solve_eikonal: k0 leaves the profile map range");
  }
  // psi_tilde(0) is the zero-mean antiderivative of k0 - q.
  const int n = static_cast<int>(k0.size());
  CMat c = dft_columns(CMat((k0.array() - out.q).matrix().cast<cplx>()));
  for (int j = 0; j < n; ++j) {
    int w = wavenumber(j, n);
    c(j, 0) = (w == 0 || (j == n / 2)) ? cplx(0.0) : c(j, 0) / cplx(0.0, kTwoPi / length * w);
  }
  RVec psi0 = idft_columns(c).col(0).real();
  out.initial_gradient = periodic_derivative(k0, length).cwiseAbs().maxCoeff();
  const double g0 = out.initial_gradient;

  auto rhs = [&](double, const RVec& p) {
    RVec k = (out.q + periodic_derivative(p, length).array()).matrix();
    RVec r(k.size());
    for (int j = 0; j < k.size(); ++j) r(j) = map.omega(k(j));
    return r;
  };
  double g_last = g0;
  auto check = [&](double t, const RVec& p) {
    if (g0 <= 0.0) return;
    g_last = periodic_derivative(p, length, 2).cwiseAbs().maxCoeff();
    if (!(g_last <= opt.blowup_factor * g0)) {
      throw EikonalBlowup("eikonal: max |d_x k| grew beyond " + std::to_string(opt.blowup_factor) +
                              "x its initial value at t = " + std::to_string(t),
                          t);
    }
  };
  out.psi_tilde = rk4_through_nodes(out.t, psi0, opt.max_step, rhs, check, &out.rk_steps);
  for (const auto& p : out.psi_tilde) out.k.push_back((out.q + periodic_derivative(p, length).array()).matrix());
  out.final_gradient = periodic_derivative(out.k.back(), length).cwiseAbs().maxCoeff();
  auto dpsi = chebyshev_time_derivative(out.psi_tilde, out.t.diff());
  for (int i = 0; i < out.t.size(); ++i) {
    for (int j = 0; j < n; ++j) {
      out.eikonal_residual = std::max(out.eikonal_residual, std::abs(dpsi[i](j) - map.omega(out.k[i](j))));
    }
  }
  return out;
}

double blowup_time_estimate(const ProfileMap& map, const RVec& k0, double length) {
  RVec c(k0.size());
  for (int j = 0; j < k0.size(); ++j) c(j) = -map.omega_prime(k0(j));
  const double m = periodic_derivative(c, length).minCoeff();
  if (!(m < -1e-10)) return std::numeric_limits<double>::infinity();  // round-off in omega' is not a gradient
  return -1.0 / m;
}

double characteristic_k(const ProfileMap& map, const ModulationProfile& prof, double t, double x) {
  double x0 = x + map.omega_prime(k0_bump(prof, x, nullptr)) * t;
  for (int it = 0; it < 60; ++it) {
    double dk = 0.0;
    const double k = k0_bump(prof, x0, &dk);
    const double h = 1e-6;
    const double opp = (map.omega_prime(std::min(map.k_hi(), k + h)) - map.omega_prime(std::max(map.k_lo(), k - h))) /
                       (std::min(map.k_hi(), k + h) - std::max(map.k_lo(), k - h));
    const double g = x0 - map.omega_prime(k) * t - x;
    const double dg = 1.0 - opp * dk * t;
    const double step = g / dg;
    x0 -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return k0_bump(prof, x0, nullptr);
}

// ---------------------------------------------------------------------------------------------
// Expansion cascade

std::vector<RMat> operator_jet(const ExpansionData& e, int i, int order) {
  const ReactionSystem& sys = e.map->system();
  const int nt = e.n_theta;
  const int nx = e.nx();
  const int d = e.map->dim();
  const double L = e.field.length;
  const int rows = nx * nt;
  const RMat zero = RMat::Zero(rows, d);
  using Jet = EpsJet<Eigen::ArrayXXd>;
  auto make = [&]() { return Jet(order, zero.array()); };

  Jet u = make(), ut = make(), ux = make(), uth = make(), uthth = make(), uxth = make(), uxx = make();
  for (int q = 0; q <= order && q < static_cast<int>(e.u.size()); ++q) {
    const RMat& f = e.u[q][i];
    u[q] = f.array();
    ut[q] = e.u_t[q][i].array();
    ux[q] = slow_fast_derivative(f, nx, nt, L, 1, 0).array();
    uth[q] = slow_fast_derivative(f, nx, nt, L, 0, 1).array();
    uthth[q] = slow_fast_derivative(f, nx, nt, L, 0, 2).array();
    uxth[q] = slow_fast_derivative(f, nx, nt, L, 1, 1).array();
    uxx[q] = slow_fast_derivative(f, nx, nt, L, 2, 0).array();
  }
  Jet pt = make(), px = make(), pxx = make();
  for (int q = 0; q <= order && q < static_cast<int>(e.phi.size()); ++q) {
    pt[q] = broadcast_rows(e.phi_t[q][i], nt, d).array();
    px[q] = broadcast_rows(periodic_derivative(e.phi[q][i], L), nt, d).array();
    pxx[q] = broadcast_rows(periodic_derivative(e.phi[q][i], L, 2), nt, d).array();
  }
  const RVec& k = e.field.k[i];
  RVec kx = periodic_derivative(k, L);
  RVec psit(nx);
  for (int j = 0; j < nx; ++j) psit(j) = e.map->omega(k(j));
  const Eigen::ArrayXXd a_psit = broadcast_rows(psit, nt, d).array();
  const Eigen::ArrayXXd a_k2 = broadcast_rows(k.cwiseProduct(k), nt, d).array();
  const Eigen::ArrayXXd a_2k = broadcast_rows(2.0 * k, nt, d).array();
  const Eigen::ArrayXXd a_kx = broadcast_rows(kx, nt, d).array();
  auto scale = [](const Eigen::ArrayXXd& a, Jet j) {
    for (int q = 0; q <= j.order(); ++q) j[q] = a * j[q];
    return j;
  };

  Jet r = scale(a_psit, uth) + (ut + pt * uth).shifted() + jet_compose(sys, u);
  Jet diff = scale(a_k2, uthth) + (scale(a_2k, uxth) + scale(a_kx, uth) + scale(a_2k, px * uthth)).shifted() +
             (uxx + 2.0 * (px * uxth) + pxx * uth + px * px * uthth).shifted().shifted();
  r -= diff;
  std::vector<RMat> out;
  for (int q = 0; q <= order; ++q) out.push_back(r[q].matrix());
  return out;
}

ExpansionData build_expansion(std::shared_ptr<const ProfileMap> map, const ModulationField& field, int m) {
  if (m < 0 || m > 3) throw std::invalid_argument("build_expansion: order must be in 0..3");
  if (m + 1 > map->system().max_derivative_order()) {
    throw std::invalid_argument("build_expansion: reaction term degree too low for this order");
  }
  ExpansionData e;
  e.map = map;
  e.field = field;
  e.order = m;
  e.n_theta = map->grid().size();
  const int nt = e.n_theta;
  const int nx = e.nx();
  const int ntime = e.n_time();
  const int d = map->dim();
  const double L = field.length;
  const ReactionSystem& sys = map->system();

  // U_0 and the per-point operator data.
  std::vector<std::vector<SlowPoint>> pts(ntime, std::vector<SlowPoint>(nx));
  std::vector<RMat> u0(ntime, RMat(nx * nt, d));
  for (int i = 0; i < ntime; ++i) {
    for (int j = 0; j < nx; ++j) {
      SlowPoint& sp = pts[i][j];
      sp.k = field.k[i](j);
      sp.profile = map->profile(sp.k);
      sp.omega = map->omega(sp.k);
      sp.dp = fourier_diff(sp.profile, 1);
      sp.ddp = fourier_diff(sp.profile, 2);
      u0[i].middleRows(j * nt, nt) = sp.profile.values;
    }
  }
  e.u.push_back(u0);
  e.u_t.push_back(chebyshev_time_derivative(u0, field.t.diff()));
  if (m == 0) return e;

  for (int i = 0; i < ntime; ++i) {
    for (int j = 0; j < nx; ++j) {
      SlowPoint& sp = pts[i][j];
      sp.adj = adjoint_null(make_operator(sys, sp.k, sp.omega, sp.profile));
    }
  }
  // Transport coefficient 2k int(h p'') / int(h p') and the normalization int(h p').
  std::vector<RVec> adv(ntime, RVec(nx)), a1(ntime, RVec(nx));
  for (int i = 0; i < ntime; ++i) {
    for (int j = 0; j < nx; ++j) {
      const SlowPoint& sp = pts[i][j];
      a1[i](j) = inner(sp.adj.h, sp.dp);
      adv[i](j) = 2.0 * sp.k * inner(sp.adj.h, sp.ddp) / a1[i](j);
    }
  }

  for (int n = 0; n < m; ++n) {
    // Source: coefficient n+1 with U_{n+1} = 0 and phi_n = 0.
    std::vector<RMat> g(ntime);
    std::vector<RVec> src(ntime, RVec(nx));
    double gmax = 0.0;
    for (int i = 0; i < ntime; ++i) {
      g[i] = operator_jet(e, i, n + 1)[n + 1];
      gmax = std::max(gmax, g[i].cwiseAbs().maxCoeff());
      for (int j = 0; j < nx; ++j) {
        PeriodicField gj(map->grid(), RMat(g[i].middleRows(j * nt, nt)));
        src[i](j) = inner(pts[i][j].adj.h, gj) / a1[i](j);
      }
    }
    e.source_norm.push_back(gmax);

    // d_t phi_n = adv d_x phi_n - src, phi_n(0) = 0.
    const RVec zero = RVec::Zero(nx);
    auto rhs = [&](double t, const RVec& phi) {
      RVec w = field.t.weights(t);
      RVec a = interpolate_nodes(adv, w);
      RVec s = interpolate_nodes(src, w);
      return RVec(a.cwiseProduct(periodic_derivative(phi, L)) - s);
    };
    auto no_check = [](double, const RVec&) {};
    std::vector<RVec> phi = rk4_through_nodes(field.t, zero, field.max_step, rhs, no_check, nullptr);
    std::vector<RVec> phi_t(ntime);
    for (int i = 0; i < ntime; ++i) phi_t[i] = adv[i].cwiseProduct(periodic_derivative(phi[i], L)) - src[i];

    // U_{n+1} = -R (G_n + phi_t p' - 2 k phi_x p'').
    std::vector<RMat> un(ntime, RMat(nx * nt, d));
    double solv = 0.0;
    for (int i = 0; i < ntime; ++i) {
      RVec phix = periodic_derivative(phi[i], L);
      for (int j = 0; j < nx; ++j) {
        const SlowPoint& sp = pts[i][j];
        PartialInverse r(make_operator(sys, sp.k, sp.omega, sp.profile), sp.adj);
        RMat rhs_v = g[i].middleRows(j * nt, nt) + phi_t[i](j) * sp.dp.values - 2.0 * sp.k * phix(j) * sp.ddp.values;
        PeriodicField rf(map->grid(), rhs_v);
        solv = std::max(solv, std::abs(r.h_integral(rf)));
        un[i].middleRows(j * nt, nt) = -r.apply(rf).values;
      }
    }
    e.solvability.push_back(solv);
    e.phi.push_back(phi);
    e.phi_t.push_back(phi_t);
    e.u.push_back(un);
    e.u_t.push_back(chebyshev_time_derivative(un, field.t.diff()));

    double cons = 0.0;
    for (int i = 0; i < ntime; ++i) cons = std::max(cons, operator_jet(e, i, n + 1)[n + 1].cwiseAbs().maxCoeff());
    e.consistency.push_back(cons);
    if (cons > 1e-6) {
      throw SolverError("cascade audit: order " + std::to_string(n + 1) + " coefficient " + std::to_string(cons) +
                        " survives after the corrector step");
    }
  }
  return e;
}

// ---------------------------------------------------------------------------------------------
// Evaluation on the fine grid

namespace {

struct FastBasis {
  int n_theta = 0;
  CMat z;  // (points, slot): e^{i q theta*} with the Nyquist slot as cos
};

FastBasis fast_basis(const RVec& theta, int n_theta) {
  FastBasis b;
  b.n_theta = n_theta;
  b.z.resize(theta.size(), n_theta);
  for (int p = 0; p < theta.size(); ++p) {
    const double th = std::fmod(theta(p), kTwoPi);
    for (int l = 0; l < n_theta; ++l) {
      const int q = wavenumber(l, n_theta);
      if (l == n_theta / 2) {
        b.z(p, l) = std::cos(q * th);
      } else {
        b.z(p, l) = std::polar(1.0, q * th);
      }
    }
  }
  return b;
}

// Evaluates d_x^a d_theta^b of a slow-fast array at fine points with fast angle theta*.
class FineEvaluator {
 public:
  FineEvaluator(const RMat& f, int nx, int n_theta, double length, int n_fine)
      : nx_(nx), nt_(n_theta), length_(length), n_fine_(n_fine) {
    for (int c = 0; c < f.cols(); ++c) {
      Eigen::Map<const RMat> block(f.col(c).data(), n_theta, nx);
      CMat z = dft_columns(block.cast<cplx>());
      coeffs_.push_back(dft_columns(CMat(z.transpose())));  // (qx, qtheta)
    }
  }

  RMat eval(const FastBasis& basis, int a, int b) const {
    RMat out(n_fine_, coeffs_.size());
    const double kappa = kTwoPi / length_;
    for (size_t c = 0; c < coeffs_.size(); ++c) {
      CMat z = coeffs_[c];
      for (int qx = 0; qx < nx_; ++qx) {
        cplx sx = derivative_symbol(qx, nx_, a, kappa);
        for (int qt = 0; qt < nt_; ++qt) z(qx, qt) *= sx * derivative_symbol(qt, nt_, b, 1.0);
      }
      CMat fine = idft_columns(pad_spectrum(z, n_fine_));  // (point, qtheta) times n_theta
      out.col(static_cast<int>(c)) = (fine.cwiseProduct(basis.z).rowwise().sum().real() / nt_).matrix();
    }
    return out;
  }

 private:
  int nx_, nt_;
  double length_;
  int n_fine_;
  std::vector<CMat> coeffs_;
};

}  // namespace

int fine_grid_size(const ExpansionData& e, double eps, int points_per_wavelength) {
  double kmax = 0.0;
  for (const auto& k : e.field.k) kmax = std::max(kmax, k.cwiseAbs().maxCoeff());
  const double wavelengths = e.field.length * kmax / (kTwoPi * eps);
  int n = std::max(4 * e.nx(), 16);
  while (n < points_per_wavelength * wavelengths) n *= 2;
  return n;
}

AnsatzEval evaluate_ansatz(const ExpansionData& e, double eps, double t, int n_points, bool with_residual,
                           int order) {
  const int M = order < 0 ? e.order : order;
  if (M > e.order) throw std::invalid_argument("evaluate_ansatz: order above the built expansion");
  if (!(eps > 0.0)) throw std::invalid_argument("evaluate_ansatz: eps must be positive");
  if (!e.field.t.contains(t)) throw std::out_of_range("evaluate_ansatz: t outside the slow time grid");
  if (n_points < e.nx()) throw std::invalid_argument("evaluate_ansatz: fine grid coarser than the slow grid");
  const double L = e.field.length;
  const int nx = e.nx();
  const int nt = e.n_theta;
  const int d = e.map->dim();
  const RVec w = e.field.t.weights(t);

  AnsatzEval out;
  out.x = slow_grid(L, n_points);
  const RVec psit_slow = interpolate_nodes(e.field.psi_tilde, w);
  RVec theta = (e.field.q * out.x + periodic_upsample(psit_slow, n_points)) / eps;
  std::vector<RVec> phi_slow;
  for (int n = 0; n < M; ++n) {
    phi_slow.push_back(interpolate_nodes(e.phi[n], w));
    theta += std::pow(eps, n) * periodic_upsample(phi_slow[n], n_points);
  }
  FastBasis basis = fast_basis(theta, nt);

  out.u = RMat::Zero(n_points, d);
  std::vector<FineEvaluator> ev;
  for (int n = 0; n <= M; ++n) {
    ev.emplace_back(interpolate_nodes(e.u[n], w), nx, nt, L, n_points);
    out.u += std::pow(eps, n) * ev.back().eval(basis, 0, 0);
  }
  if (!with_residual) return out;

  // Slow coefficients on the fine grid.
  RVec k = (e.field.q + periodic_upsample(periodic_derivative(psit_slow, L), n_points).array()).matrix();
  RVec kx = periodic_upsample(periodic_derivative(psit_slow, L, 2), n_points);
  RVec psit(n_points);
  for (int p = 0; p < n_points; ++p) psit(p) = e.map->omega(k(p));
  RVec Pt = RVec::Zero(n_points), Px = RVec::Zero(n_points), Pxx = RVec::Zero(n_points);
  for (int n = 0; n < M; ++n) {
    const double s = std::pow(eps, n);
    Pt += s * periodic_upsample(interpolate_nodes(e.phi_t[n], w), n_points);
    Px += s * periodic_upsample(periodic_derivative(phi_slow[n], L), n_points);
    Pxx += s * periodic_upsample(periodic_derivative(phi_slow[n], L, 2), n_points);
  }
  const Eigen::ArrayXd K = (k + eps * Px).array();
  const Eigen::ArrayXd Kx = (kx + eps * Pxx).array();

  Eigen::ArrayXXd eu_t = Eigen::ArrayXXd::Zero(n_points, d);
  Eigen::ArrayXXd e2u_xx = Eigen::ArrayXXd::Zero(n_points, d);
  for (int n = 0; n <= M; ++n) {
    const double s = std::pow(eps, n);
    FineEvaluator evt(interpolate_nodes(e.u_t[n], w), nx, nt, L, n_points);
    Eigen::ArrayXXd Ut = evt.eval(basis, 0, 0).array();
    Eigen::ArrayXXd Uth = ev[n].eval(basis, 0, 1).array();
    Eigen::ArrayXXd Uthth = ev[n].eval(basis, 0, 2).array();
    Eigen::ArrayXXd Uxth = ev[n].eval(basis, 1, 1).array();
    Eigen::ArrayXXd Uxx = ev[n].eval(basis, 2, 0).array();
    Eigen::ArrayXXd a = Uth.colwise() * (psit.array() + eps * Pt.array()) + eps * Ut;
    Eigen::ArrayXXd b = eps * eps * Uxx + (2.0 * eps) * (Uxth.colwise() * K) + eps * (Uth.colwise() * Kx) +
                        Uthth.colwise() * (K * K);
    eu_t += s * a;
    e2u_xx += s * b;
  }
  out.residual = (eu_t + e.map->system().f_rows(out.u.array()) - e2u_xx).matrix();
  return out;
}

double hseps_norm(const RMat& h, double length, double eps, int s) {
  if (s < 0) throw std::invalid_argument("hseps_norm: s must be >= 0");
  const int n = static_cast<int>(h.rows());
  CMat c = dft_columns(h.cast<cplx>()) / static_cast<double>(n);
  const double kappa = kTwoPi / length;
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    const double sym = eps * kappa * wavenumber(j, n);
    double weight = 0.0, pw = 1.0;
    for (int r = 0; r <= s; ++r) {
      weight += pw;
      pw *= sym * sym;
    }
    total += weight * c.row(j).squaredNorm();
  }
  return std::sqrt(length * total);
}

double l2_norm(const RMat& h, double length) {
  return std::sqrt(length / static_cast<double>(h.rows()) * h.squaredNorm());
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n < 3 || y.size() != n) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ResidualReport residual_order_study(const ExpansionData& e, const std::vector<double>& eps, int s, int n_snapshots,
                                    int order) {
  ResidualReport rep;
  rep.m = order < 0 ? e.order : order;
  rep.s = s;
  const double T = e.field.t.b();
  for (double ep : eps) {
    if (!phase_admissible(e.field.q, e.field.length, ep)) {
      throw std::invalid_argument("residual_order_study: eps = " + std::to_string(ep) +
                                  " violates the phase-quantization rule");
    }
    const int n = fine_grid_size(e, ep);
    double l2 = 0.0, hs = 0.0;
    for (int r = 0; r < n_snapshots; ++r) {
      const double t = n_snapshots == 1 ? 0.0 : T * r / (n_snapshots - 1);
      AnsatzEval a = evaluate_ansatz(e, ep, t, n, true, rep.m);
      l2 = std::max(l2, l2_norm(a.residual, e.field.length));
      hs = std::max(hs, hseps_norm(a.residual, e.field.length, ep, s));
    }
    rep.eps.push_back(ep);
    rep.l2.push_back(l2);
    rep.hs.push_back(hs);
    rep.points.push_back(n);
  }
  rep.slope_l2 = loglog_slope(rep.eps, rep.l2);
  rep.slope_hs = loglog_slope(rep.eps, rep.hs);
  return rep;
}

}  // namespace hfw
