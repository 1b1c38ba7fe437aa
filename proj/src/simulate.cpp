#include "hfw/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <fftw3.h>

namespace hfw {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Real-to-half-complex transforms of the columns of an n x d array.
class RealSpectrum {
 public:
  explicit RealSpectrum(int n) : n_(n), buf_r_(n), buf_c_(n / 2 + 1) {
    fwd_ = fftw_plan_dft_r2c_1d(n, buf_r_.data(), reinterpret_cast<fftw_complex*>(buf_c_.data()), FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(buf_c_.data()), buf_r_.data(), FFTW_ESTIMATE);
  }
  ~RealSpectrum() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  RealSpectrum(const RealSpectrum&) = delete;
  RealSpectrum& operator=(const RealSpectrum&) = delete;

  int modes() const { return n_ / 2 + 1; }

  CMat forward(const RMat& v) {
    CMat out(modes(), v.cols());
    for (int c = 0; c < v.cols(); ++c) {
      buf_r_ = v.col(c);
      fftw_execute(fwd_);
      out.col(c) = buf_c_;
    }
    return out;
  }
  RMat backward(const CMat& s) {
    RMat out(n_, s.cols());
    for (int c = 0; c < s.cols(); ++c) {
      buf_c_ = s.col(c);
      fftw_execute(bwd_);
      out.col(c) = buf_r_ / static_cast<double>(n_);
    }
    return out;
  }

 private:
  int n_;
  RVec buf_r_;
  CVec buf_c_;
  fftw_plan fwd_, bwd_;
};

struct EtdCoefficients {
  RVec e, e2, q, f1, f2, f3;
};

// Contour-averaged phi functions of h L for diagonal L (32 points on a unit circle).
EtdCoefficients etd_coefficients(const RVec& lin, double h) {
  const int m = 32;
  const int n = static_cast<int>(lin.size());
  EtdCoefficients c;
  c.e = (h * lin).array().exp();
  c.e2 = (0.5 * h * lin).array().exp();
  c.q.resize(n);
  c.f1.resize(n);
  c.f2.resize(n);
  c.f3.resize(n);
  for (int j = 0; j < n; ++j) {
    cplx q = 0, f1 = 0, f2 = 0, f3 = 0;
    for (int r = 0; r < m; ++r) {
      const cplx z = h * lin(j) + std::polar(1.0, std::numbers::pi * (r + 0.5) / m);
      const cplx ez = std::exp(z);
      const cplx z3 = z * z * z;
      q += (std::exp(0.5 * z) - 1.0) / z;
      f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
      f2 += (2.0 + z + ez * (z - 2.0)) / z3;
      f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
    }
    c.q(j) = h * (q / double(m)).real();
    c.f1(j) = h * (f1 / double(m)).real();
    c.f2(j) = h * (f2 / double(m)).real();
    c.f3(j) = h * (f3 / double(m)).real();
  }
  return c;
}

CMat scale_rows(const RVec& s, const CMat& v) { return s.cast<cplx>().asDiagonal() * v; }

}  // namespace

const char* scheme_name(Scheme s) { return s == Scheme::Strang ? "strang" : "etdrk4"; }

Scheme parse_scheme(const std::string& name) {
  if (name == "strang") return Scheme::Strang;
  if (name == "etdrk4") return Scheme::ETDRK4;
  throw std::invalid_argument("unknown scheme '" + name + "' (expected strang or etdrk4)");
}

double default_time_step(double dx_unscaled) { return std::min(0.25 * dx_unscaled * dx_unscaled, 0.01); }

SimulationRun simulate_direct(const ReactionSystem& sys, double eps, double length, const RMat& u0,
                              const std::vector<double>& snapshot_times, const StepperSettings& settings) {
  if (!(eps > 0.0)) throw std::invalid_argument("simulate_direct: eps must be positive");
  if (u0.cols() != sys.dim()) throw std::invalid_argument("simulate_direct: u0 has the wrong number of components");
  if (snapshot_times.empty()) throw std::invalid_argument("simulate_direct: no snapshot times");
  const int n = static_cast<int>(u0.rows());
  if (n < 8 || n % 2) throw std::invalid_argument("simulate_direct: grid size must be even and >= 8");
  if (!u0.allFinite()) throw SimulationError("simulate_direct: non-finite initial data");
  SimulationRun run;
  run.eps = eps;
  run.length = length;
  run.nx = n;
  run.scheme = settings.scheme;
  const double len_u = length / eps;
  const double h0 = settings.dt > 0.0 ? settings.dt : default_time_step(len_u / n);

  double est = 0.0, prev = 0.0;
  for (double t : snapshot_times) {
    if (t < prev - 1e-15) throw std::invalid_argument("simulate_direct: snapshot times must increase");
    est += std::ceil((t - prev) / eps / h0 - 1e-9);
    prev = t;
  }
  if (est > 1e6) throw SimulationError("simulate_direct: more than 1e6 steps requested");

  RealSpectrum fft(n);
  RVec lin(fft.modes());
  for (int j = 0; j < fft.modes(); ++j) {
    const double w = kTwoPi / len_u * j;
    lin(j) = -w * w;
  }
  auto nonlinear = [&](const CMat& vh) { return fft.forward(RMat(-sys.f_rows(fft.backward(vh).array()).matrix())); };

  std::map<double, EtdCoefficients> cache;
  CMat vh = fft.forward(u0);
  double t_prev = 0.0;
  for (double t : snapshot_times) {
    const double span = (t - t_prev) / eps;
    const int steps = span > 0.0 ? std::max(1, static_cast<int>(std::ceil(span / h0 - 1e-9))) : 0;
    if (steps > 0) {
      const double h = span / steps;
      run.dt = std::max(run.dt, h);
      auto it = cache.find(h);
      if (it == cache.end()) it = cache.emplace(h, etd_coefficients(lin, h)).first;
      const EtdCoefficients& c = it->second;
      for (int s = 0; s < steps; ++s) {
        if (settings.scheme == Scheme::ETDRK4) {
          CMat nv = nonlinear(vh);
          CMat a = scale_rows(c.e2, vh) + scale_rows(c.q, nv);
          CMat na = nonlinear(a);
          CMat b = scale_rows(c.e2, vh) + scale_rows(c.q, na);
          CMat nb = nonlinear(b);
          CMat cc = scale_rows(c.e2, a) + scale_rows(c.q, CMat(2.0 * nb - nv));
          CMat nc = nonlinear(cc);
          vh = scale_rows(c.e, vh) + scale_rows(c.f1, nv) + scale_rows(c.f2, CMat(2.0 * (na + nb))) +
               scale_rows(c.f3, nc);
        } else {
          RMat v = fft.backward(scale_rows(c.e2, vh));
          Eigen::ArrayXXd r0 = -sys.f_rows(v.array());
          Eigen::ArrayXXd vs = v.array() + h * r0;
          Eigen::ArrayXXd r1 = -sys.f_rows(vs);
          v = (v.array() + 0.5 * h * (r0 + r1)).matrix();
          vh = scale_rows(c.e2, fft.forward(v));
        }
      }
      run.steps += steps;
    }
    RMat snap = steps > 0 ? fft.backward(vh) : (run.snapshots.empty() ? u0 : run.snapshots.back());
    if (!snap.allFinite()) throw SimulationError("simulate_direct: non-finite values at t = " + std::to_string(t));
    run.times.push_back(t);
    run.snapshots.push_back(snap);
    t_prev = t;
  }
  return run;
}

ErrorNorms error_norms(const RMat& a, const RMat& b, double length, double eps, int s) {
  RMat d = a - b;
  ErrorNorms e;
  e.l2 = l2_norm(d, length);
  e.linf = d.cwiseAbs().maxCoeff();
  e.hs = hseps_norm(d, length, eps, s);
  return e;
}

namespace {

int simulation_grid(const ExpansionData& e, double eps, const StudyOptions& opt) {
  if (!phase_admissible(e.field.q, e.field.length, eps)) {
    throw std::invalid_argument("eps = " + std::to_string(eps) + " violates the phase-quantization rule");
  }
  const int n = fine_grid_size(e, eps, opt.points_per_wavelength);
  if (n > (1 << 15)) throw std::invalid_argument("eps = " + std::to_string(eps) + " needs more than 2^15 points");
  return n;
}

std::vector<double> equispaced_times(double T, int n) {
  std::vector<double> t;
  for (int r = 0; r < n; ++r) t.push_back(n == 1 ? 0.0 : T * r / (n - 1));
  return t;
}

}  // namespace

ConvergenceReport convergence_study(const ExpansionData& e, int m, const std::vector<double>& eps,
                                    const StudyOptions& opt) {
  if (m > e.order) throw std::invalid_argument("convergence_study: expansion order below m");
  ConvergenceReport rep;
  rep.m = m;
  rep.s = opt.s;
  rep.scheme = opt.stepper.scheme;
  rep.has_next = e.order >= m + 1;
  const double T = e.field.t.b();
  const double L = e.field.length;
  std::vector<double> sup_hs, sup_linf, quad, next;
  for (double ep : eps) {
    const int n = simulation_grid(e, ep, opt);
    const std::vector<double> times = equispaced_times(T, opt.n_snapshots);
    RMat u0 = evaluate_ansatz(e, ep, 0.0, n, false, m).u;
    SimulationRun run = simulate_direct(e.map->system(), ep, L, u0, times, opt.stepper);
    ConvergenceEntry ent;
    ent.eps = ep;
    ent.nx = n;
    ent.dt = run.dt;
    for (size_t r = 0; r < times.size(); ++r) {
      RMat ans = evaluate_ansatz(e, ep, times[r], n, false, m).u;
      ErrorNorms en = error_norms(run.snapshots[r], ans, L, ep, opt.s);
      en.t = times[r];
      if (r == 0) ent.initial_error = en.hs;
      ent.sup_hs = std::max(ent.sup_hs, en.hs);
      ent.sup_linf = std::max(ent.sup_linf, en.linf);
      ent.snapshots.push_back(en);
      if (rep.has_next) {
        RMat ans2 = evaluate_ansatz(e, ep, times[r], n, false, m + 1).u;
        ErrorNorms e2 = error_norms(run.snapshots[r], ans2, L, ep, opt.s);
        ent.sup_hs_next = std::max(ent.sup_hs_next, e2.hs);
        ent.sup_linf_next = std::max(ent.sup_linf_next, e2.linf);
      }
    }
    double q = 0.0;
    for (size_t r = 1; r < times.size(); ++r) {
      q += 0.5 * (times[r] - times[r - 1]) * (std::pow(ent.snapshots[r].hs, 2) + std::pow(ent.snapshots[r - 1].hs, 2));
    }
    ent.quad_hs = std::sqrt(q);
    sup_hs.push_back(ent.sup_hs);
    sup_linf.push_back(ent.sup_linf);
    quad.push_back(ent.quad_hs);
    next.push_back(ent.sup_hs_next);
    rep.entries.push_back(std::move(ent));
  }
  rep.slope_hs = loglog_slope(eps, sup_hs);
  rep.slope_linf = loglog_slope(eps, sup_linf);
  rep.slope_quad = loglog_slope(eps, quad);
  rep.slope_hs_next = rep.has_next ? loglog_slope(eps, next) : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

RMat smooth_perturbation(int nx, int dim, double length, double eps, int s, double delta, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  RMat p = RMat::Zero(nx, dim);
  RVec x = slow_grid(length, nx);
  for (int c = 0; c < dim; ++c) {
    for (int q = 0; q <= 8; ++q) {
      const double a = gauss(rng), b = gauss(rng);
      const double decay = std::exp(-0.25 * q);
      for (int j = 0; j < nx; ++j) {
        const double ph = kTwoPi * q * x(j) / length;
        p(j, c) += decay * (a * std::cos(ph) + (q > 0 ? b * std::sin(ph) : 0.0));
      }
    }
  }
  const double norm = hseps_norm(p, length, eps, s);
  return norm > 0.0 ? RMat(p * (delta / norm)) : p;
}

LayerReport initial_layer_probe(const ExpansionData& e, int m, double eps, double delta, unsigned seed,
                                const StudyOptions& opt) {
  if (m > e.order) throw std::invalid_argument("initial_layer_probe: expansion order below m");
  const int n = simulation_grid(e, eps, opt);
  const double T = e.field.t.b();
  const double L = e.field.length;
  std::vector<double> times;
  for (int r = 0; r <= 4; ++r) times.push_back(std::min(T, eps * r / 4.0));
  for (double t : equispaced_times(T, opt.n_snapshots)) times.push_back(t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }),
              times.end());

  const RMat u0 = evaluate_ansatz(e, eps, 0.0, n, false, m).u;
  const int d = static_cast<int>(u0.cols());
  const RMat pert = smooth_perturbation(n, d, L, eps, opt.s, delta, seed);
  SimulationRun base = simulate_direct(e.map->system(), eps, L, u0, times, opt.stepper);
  SimulationRun moved = simulate_direct(e.map->system(), eps, L, RMat(u0 + pert), times, opt.stepper);

  LayerReport rep;
  rep.eps = eps;
  rep.delta = delta;
  rep.perturbation_hs = hseps_norm(pert, L, eps, opt.s);
  for (size_t r = 0; r < times.size(); ++r) {
    const double w = hseps_norm(RMat(moved.snapshots[r] - base.snapshots[r]), L, eps, opt.s);
    if (times[r] <= eps + 1e-14 && rep.perturbation_hs > 0.0) {
      rep.layer_growth = std::max(rep.layer_growth, w / rep.perturbation_hs);
    }
    const RMat ans = evaluate_ansatz(e, eps, times[r], n, false, m).u;
    const double dist = hseps_norm(RMat(moved.snapshots[r] - ans), L, eps, opt.s);
    rep.sup_distance = std::max(rep.sup_distance, dist);
    if (r + 1 == times.size()) {
      rep.final_difference = w;
      rep.final_distance = dist;
      rep.final_distance_unperturbed = hseps_norm(RMat(base.snapshots[r] - ans), L, eps, opt.s);
    }
  }
  rep.constant = rep.sup_distance / std::pow(eps, m);
  return rep;
}

}  // namespace hfw
