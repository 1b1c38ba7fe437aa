#include "hfw/bloch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "hfw/fredholm.hpp"

namespace hfw {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

CMat symbol_at(const RMat& g, cplx lambda, double k, double omega) {
  const int n = static_cast<int>(g.rows());
  CMat m = CMat::Zero(2 * n, 2 * n);
  m.topRightCorner(n, n) = CMat::Identity(n, n) / k;
  m.bottomLeftCorner(n, n) = (g.cast<cplx>() + lambda * CMat::Identity(n, n)) / k;
  m.bottomRightCorner(n, n) = CMat::Identity(n, n) * (omega / (k * k));
  return m;
}

// f'(p) at m equispaced angles from the trigonometric interpolant of the profile.
std::vector<RMat> jacobians_on(const WaveTrain& w, int m) {
  const int d = w.system.dim();
  RMat vals = trig_resample(w.profile.values, m);
  auto jac = w.system.jacobian_rows(vals.array());
  std::vector<RMat> out(m, RMat(d, d));
  for (int j = 0; j < m; ++j)
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) out[j](a, b) = jac[a * d + b](j);
  return out;
}

cplx log_det(const CMat& a) {
  Eigen::PartialPivLU<CMat> lu(a);
  cplx acc = 0.0;
  const CMat& f = lu.matrixLU();
  for (int i = 0; i < f.rows(); ++i) acc += std::log(f(i, i));
  if (lu.permutationP().determinant() < 0) acc += cplx(0.0, std::numbers::pi);
  return acc;
}

// Newton on D(., xi) with derivative from a central difference of D ratios; the step
// for a root of multiplicity m is m D / D'.
struct NewtonResult {
  cplx lambda;
  bool converged = false;
  int iterations = 0;
};

NewtonResult evans_newton(const PeriodMapper& pm, double xi, cplx start, int mult, int max_iter, int* evals) {
  NewtonResult r{start, false, 0};
  double last_step = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    r.iterations = it + 1;
    const double h = 1e-6 * std::max(1.0, std::abs(r.lambda));
    cplx l0 = pm.log_evans(r.lambda, xi);
    cplx lp = pm.log_evans(r.lambda + h, xi);
    cplx lm = pm.log_evans(r.lambda - h, xi);
    if (evals) *evals += 3;
    if (!std::isfinite(l0.real()) && l0.real() < 0) {
      r.converged = true;  // exact zero
      return r;
    }
    cplx rp = std::exp(lp - l0), rm = std::exp(lm - l0);
    cplx deriv_ratio = (rp - rm) / (2.0 * h);  // D'/D
    if (!std::isfinite(std::abs(deriv_ratio)) || std::abs(deriv_ratio) == 0.0) return r;
    cplx step = static_cast<double>(mult) / deriv_ratio;
    r.lambda -= step;
    double s = std::abs(step);
    if (s < 1e-12 * std::max(1.0, std::abs(r.lambda))) {
      r.converged = true;
      return r;
    }
    // Rounding floor: the step stopped shrinking at a tiny size.
    if (s < 1e-9 && s > 0.5 * last_step) {
      r.converged = true;
      return r;
    }
    last_step = s;
  }
  r.converged = last_step < 1e-9;
  return r;
}

struct Contour {
  const PeriodMapper& pm;
  double xi;
  double s0;
  double top_side = 1.0;
  int evals = 0;
  struct Sample {
    cplx value;
    double relative;  // |D| / scale
  };
  std::map<std::pair<long long, long long>, Sample> cache;

  Sample f(cplx z) {
    auto key = std::make_pair(std::llround(z.real() * 0x1p40), std::llround(z.imag() * 0x1p40));
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    ++evals;
    EvansValue ev = pm.evans_value(z, xi);
    Sample s{std::exp(ev.log_d - s0), std::exp(ev.log_d.real() - ev.log_scale)};
    cache.emplace(key, s);
    return s;
  }
};

struct EdgeScan {
  double arg = 0.0;
  double min_relative = std::numeric_limits<double>::infinity();
  bool resolved = true;
};

// Bisect until the complex log of D changes little across each piece; a floor on the
// sampling density guards against whole turns hiding between two samples.
void scan_segment(Contour& c, cplx a, cplx b, cplx fa, cplx fb, int depth, EdgeScan& out) {
  cplx ratio = fb / fa;
  double d = std::arg(ratio);
  bool small = std::abs(d) < 0.3 && std::abs(std::log(std::abs(ratio))) < 0.5 && std::abs(b - a) <= c.top_side / 32;
  if (small || depth >= 20) {
    if (std::abs(d) >= 0.3) out.resolved = false;
    out.arg += d;
    return;
  }
  cplx m = 0.5 * (a + b);
  Contour::Sample fm = c.f(m);
  out.min_relative = std::min(out.min_relative, fm.relative);
  scan_segment(c, a, m, fa, fm.value, depth + 1, out);
  scan_segment(c, m, b, fm.value, fb, depth + 1, out);
}

// Winding number, or -1 when the contour passes too close to a zero.
int winding(Contour& c, cplx lo, cplx hi) {
  cplx corners[4] = {lo, cplx(hi.real(), lo.imag()), hi, cplx(lo.real(), hi.imag())};
  EdgeScan scan;
  const int per_edge = 4;
  for (int e = 0; e < 4; ++e) {
    cplx a = corners[e], b = corners[(e + 1) % 4];
    cplx prev = a;
    Contour::Sample fprev = c.f(a);
    scan.min_relative = std::min(scan.min_relative, fprev.relative);
    for (int j = 1; j <= per_edge; ++j) {
      cplx z = a + (b - a) * (static_cast<double>(j) / per_edge);
      Contour::Sample fz = c.f(z);
      scan.min_relative = std::min(scan.min_relative, fz.relative);
      scan_segment(c, prev, z, fprev.value, fz.value, 0, scan);
      prev = z;
      fprev = fz;
    }
  }
  double w = scan.arg / kTwoPi;
  long r = std::lround(w);
  // Near-zero test on the normalized |D|, tightened with the contour size.
  const double side = std::max(hi.real() - lo.real(), hi.imag() - lo.imag());
  const double near_zero = 1e-3 * side / c.top_side;
  if (!scan.resolved || std::abs(w - r) > 0.05 || scan.min_relative < near_zero || r < 0) return -1;
  return static_cast<int>(r);
}

struct QuadSearch {
  Contour& c;
  const PeriodMapper& pm;
  double xi;
  std::vector<EvansRoot> roots;
  int rectangles = 0;

  bool inside(cplx z, cplx lo, cplx hi, double pad) const {
    return z.real() >= lo.real() - pad && z.real() <= hi.real() + pad && z.imag() >= lo.imag() - pad &&
           z.imag() <= hi.imag() + pad;
  }

  bool polish(cplx start, cplx lo, cplx hi, int mult) {
    const double side = std::max(hi.real() - lo.real(), hi.imag() - lo.imag());
    int ev = 0;
    NewtonResult nr = evans_newton(pm, xi, start, mult, 40, &ev);
    c.evals += ev;
    if (nr.converged && inside(nr.lambda, lo, hi, 1e-3 * side + 1e-12)) {
      roots.push_back({nr.lambda, mult});
      return true;
    }
    return false;
  }

  void run(cplx lo, cplx hi, int count, int depth) {
    ++rectangles;
    if (count <= 0) return;
    const double wdt = hi.real() - lo.real(), hgt = hi.imag() - lo.imag();
    const double side = std::max(wdt, hgt);
    cplx centre = 0.5 * (lo + hi);
    // A small box holding several zeros is treated as one multiple zero.
    const bool clustered = count > 1 && side < 1e-3 * c.top_side;
    if (count == 1 || clustered || side < 1e-6 || depth > 40) {
      if (polish(centre, lo, hi, count)) return;
      if (side < 1e-6 || depth > 40) {
        roots.push_back({centre, count});
        return;
      }
    }
    const bool split_re = wdt >= hgt;
    for (double t : {0.5, 0.46, 0.54, 0.42, 0.58, 0.37, 0.63}) {
      cplx lo2 = lo, hi1 = hi;
      if (split_re) {
        double x = lo.real() + t * wdt;
        hi1 = cplx(x, hi.imag());
        lo2 = cplx(x, lo.imag());
      } else {
        double y = lo.imag() + t * hgt;
        hi1 = cplx(hi.real(), y);
        lo2 = cplx(lo.real(), y);
      }
      int n1 = winding(c, lo, hi1);
      if (n1 < 0 || n1 > count) continue;
      int n2 = winding(c, lo2, hi);
      if (n2 < 0 || n1 + n2 != count) continue;
      run(lo, hi1, n1, depth + 1);
      run(lo2, hi, n2, depth + 1);
      return;
    }
    if (count > 1 && polish(centre, lo, hi, count)) return;
    throw NumericalError("evans_roots: no admissible subdivision line for [" + std::to_string(lo.real()) + ", " +
                         std::to_string(hi.real()) + "] x [" + std::to_string(lo.imag()) + ", " +
                         std::to_string(hi.imag()) + "] holding " + std::to_string(count) + " zeros");
  }
};

}  // namespace

CVec BlochOperator::eigenvalues() const {
  Eigen::ComplexEigenSolver<CMat> es(matrix, false);
  return es.eigenvalues();
}

BlochOperator assemble_bloch(const WaveTrain& w, double xi, double eta) {
  if (!(xi > -0.5 && xi <= 0.5)) throw std::invalid_argument("assemble_bloch: xi must lie in (-1/2, 1/2]");
  BlochOperator b;
  b.k = w.k;
  b.omega = w.omega;
  b.xi = xi;
  b.eta = eta;
  b.grid = w.grid();
  b.dim = w.system.dim();
  const int n = b.grid.size();
  const int d = b.dim;
  CMat d1 = diff_matrix(b.grid, 1, xi);
  CMat d2 = diff_matrix(b.grid, 2, xi);
  auto jac = w.system.jacobian_rows(w.profile.values.array());
  b.matrix = CMat::Zero(n * d, n * d);
  for (int c = 0; c < d; ++c) {
    b.matrix.block(c * n, c * n, n, n) = -w.omega * d1 + (w.k * w.k) * d2;
    b.matrix.block(c * n, c * n, n, n).diagonal().array() -= eta * eta;
    for (int e = 0; e < d; ++e) b.matrix.block(c * n, e * n, n, n).diagonal() -= jac[c * d + e].matrix().cast<cplx>();
  }
  return b;
}

WaveTrain member_at(const WaveFamily& family, double k) {
  if (family.members.empty()) throw std::invalid_argument("member_at: empty family");
  const WaveTrain& near = family.nearest(k);
  if (near.k == k) return near;
  if (k < family.k_min() || k > family.k_max()) throw std::out_of_range("member_at: k outside family range");
  return solve_profile(near.system, k, near.profile, family.omega_at(k), near.profile);
}

StabilityVerdict verify_diffusive_stability(const WaveTrain& w, const std::vector<double>& xi_grid,
                                            const std::vector<double>& eta_grid) {
  StabilityVerdict v;
  v.transversal = check_transversality(w).simple;
  CVec e0 = assemble_bloch(w, 0.0).eigenvalues();
  int best = 0;
  for (int i = 1; i < e0.size(); ++i)
    if (std::abs(e0(i)) < std::abs(e0(best))) best = i;
  v.zero_eigenvalue = std::abs(e0(best));
  v.axis_distance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < e0.size(); ++i)
    if (i != best) v.axis_distance = std::min(v.axis_distance, std::abs(e0(i).real()));
  v.condition_i = v.zero_eigenvalue < 1e-7 && v.axis_distance > 1e-6;

  v.c = std::numeric_limits<double>::infinity();
  for (double xi : xi_grid) {
    double max_re;
    if (xi == 0.0) {
      // The translation eigenvalue sits at 0; the rest must lie strictly left.
      max_re = 0.0;
    } else {
      CVec e = assemble_bloch(w, xi).eigenvalues();
      max_re = e.real().maxCoeff();
    }
    for (double eta : eta_grid) {
      double r2 = xi * xi + eta * eta;
      if (r2 == 0.0) continue;
      double re = max_re - eta * eta;
      v.c = std::min(v.c, -re / r2);
      if (re >= 0.0) v.failing.emplace_back(xi, eta);
    }
  }
  if (!std::isfinite(v.c)) v.c = 0.0;
  v.condition_ii = v.failing.empty() && v.c > 0.0;
  return v;
}

StabilityVerdict verify_diffusive_stability(const WaveFamily& family, double k, const std::vector<double>& xi_grid,
                                            const std::vector<double>& eta_grid) {
  return verify_diffusive_stability(member_at(family, k), xi_grid, eta_grid);
}

SampledSymbol first_order_symbol(const WaveTrain& w, cplx lambda, int n_samples) {
  if (w.k == 0.0) throw std::invalid_argument("first_order_symbol: k must be nonzero");
  const int m = n_samples > 0 ? n_samples : w.grid().size();
  auto jac = jacobians_on(w, m);
  SampledSymbol s;
  s.theta.resize(m);
  for (int j = 0; j < m; ++j) {
    s.theta(j) = kTwoPi * j / m;
    s.values.push_back(symbol_at(jac[j], lambda, w.k, w.omega));
  }
  return s;
}

int default_monodromy_steps(const WaveTrain& w, double lambda_bound) {
  const int n = w.grid().size();
  auto jac = jacobians_on(w, n);
  double rho = 0.0;
  for (const auto& g : jac) {
    Eigen::ComplexEigenSolver<CMat> es(symbol_at(g, cplx(std::max(1.0, lambda_bound), 0.0), w.k, w.omega), false);
    rho = std::max(rho, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  int steps = std::max(8 * n, static_cast<int>(std::ceil(kTwoPi * rho / 0.1)));
  return (steps + 7) / 8 * 8;
}

PeriodMapper::PeriodMapper(const WaveTrain& w, int steps) : wave_(w), dim_(w.system.dim()) {
  if (w.k == 0.0) throw std::invalid_argument("PeriodMapper: k must be nonzero");
  steps_ = steps > 0 ? steps : default_monodromy_steps(w);
  jac_ = jacobians_on(w, 2 * steps_);
  jac_.push_back(jac_.front());
}

std::vector<CMat> PeriodMapper::half_step_symbol(cplx lambda) const {
  std::vector<CMat> out;
  out.reserve(jac_.size());
  for (const auto& g : jac_) out.push_back(symbol_at(g, lambda, wave_.k, wave_.omega));
  return out;
}

FactoredPeriodMap PeriodMapper::period_map(cplx lambda) const {
  return factored_period_map(half_step_symbol(lambda), steps_);
}

MonodromyRecord PeriodMapper::monodromy(cplx lambda) const {
  MonodromyRecord r;
  r.k = wave_.k;
  r.lambda = lambda;
  r.map = period_map(lambda);
  r.x = r.map.dense();
  r.log = matrix_log_factored(r.map, std::abs(lambda) < 1e-2);
  r.m1 = r.log.m1;
  r.exponents = r.log.exponents;
  r.straddles_cut = r.log.straddles_cut;
  return r;
}

EvansValue PeriodMapper::evans_value(cplx lambda, double xi) const {
  FactoredPeriodMap map = period_map(lambda);
  const double xr = xi - std::floor(xi);
  const cplx z = std::exp(cplx(0.0, kTwoPi * xr));
  EvansValue v;
  int s = 0;
  for (int b : map.blocks) {
    v.log_d += log_det(map.upper.block(s, s, b, b) - z * CMat::Identity(b, b));
    s += b;
  }
  for (cplx r : map.multipliers()) v.log_scale += std::log1p(std::abs(r));
  return v;
}

cplx PeriodMapper::log_evans(cplx lambda, double xi) const { return evans_value(lambda, xi).log_d; }

double PeriodMapper::log_evans_scale(cplx lambda) const { return evans_value(lambda, 0.0).log_scale; }

MonodromyRecord monodromy(const WaveTrain& w, cplx lambda) { return PeriodMapper(w).monodromy(lambda); }

cplx evans(const WaveTrain& w, cplx lambda, double xi) { return std::exp(PeriodMapper(w).log_evans(lambda, xi)); }

int evans_winding(const PeriodMapper& mapper, double xi, cplx lo, cplx hi) {
  cplx ref = 0.5 * (lo + hi) + cplx(0.137, 0.071) * (hi.real() - lo.real());
  Contour c{mapper, xi, mapper.log_evans(ref, xi).real(), hi.real() - lo.real(), 0, {}};
  return winding(c, lo, hi);
}

std::vector<EvansRoot> evans_roots(const PeriodMapper& mapper, double xi, double radius, RootSearchStats* stats) {
  if (!(radius > 0.0)) throw std::invalid_argument("evans_roots: radius must be positive");
  // Normalize by |D| at a generic interior point so contour values stay O(1).
  Contour c{mapper, xi, mapper.log_evans(cplx(0.31 * radius, 0.23 * radius), xi).real(), 2.5 * radius, 0, {}};
  std::vector<EvansRoot> found;
  int rects = 0;
  bool done = false;
  for (double pad : {1.05, 1.08, 1.12, 1.17, 1.23}) {
    const double r = pad * radius;
    cplx lo(-r, -r), hi(r, r);
    int total = winding(c, lo, hi);
    if (total < 0) continue;
    QuadSearch q{c, mapper, xi, {}, 0};
    q.run(lo, hi, total, 0);
    rects = q.rectangles;
    found = std::move(q.roots);
    done = true;
    break;
  }
  if (!done) throw NumericalError("evans_roots: every outer contour passes near a zero");
  std::vector<EvansRoot> out;
  for (const auto& e : found)
    if (std::abs(e.lambda) <= radius) out.push_back(e);
  std::sort(out.begin(), out.end(), [](const EvansRoot& a, const EvansRoot& b) {
    return a.lambda.real() != b.lambda.real() ? a.lambda.real() < b.lambda.real() : a.lambda.imag() < b.lambda.imag();
  });
  if (stats) {
    stats->evaluations = c.evals;
    stats->rectangles = rects;
  }
  return out;
}

std::vector<cplx> bloch_eigenvalues_in_disk(const WaveTrain& w, double xi, double radius) {
  CVec e = assemble_bloch(w, xi).eigenvalues();
  std::vector<cplx> out;
  for (int i = 0; i < e.size(); ++i)
    if (std::abs(e(i)) <= radius) out.push_back(e(i));
  return out;
}

double match_multisets(const std::vector<EvansRoot>& roots, const std::vector<cplx>& eigs) {
  std::vector<cplx> flat;
  for (const auto& r : roots)
    for (int j = 0; j < r.multiplicity; ++j) flat.push_back(r.lambda);
  if (flat.size() != eigs.size()) return std::numeric_limits<double>::infinity();
  std::vector<bool> used(flat.size(), false);
  double worst = 0.0;
  for (cplx e : eigs) {
    int best = -1;
    for (size_t i = 0; i < flat.size(); ++i)
      if (!used[i] && (best < 0 || std::abs(flat[i] - e) < std::abs(flat[best] - e))) best = static_cast<int>(i);
    used[best] = true;
    worst = std::max(worst, std::abs(flat[best] - e));
  }
  return worst;
}

NeutralCurve neutral_curve(const WaveTrain& w, double xi_max, int n_samples) {
  if (!(xi_max > 0.0 && xi_max <= 0.5)) throw std::invalid_argument("neutral_curve: xi_max must lie in (0, 1/2]");
  if (n_samples < 3) throw std::invalid_argument("neutral_curve: need at least 3 samples");
  PeriodMapper pm(w);
  NeutralCurve out;
  out.k = w.k;
  out.omega = w.omega;
  NewtonResult start = evans_newton(pm, 0.0, cplx(1e-4, 0.0), 1, 40, nullptr);
  if (!start.converged || std::abs(start.lambda) > 1e-8) {
    throw NumericalError("neutral_curve: translation root at xi = 0 not found");
  }
  out.xi.push_back(0.0);
  out.lambda.push_back(start.lambda);
  // Tracking path: (xi, lambda) history for the predictor.
  std::vector<double> hx{0.0};
  std::vector<cplx> hl{start.lambda};
  const double base = xi_max / 200.0;
  double h = base;
  for (int s = 1; s < n_samples; ++s) {
    const double target = xi_max * s / (n_samples - 1);
    while (hx.back() < target - 1e-15) {
      double x0 = hx.back();
      double x1 = std::min(target, x0 + h);
      cplx pred = hl.back();
      if (hx.size() >= 2) {
        size_t m = hx.size();
        pred += (hl[m - 1] - hl[m - 2]) * ((x1 - x0) / (hx[m - 1] - hx[m - 2]));
      }
      NewtonResult nr = evans_newton(pm, x1, pred, 1, 12, nullptr);
      double slope_scale = hx.size() >= 2 ? std::abs(hl.back() - hl[hl.size() - 2]) : std::abs(x1 - x0);
      bool ok = nr.converged && std::abs(nr.lambda - pred) <= 10.0 * slope_scale + 1e-7;
      if (!ok) {
        h *= 0.5;
        if (h < base / 1024.0) throw NumericalError("neutral_curve: root jumped branch");
        continue;
      }
      hx.push_back(x1);
      hl.push_back(nr.lambda);
      h = std::min(base, 2.0 * h);
    }
    out.xi.push_back(target);
    out.lambda.push_back(hl.back());
  }
  // Least squares: Im = -c xi + c3 xi^3 + ..., Re = -b xi^2 + b4 xi^4 + ...
  const int terms = std::min(3, (n_samples - 1) / 2);
  const int rows = n_samples - 1;
  RMat ai(rows, terms), ar(rows, terms);
  RVec yi(rows), yr(rows);
  for (int r = 0; r < rows; ++r) {
    double x = out.xi[r + 1] / xi_max;
    for (int t = 0; t < terms; ++t) {
      ai(r, t) = std::pow(x, 2 * t + 1);
      ar(r, t) = std::pow(x, 2 * t + 2);
    }
    yi(r) = out.lambda[r + 1].imag();
    yr(r) = out.lambda[r + 1].real();
  }
  RVec ci = ai.colPivHouseholderQr().solve(yi);
  RVec cr = ar.colPivHouseholderQr().solve(yr);
  out.c_fit = -ci(0) / xi_max;
  out.b_fit = -cr(0) / (xi_max * xi_max);
  out.omega_prime_fit = (w.omega - out.c_fit) / w.k;
  return out;
}

WhithamReport whitham_flux_check(const WaveFamily& family, double k, double xi_max, int n_samples) {
  WaveTrain w = member_at(family, k);
  NeutralCurve nc = neutral_curve(w, xi_max, n_samples);
  WhithamReport r;
  r.k = k;
  r.omega_prime_evans = nc.omega_prime_fit;
  r.omega_prime_family = omega_derivatives(family, k).d1;
  r.difference = std::abs(r.omega_prime_evans - r.omega_prime_family);
  r.b = nc.b_fit;
  return r;
}

}  // namespace hfw
