#include "hfw/symmetrizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace hfw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double op_norm(const CMat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(a);
  return svd.singularValues()(0);
}

// Least-squares polynomial fit of matrix samples in lambda; returns coefficients of lambda^j.
std::vector<CMat> fit_matrix_poly(const std::vector<cplx>& z, const std::vector<CMat>& vals, int order, double radius,
                                  double* residual) {
  const int n = static_cast<int>(z.size());
  const int rows = static_cast<int>(vals[0].rows()), cols = static_cast<int>(vals[0].cols());
  CMat v(n, order + 1);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p <= order; ++p) v(i, p) = std::pow(z[i] / radius, p);
  CMat y(n, rows * cols);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < rows; ++a)
      for (int b = 0; b < cols; ++b) y(i, a * cols + b) = vals[i](a, b);
  CMat c = v.colPivHouseholderQr().solve(y);
  if (residual) *residual = (v * c - y).cwiseAbs().maxCoeff();
  std::vector<CMat> out(order + 1, CMat(rows, cols));
  for (int p = 0; p <= order; ++p) {
    double scale = std::pow(radius, -p);
    for (int a = 0; a < rows; ++a)
      for (int b = 0; b < cols; ++b) out[p](a, b) = c(p, a * cols + b) * scale;
  }
  return out;
}

std::vector<cplx> circle(double radius, int n) {
  std::vector<cplx> z(n);
  for (int j = 0; j < n; ++j) z[j] = std::polar(radius, 2 * std::numbers::pi * (j + 0.25) / n);
  return z;
}

// Split with exactly r neutral eigenvalues: the r smallest |Re| against the rest.
SchurSplit neutral_split(const CMat& m1, int r) {
  Eigen::ComplexEigenSolver<CMat> es(m1, false);
  std::vector<double> re;
  for (int i = 0; i < es.eigenvalues().size(); ++i) re.push_back(std::abs(es.eigenvalues()(i).real()));
  std::sort(re.begin(), re.end());
  if (r >= static_cast<int>(re.size())) throw GapViolation("neutral_split: no hyperbolic part");
  double inner = r > 0 ? re[r - 1] : 0.0;
  if (!(re[r] > 1.5 * inner + 1e-10)) {
    throw GapViolation("neutral_split: neutral group not separated (|Re| " + std::to_string(inner) + " vs " +
                       std::to_string(re[r]) + ")");
  }
  SchurSplit s = ordered_schur_split(m1, 0.5 * (inner + re[r]));
  if (s.n_neutral() != r) throw GapViolation("neutral_split: neutral dimension changed");
  return s;
}

CMat blockdiag(const std::vector<CMat>& blocks) {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.rows());
  CMat out = CMat::Zero(n, n);
  int o = 0;
  for (const auto& b : blocks) {
    out.block(o, o, b.rows(), b.cols()) = b;
    o += static_cast<int>(b.rows());
  }
  return out;
}

// Block of the rescaled neutral matrix: S_c^{-1} m S_c / sqrt(c0), S_c = diag(1, sqrt(c0)).
CMat rescale(const CMat& m, double c0) {
  double s = std::sqrt(c0);
  CMat out = m / s;
  out(0, 1) *= s;
  out(1, 0) /= s;
  return out;
}

// T~ = [[1, 0], [t, 1]] clearing the (1,1) entry of m.
CMat clearing_transform(const CMat& m) {
  CMat t = CMat::Identity(2, 2);
  t(1, 0) = m(0, 0) / m(0, 1);
  return t;
}

CMat apply_similarity(const CMat& t, const CMat& m) { return t * m * t.inverse(); }

cplx scalar_coeff(const std::vector<cplx>& z, const std::vector<cplx>& v, int order, double radius, int p) {
  std::vector<CMat> vals;
  for (cplx x : v) vals.push_back(CMat::Constant(1, 1, x));
  return fit_matrix_poly(z, vals, order, radius, nullptr)[p](0, 0);
}

// Samples of the jet-basis neutral block of mapper on the stencil.
std::vector<CMat> stencil_blocks(const PeriodMapper& mapper, const NeutralBlockJet& jet, const std::vector<cplx>& z) {
  std::vector<CMat> out;
  for (cplx l : z) out.push_back(neutral_frame(mapper.monodromy(l).m1, jet).block);
  return out;
}

// Normal form at fixed kappa: rescale by the (1,2) entry at lambda = 0, apply the
// kappa transform [[1,0],[a~ kappa,1]], then clear (1,1) sample by sample.
std::vector<CMat> kappa_normal_forms(const std::vector<CMat>& rescaled, const CMat& at_zero) {
  CMat base = at_zero / at_zero(0, 1);
  CMat t = CMat::Identity(2, 2);
  t(1, 0) = base(0, 0);
  std::vector<CMat> out;
  for (const CMat& m : rescaled) {
    CMat mm = apply_similarity(t, m / at_zero(0, 1));
    out.push_back(apply_similarity(clearing_transform(mm), mm));
  }
  return out;
}

}  // namespace

AveragedSymbol averaged_symbol_record(const PeriodMapper& mapper, const FrequencyPoint& point) {
  if (mapper.wave().k == 0.0) throw std::invalid_argument("averaged_symbol: k must be nonzero");
  MonodromyRecord rec = mapper.monodromy(point.reduced_lambda());
  return {rec.m1, rec.straddles_cut};
}

CMat averaged_symbol(const PeriodMapper& mapper, const FrequencyPoint& point) {
  AveragedSymbol a = averaged_symbol_record(mapper, point);
  if (a.branch_ambiguous) {
    throw NumericalError("averaged_symbol: multipliers cluster on the branch cut at lambda = " +
                         std::to_string(point.reduced_lambda().real()) + "+" +
                         std::to_string(point.reduced_lambda().imag()) + "i");
  }
  return a.m1;
}

CMat averaged_symbol(const WaveTrain& w, const FrequencyPoint& point) {
  return averaged_symbol(PeriodMapper(w), point);
}

CMat kreiss_symmetrizer(const CMat& m, double c0) {
  SchurSplit sp = ordered_schur_split(m, c0);
  if (sp.n_neutral() != 0) throw GapViolation("kreiss_symmetrizer: neutral eigenvalues inside |Re| <= c0");
  CMat d = blockdiag({lyapunov_symmetrizer(sp.p_plus, 1), CMat(-lyapunov_symmetrizer(sp.p_minus, -1))});
  double scale = op_norm(sp.transform_inv);
  return scale * scale * sp.transform.adjoint() * d * sp.transform;
}

NeutralFrame neutral_frame(const CMat& m1, const NeutralBlockJet& jet) {
  NeutralFrame fr;
  fr.split = neutral_split(m1, jet.rank);
  fr.r = fr.split.transform.middleRows(fr.split.n_plus(), jet.rank) * jet.basis0;
  fr.block = fr.r.fullPivLu().solve(fr.split.neutral * fr.r);
  return fr;
}

NeutralBlockJet extract_neutral_block(const PeriodMapper& mapper, const NeutralJetOptions& opt) {
  if (!(opt.radius > 0.0 && opt.radius <= 1e-2)) throw std::invalid_argument("extract_neutral_block: radius must be in (0, 1e-2]");
  if (opt.samples < opt.order + 2) throw std::invalid_argument("extract_neutral_block: too few samples for the order");
  const WaveTrain& w = mapper.wave();
  NeutralBlockJet jet;
  jet.k = w.k;
  jet.omega = w.omega;
  jet.radius = opt.radius;
  MonodromyRecord rec0 = mapper.monodromy(0.0);
  int r = 0;
  for (cplx e : rec0.exponents) r += std::abs(e) < 1e-3;
  if (r != 1 && r != 2) {
    throw NumericalError("extract_neutral_block: neutral subspace dimension " + std::to_string(r) + " (expected 1 or 2)");
  }
  jet.rank = r;
  jet.case_tag = r;
  SchurSplit sp0 = neutral_split(rec0.m1, r);
  CMat wbasis = CMat::Identity(r, r);
  if (r == 2) {
    // Jordan chain: w2 maximizes |N0 w|, w1 = N0 w2.
    Eigen::JacobiSVD<CMat> svd(sp0.neutral, Eigen::ComputeFullV);
    CVec w2 = svd.matrixV().col(0);
    wbasis.col(1) = w2;
    wbasis.col(0) = sp0.neutral * w2;
  }
  jet.basis0 = sp0.transform_inv.middleCols(sp0.n_plus(), r) * wbasis;

  std::vector<cplx> z = circle(opt.radius, opt.samples);
  std::vector<CMat> blocks = stencil_blocks(mapper, jet, z);
  jet.coeffs = fit_matrix_poly(z, blocks, opt.order, opt.radius, &jet.fit_residual);

  if (r == 1) {
    cplx a1 = jet.coeffs[1](0, 0);
    if (std::abs(a1.imag()) > 1e-6 * std::abs(a1)) throw NumericalError("extract_neutral_block: leading coefficient not real");
    jet.speed = -1.0 / a1.real();
    if (!(std::abs(jet.speed) > 1e-4)) throw NumericalError("extract_neutral_block: case i needs |c| > 1e-4");
    jet.b = jet.coeffs[2](0, 0).real() * std::pow(jet.speed, 3);
    return jet;
  }

  cplx c0 = jet.coeffs[1](1, 0);
  if (!(c0.real() > 0.0) || std::abs(c0.imag()) > 1e-6 * std::abs(c0)) {
    throw NumericalError("extract_neutral_block: (2,1) coefficient of lambda is not real positive");
  }
  jet.c0 = c0.real();
  std::vector<cplx> e12, e21, e22;
  for (const CMat& b : blocks) {
    CMat g = normal_form_transform(jet, b);
    CMat mt = apply_similarity(g, b) / std::sqrt(jet.c0);
    e12.push_back(mt(0, 1));
    e21.push_back(mt(1, 0));
    e22.push_back(mt(1, 1));
  }
  jet.nb = scalar_coeff(z, e12, opt.order, opt.radius, 1);
  jet.nc = scalar_coeff(z, e21, opt.order, opt.radius, 2);
  jet.nd = scalar_coeff(z, e22, opt.order, opt.radius, 1);

  if (opt.kappa_step > 0.0) {
    const double dk = opt.kappa_step;
    jet.kappa_step = dk;
    CMat n_at[2];
    cplx lin21[2], f_at[2];
    for (int side = 0; side < 2; ++side) {
      double kk = w.k + (side == 0 ? -dk : dk);
      WaveTrain wk = solve_profile(w.system, kk, w.profile, w.omega, w.profile);
      PeriodMapper mk(wk, mapper.steps());
      std::vector<CMat> bk = stencil_blocks(mk, jet, z);
      for (CMat& b : bk) b = rescale(b, jet.c0);
      std::vector<CMat> ck = fit_matrix_poly(z, bk, opt.order, opt.radius, nullptr);
      n_at[side] = ck[0];
      std::vector<CMat> nf = kappa_normal_forms(bk, ck[0]);
      std::vector<cplx> v21, v22;
      for (const CMat& m : nf) {
        v21.push_back(m(1, 0));
        v22.push_back(m(1, 1));
      }
      lin21[side] = scalar_coeff(z, v21, opt.order, opt.radius, 1);
      f_at[side] = scalar_coeff(z, v22, opt.order, opt.radius, 0);
    }
    jet.n_kappa = (n_at[1] - n_at[0]) / (2 * dk);
    jet.e0 = (lin21[1] - lin21[0]) / (2 * dk);
    cplx f = (f_at[1] - f_at[0]) / (2 * dk);
    jet.f = f.real();
    jet.f_imag = f.imag();
    jet.kappa_coupling_residual = std::abs(jet.e0.imag() * jet.f) * dk;
  }
  return jet;
}

CMat normal_form_transform(const NeutralBlockJet& jet, const CMat& block) {
  CMat sc_inv = CMat::Identity(2, 2);
  sc_inv(1, 1) = 1.0 / std::sqrt(jet.c0);
  CMat mp = rescale(block, jet.c0);
  return clearing_transform(mp) * sc_inv;
}

double case_i_symmetrizer(const NeutralBlockJet& jet) {
  if (jet.case_tag != 1) throw std::invalid_argument("case_i_symmetrizer: jet is not case i");
  return -jet.speed;
}

cplx case_i_series(const NeutralBlockJet& jet, cplx lambda) {
  cplx sum = 0.0, p = 1.0;
  for (const CMat& c : jet.coeffs) {
    sum += c(0, 0) * p;
    p *= lambda;
  }
  return sum;
}

CaseIISymmetrizer case_ii_symmetrizer(const NeutralBlockJet& jet, double tau, double kappa) {
  if (jet.case_tag != 2) throw std::invalid_argument("case_ii_symmetrizer: jet is not case ii");
  const double b1 = jet.nb.real(), b2 = jet.nb.imag();
  const double c1 = jet.nc.real(), c2 = jet.nc.imag();
  const double d1 = jet.nd.real(), d2 = jet.nd.imag();
  const double e01 = jet.e0.real(), e02 = jet.e0.imag();
  const double fk = jet.f * kappa;
  const double den = 1.0 - c2 * tau + e01 * kappa;
  if (std::abs(den) < 0.1) throw NumericalError("case_ii_symmetrizer: |tau|, |kappa| too large for the sigma equation");
  CaseIISymmetrizer out;
  out.sigma = -(tau + c1 * tau + e02 * kappa) / den;
  // sigma f kappa / tau with the e02 f kappa term removed.
  const double sigma_f_over_tau = -(1.0 + c1) * fk / den;
  // Re X = 0 and Im X / tau = 0 at gamma = 0.
  Eigen::Matrix2d a;
  a << 1.0 - b2 * tau, -(c1 * tau * tau + e02 * kappa * tau), b1, -1.0 + c2 * tau - e01 * kappa;
  Eigen::Vector2d rhs(out.sigma * d1 * tau + d2 * tau - fk, -d1 + out.sigma * d2 - sigma_f_over_tau);
  if (std::abs(a.determinant()) < 0.1) throw NumericalError("case_ii_symmetrizer: alpha-beta system near singular; shrink the domain");
  Eigen::Vector2d ab = a.partialPivLu().solve(rhs);
  out.alpha = ab(0);
  out.beta = ab(1);
  out.s.resize(2, 2);
  out.s << out.alpha, cplx(1.0, out.sigma), cplx(1.0, -out.sigma), out.beta;
  return out;
}

CMat neutral_symmetrizer(const NeutralBlockJet& jet, const CMat& block, double tau) {
  if (jet.case_tag == 1) return CMat::Constant(1, 1, case_i_symmetrizer(jet));
  CMat g = normal_form_transform(jet, block);
  return g.adjoint() * case_ii_symmetrizer(jet, tau).s * g;
}

SymmetrizerSample evaluate_sample(const FrequencyPoint& point, const CMat& m1, const CMat& s) {
  SymmetrizerSample out;
  out.point = point;
  out.m1 = m1;
  double sn = op_norm(s);
  out.hermitian_defect = sn > 0 ? (s - s.adjoint()).cwiseAbs().maxCoeff() / sn : 0.0;
  out.s = hermitian_part(s);
  out.s_norm = sn;
  out.lambda_min = min_eig_hermitian(out.s * m1);
  double wgt = point.weight();
  out.ratio = wgt > 0 ? out.lambda_min / wgt : (out.lambda_min >= 0 ? kInf : -kInf);
  return out;
}

SymmetrizerSample low_frequency_symmetrizer(const PeriodMapper& mapper, const NeutralBlockJet& jet,
                                            const FrequencyPoint& point) {
  AveragedSymbol sym = averaged_symbol_record(mapper, point);
  const CMat& m1 = sym.m1;
  NeutralFrame fr = neutral_frame(m1, jet);
  const SchurSplit& sp = fr.split;
  const int np = sp.n_plus(), r = jet.rank, nm = sp.n_minus();
  CMat sn = neutral_symmetrizer(jet, fr.block, point.reduced_tau());
  CMat d = blockdiag({lyapunov_symmetrizer(sp.p_plus, 1), sn, CMat(-lyapunov_symmetrizer(sp.p_minus, -1))});
  const int n = static_cast<int>(m1.rows());
  CMat b(n, n), binv(n, n);
  b << sp.transform_inv.leftCols(np), sp.transform_inv.middleCols(np, r) * fr.r, sp.transform_inv.rightCols(nm);
  binv << sp.transform.topRows(np), fr.r.inverse() * sp.transform.middleRows(np, r), sp.transform.bottomRows(nm);
  double scale = op_norm(b);
  SymmetrizerSample out = evaluate_sample(point, m1, scale * scale * binv.adjoint() * d * binv);
  out.branch_ambiguous = sym.branch_ambiguous;
  return out;
}

SymmetrizerSample medium_frequency_symmetrizer(const PeriodMapper& mapper, const FrequencyPoint& point) {
  AveragedSymbol sym = averaged_symbol_record(mapper, point);
  const CMat& m1 = sym.m1;
  Eigen::ComplexEigenSolver<CMat> es(m1, false);
  double gap = kInf;
  for (int i = 0; i < es.eigenvalues().size(); ++i) gap = std::min(gap, std::abs(es.eigenvalues()(i).real()));
  if (!(gap > 1e-8)) throw GapViolation("medium_frequency_symmetrizer: neutral eigenvalue at the point");
  SymmetrizerSample out = evaluate_sample(point, m1, kreiss_symmetrizer(m1, 0.5 * gap));
  out.branch_ambiguous = sym.branch_ambiguous;
  return out;
}

SymmetrizerCertificate verify_certificate(const std::vector<SymmetrizerSample>& samples, double c) {
  SymmetrizerCertificate cert;
  cert.c = c;
  cert.samples = samples;
  cert.min_ratio = kInf;
  cert.pass = !samples.empty();
  for (const auto& s : samples) {
    if (!(s.lambda_min >= c * s.point.weight())) cert.pass = false;
    if (s.ratio < cert.min_ratio || std::isnan(s.ratio)) {
      cert.min_ratio = s.ratio;
      cert.worst = s.point;
    }
    cert.s_norm_max = std::max(cert.s_norm_max, s.s_norm);
    cert.hermitian_defect_max = std::max(cert.hermitian_defect_max, s.hermitian_defect);
    cert.branch_ambiguous += s.branch_ambiguous;
  }
  return cert;
}

SymmetrizerCertificate certify(const std::vector<SymmetrizerSample>& samples) {
  SymmetrizerCertificate probe = verify_certificate(samples, 0.0);
  if (!(probe.min_ratio > 0.0) || !probe.pass) {
    probe.c = 0.0;
    probe.pass = false;
    return probe;
  }
  double lo = 0.0, hi = 1.0;
  while (verify_certificate(samples, hi).pass) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) break;
  }
  while (hi - lo > 1e-3 * hi) {
    double mid = 0.5 * (lo + hi);
    (verify_certificate(samples, mid).pass ? lo : hi) = mid;
  }
  double e = std::pow(10.0, std::floor(std::log10(lo)) - 1);
  double c = std::floor(lo / e) * e;
  SymmetrizerCertificate cert = verify_certificate(samples, c);
  cert.pass = cert.pass && c > 0.0;
  return cert;
}

std::vector<FrequencyPoint> low_frequency_grid(const CertificateGrid& grid) {
  const double top = 1.0 / grid.radius;
  std::vector<double> gammas{0.0};
  for (int i = 0; i < grid.n_gamma; ++i) {
    double t = grid.n_gamma > 1 ? static_cast<double>(i) / (grid.n_gamma - 1) : 1.0;
    gammas.push_back(std::pow(10.0, std::log10(1e-4) + t * (std::log10(top) - std::log10(1e-4))));
  }
  std::vector<double> taus;
  for (int i = 0; i < grid.n_tau; ++i) {
    double t = grid.n_tau > 1 ? top * i / (grid.n_tau - 1) : 0.0;
    taus.push_back(t);
    if (i > 0) taus.push_back(-t);
  }
  std::vector<FrequencyPoint> out;
  for (double g : gammas)
    for (double t : taus) {
      if (g == 0.0 && t == 0.0) continue;
      out.push_back({g, t});
    }
  return out;
}

std::vector<FrequencyPoint> medium_frequency_grid(const CertificateGrid& grid) {
  std::vector<FrequencyPoint> out;
  const double lo = std::log10(1.0 / grid.radius), hi = std::log10(grid.radius);
  for (int i = 0; i < grid.n_medium_radius; ++i) {
    double rad = std::pow(10.0, lo + (hi - lo) * i / std::max(1, grid.n_medium_radius - 1));
    for (int j = 0; j < grid.n_medium_angle; ++j) {
      double phi = -std::numbers::pi / 2 + std::numbers::pi * j / std::max(1, grid.n_medium_angle - 1);
      double g = (j == 0 || j == grid.n_medium_angle - 1) ? 0.0 : rad * std::cos(phi);
      out.push_back({std::max(0.0, g), rad * std::sin(phi)});
    }
  }
  return out;
}

SymmetrizerRun certify_wavetrain(const WaveTrain& w, const CertificateGrid& grid) {
  PeriodMapper mapper(w, default_monodromy_steps(w, grid.radius));
  SymmetrizerRun run;
  run.jet = extract_neutral_block(mapper);
  std::vector<SymmetrizerSample> low, flipped, medium;
  for (const auto& p : low_frequency_grid(grid)) {
    SymmetrizerSample s = low_frequency_symmetrizer(mapper, run.jet, p);
    flipped.push_back(evaluate_sample(p, s.m1, CMat(-s.s)));
    low.push_back(std::move(s));
  }
  for (const auto& p : medium_frequency_grid(grid)) medium.push_back(medium_frequency_symmetrizer(mapper, p));
  run.low = certify(low);
  run.low.regime = "low";
  run.medium = certify(medium);
  run.medium.regime = "medium";
  run.flipped = certify(flipped);
  run.flipped.regime = "low-flipped";
  for (auto* c : {&run.low, &run.medium, &run.flipped}) {
    c->k = w.k;
    c->case_tag = run.jet.case_tag;
  }
  return run;
}

HighFrequencyReport high_frequency_check(const WaveTrain& w, const std::vector<cplx>& lambdas, int n_theta) {
  HighFrequencyReport rep;
  rep.split_ok = true;
  const int n = w.system.dim();
  for (cplx l : lambdas) {
    SampledSymbol sym = first_order_symbol(w, l, n_theta);
    HighFrequencyPoint pt;
    pt.lambda = l;
    pt.margin = kInf;
    pt.bound = kInf;
    for (size_t j = 0; j < sym.values.size(); ++j) {
      const CMat& m = sym.values[j];
      Eigen::ComplexEigenSolver<CMat> es(m, false);
      double margin = kInf;
      int pos = 0;
      for (int i = 0; i < es.eigenvalues().size(); ++i) {
        margin = std::min(margin, std::abs(es.eigenvalues()(i).real()));
        pos += es.eigenvalues()(i).real() > 0;
      }
      if (pos != n || !(margin > 0.0)) {
        throw GapViolation("high_frequency_check: split fails at theta = " + std::to_string(sym.theta(j)) +
                           ", lambda = " + std::to_string(l.real()) + "+" + std::to_string(l.imag()) + "i");
      }
      double bound = min_eig_hermitian(kreiss_symmetrizer(m, 0.5 * margin) * m);
      pt.margin = std::min(pt.margin, margin);
      if (bound < pt.bound) {
        pt.bound = bound;
        pt.worst_theta = sym.theta(j);
      }
    }
    rep.points.push_back(pt);
  }
  if (rep.points.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, lo = kInf, hi = 0;
    const double m = static_cast<double>(rep.points.size());
    for (const auto& p : rep.points) {
      double x = std::log(std::abs(p.lambda)), y = std::log(p.margin);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      double q = p.bound / std::sqrt(std::abs(p.lambda));
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    rep.margin_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    rep.bound_spread = hi / lo;
  }
  return rep;
}

}  // namespace hfw
