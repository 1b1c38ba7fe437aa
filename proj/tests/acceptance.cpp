// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "hfw/fredholm.hpp"
#include "hfw/simulate.hpp"
#include "hfw/symmetrizer.hpp"

using namespace hfw;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

WaveTrain lambda_omega_wave(double omega0, double omega1, double k, int n = 64) {
  ReactionSystem sys = make_lambda_omega(omega0, omega1);
  AnalyticWaveTrain a = analytic_wavetrain(sys, k);
  return solve_profile(sys, k, a.sample(TorusGrid(n)), a.omega);
}

// lambda-omega (1, 0.5) on [0.2, 0.7], shared by several criteria.
const WaveFamily& reference_family() {
  static const WaveFamily fam = continue_family(lambda_omega_wave(1.0, 0.5, 0.2), 0.2, 0.7, 25);
  return fam;
}

Outcome profile_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const WaveFamily& fam = reference_family();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double err = 0.0;
  for (const WaveTrain& w : fam.members) {
    const double k2 = w.k * w.k;
    const double r0 = w.profile.values.rowwise().norm().maxCoeff();
    err = std::max({err, std::abs(w.omega - (1.0 + 0.5 * (1.0 - k2))), std::abs(r0 - std::sqrt(1.0 - k2))});
  }
  return {err < 1e-8 && secs < 10.0, std::to_string(fam.members.size()) + " members, max error " + fmt(err) +
                                         ", continuation " + fmt(secs) + " s"};
}

Outcome translation_eigenvalue() {
  double worst_eig = 0.0, worst_angle = 0.0;
  bool simple = true;
  for (const WaveTrain& w : reference_family().members) {
    TransversalityVerdict v = check_transversality(w);
    simple = simple && v.simple;
    worst_eig = std::max(worst_eig, std::abs(v.zero_eig));
    worst_angle = std::max(worst_angle, v.kernel_angle);
  }
  return {simple && worst_eig < 1e-7 && worst_angle < 1e-4,
          std::string(simple ? "all simple" : "not all simple") + ", max |eig| " + fmt(worst_eig) + ", max angle " +
              fmt(worst_angle)};
}

Outcome evans_bloch() {
  // Eight points on the reference family and two on the glancing family, whose zeros at
  // xi = 1/2 are double.
  struct Sample {
    double omega0, omega1, k, xi;
  };
  const std::vector<Sample> samples{{1, 0.5, 0.25, 0.0}, {1, 0.5, 0.3, 0.1},  {1, 0.5, 0.35, 0.2},
                                    {1, 0.5, 0.4, 0.05}, {1, 0.5, 0.45, 0.15}, {1, 0.5, 0.5, 0.25},
                                    {1, 0.5, 0.6, 0.1},  {1, 0.5, 0.7, 0.05}, {0, 0, 0.5, 0.5},
                                    {0, 0, 0.35, 0.5}};
  double worst = 0.0;
  int counted = 0, empty = 0, multiple = 0;
  for (const auto& s : samples) {
    WaveTrain w = s.omega0 == 1.0 ? member_at(reference_family(), s.k) : lambda_omega_wave(s.omega0, s.omega1, s.k);
    PeriodMapper pm(w);
    auto roots = evans_roots(pm, s.xi, 0.5);
    auto eigs = bloch_eigenvalues_in_disk(w, s.xi, 0.5);
    worst = std::max(worst, match_multisets(roots, eigs));
    empty += eigs.empty();
    for (const auto& r : roots) {
      counted += r.multiplicity;
      multiple += r.multiplicity > 1;
    }
  }
  return {worst < 1e-5, std::to_string(samples.size()) + " (k, xi) pairs, " + std::to_string(counted) +
                            " zeros counted with multiplicity (" + std::to_string(multiple) + " multiple, " +
                            std::to_string(empty) + " pairs without zeros), max distance " + fmt(worst)};
}

Outcome whitham() {
  const WaveFamily& fam = reference_family();
  double worst = 0.0;
  bool b_ok = true;
  for (double k = 0.25; k <= 0.55 + 1e-12; k += 0.05) {
    WhithamReport r = whitham_flux_check(fam, k);
    worst = std::max(worst, r.difference);
    // Eckhaus-stable for k^2 < 1 / (3 + 2 omega1^2).
    if (k * k < 1.0 / 3.5) b_ok = b_ok && r.b > 0.0;
  }
  // Onset of the sideband instability for omega1 = 0: sign change of b.
  auto b_at = [](double k) { return neutral_curve(lambda_omega_wave(1.0, 0.0, k), 0.05, 11).b_fit; };
  double lo = 0.5, hi = 0.65;
  const bool bracket = b_at(lo) > 0.0 && b_at(hi) < 0.0;
  for (int i = 0; i < 30 && bracket; ++i) {
    const double mid = 0.5 * (lo + hi);
    (b_at(mid) > 0.0 ? lo : hi) = mid;
  }
  const double onset = 0.5 * (lo + hi);
  const double gap = std::abs(onset * onset - 1.0 / 3.0);
  return {worst < 1e-3 && b_ok && bracket && gap < 0.02,
          "max |omega'_fit - domega/dk| " + fmt(worst) + (b_ok ? ", b > 0 on the stable range" : ", b <= 0 found") +
              ", onset k^2 = " + fmt(onset * onset) + " (|k^2 - 1/3| = " + fmt(gap) + ")"};
}

Outcome symmetrizer() {
  const auto t0 = std::chrono::steady_clock::now();
  CertificateGrid grid;  // low grid up to 1/R = 0.1, medium grid [0.1, 10]
  SymmetrizerRun case_i = certify_wavetrain(lambda_omega_wave(1.0, 0.5, 0.4), grid);
  // The glancing family: omega0 = omega1 = 0 (zero theta-frame speed).
  WaveTrain g = lambda_omega_wave(0.0, 0.0, 0.4);
  SymmetrizerRun case_ii = certify_wavetrain(g, grid);
  PeriodMapper pm(g);
  std::vector<double> xs, ys;
  for (double l : {1e-3, 1e-4, 1e-5}) {
    NeutralFrame fr = neutral_frame(pm.monodromy(l).m1, case_ii.jet);
    Eigen::ComplexEigenSolver<CMat> es(fr.block, false);
    xs.push_back(std::log(l));
    ys.push_back(std::log(std::abs(es.eigenvalues()(0))));
  }
  const double slope = (ys[0] - ys[2]) / (xs[0] - xs[2]);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = case_i.jet.case_tag == 1 && case_ii.jet.case_tag == 2 && case_i.low.pass && case_i.medium.pass &&
                    case_ii.low.pass && case_ii.medium.pass && case_i.low.c > 0 && case_i.medium.c > 0 &&
                    case_ii.low.c > 0 && case_ii.medium.c > 0 && std::abs(slope - 0.5) < 0.05 &&
                    !case_i.flipped.pass && !case_ii.flipped.pass && secs < 300.0;
  return {pass, "case i c = " + fmt(case_i.low.c) + "/" + fmt(case_i.medium.c) + ", case ii c = " +
                    fmt(case_ii.low.c) + "/" + fmt(case_ii.medium.c) + " (low/medium), sqrt slope " + fmt(slope) +
                    ", flipped S " + (case_i.flipped.pass || case_ii.flipped.pass ? "passes" : "fails") + ", " +
                    fmt(secs) + " s"};
}

// Slow setup of the modulation criteria: bump on [0, 2 pi) with mean 0.28, T = 0.5.
std::shared_ptr<ProfileMap> modulation_map() {
  static std::shared_ptr<ProfileMap> map = [] {
    WaveFamily fam = continue_family(lambda_omega_wave(1.0, 0.5, 0.2), 0.2, 0.45, 10);
    return std::make_shared<ProfileMap>(fam, 0.22, 0.42, 16, 32);
  }();
  return map;
}

const ExpansionData& bump_expansion() {
  static const ExpansionData e = [] {
    ModulationProfile prof;
    auto map = modulation_map();
    return build_expansion(map, solve_eikonal(*map, prof.k0(slow_grid(prof.length, 64)), prof.length, 0.5), 3);
  }();
  return e;
}

const std::vector<double> kEps{0.04, 0.028, 0.02, 0.014, 0.01};

Outcome residual_order() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExpansionData& e = bump_expansion();
  const double target[3] = {1.0, 2.0, 3.0}, tol[3] = {0.15, 0.2, 0.2};
  bool pass = true;
  std::string detail = "slopes";
  for (int m = 0; m <= 2; ++m) {
    ResidualReport r = residual_order_study(e, kEps, 2, 5, m);
    pass = pass && std::abs(r.slope_hs - target[m]) < tol[m] && std::abs(r.slope_l2 - target[m]) < tol[m];
    detail += " m=" + std::to_string(m) + ": " + fmt(r.slope_hs);
  }
  const double L = 2.0 * 3.14159265358979323846;
  auto map = modulation_map();
  ExpansionData flat = build_expansion(map, solve_eikonal(*map, RVec::Constant(64, 0.28), L, 0.5), 2);
  ResidualReport c = residual_order_study(flat, kEps, 2, 5);
  double worst = 0.0;
  for (size_t i = 0; i < kEps.size(); ++i) worst = std::max({worst, c.hs[i], c.l2[i]});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  pass = pass && worst < 1e-10 && secs < 300.0;
  return {pass, detail + "; constant k max residual " + fmt(worst) + ", " + fmt(secs) + " s"};
}

Outcome nonlinear_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  ConvergenceReport r = convergence_study(bump_expansion(), 2, kEps);
  bool zero = true;
  int max_nx = 0;
  for (const auto& en : r.entries) {
    zero = zero && en.initial_error == 0.0 && en.snapshots.front().hs == 0.0;
    max_nx = std::max(max_nx, en.nx);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = r.entries.size() >= 4 && r.has_next && r.slope_hs >= 1.8 && r.slope_hs_next >= 2.7 && zero &&
                    max_nx <= (1 << 15) && secs < 1800.0;
  return {pass, "m=2 slope " + fmt(r.slope_hs) + ", against order 3 " + fmt(r.slope_hs_next) + ", " +
                    std::to_string(r.entries.size()) + " eps, t=0 error " + (zero ? "exactly 0" : "nonzero") +
                    ", N <= " + std::to_string(max_nx) + ", " + scheme_name(r.scheme) + ", " + fmt(secs) + " s"};
}

Outcome attraction() {
  std::vector<double> c;
  for (double eps : {0.02, 0.01}) c.push_back(initial_layer_probe(bump_expansion(), 2, eps, std::pow(eps, 3)).constant);
  const double ratio = c[0] / c[1];
  return {ratio >= 1.0 / 3.0 && ratio <= 3.0,
          "C(0.02) = " + fmt(c[0]) + ", C(0.01) = " + fmt(c[1]) + ", ratio " + fmt(ratio)};
}

PeriodicField random_field(const TorusGrid& g, int dim, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  PeriodicField f(g, dim);
  for (int c = 0; c < dim; ++c)
    for (int q = 0; q <= 8; ++q) {
      const double a = nd(rng) / (1 + q * q), b = nd(rng) / (1 + q * q);
      for (int j = 0; j < g.size(); ++j) f.values(j, c) += a * std::cos(q * g.node(j)) + b * std::sin(q * g.node(j));
    }
  return f;
}

Outcome kernel_properties() {
  std::mt19937 rng(0);
  double worst[4] = {0, 0, 0, 0};
  int instances = 0;
  for (const WaveTrain& w : reference_family().members) {
    LinearizedOperator op = assemble_L(w);
    PartialInverse r(op, adjoint_null(op));
    const PeriodicField dp = w.dtheta();
    worst[0] = std::max(worst[0], max_abs(r.apply(dp)));
    worst[2] = std::max(worst[2], std::abs(r.h_integral(dp) - 1.0));
    for (int s = 0; s < 20; ++s, ++instances) {
      PeriodicField f = random_field(op.grid, w.profile.dim(), rng);
      PeriodicField p = r.project_kernel(f);
      const RMat range = f.values - p.values;
      worst[1] = std::max(worst[1], (op.apply(r.apply(f)).values - range).cwiseAbs().maxCoeff());
      worst[3] = std::max(worst[3], (r.project_kernel(p).values - p.values).cwiseAbs().maxCoeff());
    }
  }
  const double m = std::max({worst[0], worst[1], worst[2], worst[3]});
  return {m < 1e-9, std::to_string(instances) + " instances: |R p'| " + fmt(worst[0]) + ", |L R f - (I - Pi0) f| " +
                        fmt(worst[1]) + ", |int h p' - 1| " + fmt(worst[2]) + ", |Pi0^2 - Pi0| " + fmt(worst[3])};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"profile oracle", profile_oracle},
      {"translation eigenvalue", translation_eigenvalue},
      {"Evans/Bloch equivalence", evans_bloch},
      {"Whitham coefficients", whitham},
      {"symmetrizer certificates", symmetrizer},
      {"residual order", residual_order},
      {"nonlinear convergence", nonlinear_convergence},
      {"approximate attraction", attraction},
      {"kernel properties", kernel_properties},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
