#include "hfw/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "hfw/config.hpp"
#include "hfw/fredholm.hpp"
#include "hfw/io.hpp"
#include "hfw/simulate.hpp"
#include "hfw/symmetrizer.hpp"

namespace hfw {

namespace {

class GuardRefusal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json number_list(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

// Bloch grid in (-1/2, 1/2]; -1/2 is folded onto +1/2.
std::vector<double> xi_grid(const RunConfig& c) {
  std::vector<double> out;
  for (double x : linspace(-c.stability_xi_max, c.stability_xi_max, c.stability_n_xi)) {
    if (x <= -0.5) x = 0.5;
    if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> eta_grid(const RunConfig& c) { return linspace(0.0, c.stability_eta_max, c.stability_n_eta); }

double max_amplitude(const WaveTrain& w) { return w.profile.values.rowwise().norm().maxCoeff(); }

std::string case_name(int tag) { return tag == 1 ? "i" : tag == 2 ? "ii" : "none"; }

// Everything a command needs from the configuration, built lazily.
class Context {
 public:
  Context(RunConfig cfg, const CommandOptions& opt) : cfg_(std::move(cfg)), opt_(opt), sys_(cfg_.system()) {}

  const RunConfig& cfg() const { return cfg_; }
  const ReactionSystem& system() const { return sys_; }
  std::ostream& log() const { return *opt_.log; }
  bool force() const { return opt_.force; }

  const WaveFamily& family() {
    if (!family_) {
      const TorusGrid grid(cfg_.n_theta);
      WaveTrain start = seed_profile(cfg_.family_kmin, grid);
      family_ = continue_family(start, cfg_.family_kmin, cfg_.family_kmax, cfg_.family_steps);
    }
    return *family_;
  }

  WaveTrain wave_at(double k) {
    if (sys_.name() == "lambda_omega") return seed_profile(k, TorusGrid(cfg_.n_theta));
    const WaveFamily& f = family();
    if (k < f.k_min() - 1e-12 || k > f.k_max() + 1e-12) {
      throw ConfigError("k = " + format_real(k) + " lies outside the family range [" + format_real(f.k_min()) +
                        ", " + format_real(f.k_max()) + "]");
    }
    return member_at(f, k);
  }

  StabilityVerdict stability(const WaveTrain& w) const {
    return verify_diffusive_stability(w, xi_grid(cfg_), eta_grid(cfg_));
  }

  // Refuses unstable wave trains unless --force; records the verdict either way.
  void guard(OutputSet& out, const std::vector<double>& ks) {
    for (double k : ks) {
      StabilityVerdict v = stability(wave_at(k));
      const std::string detail = "k = " + format_real(k) + (v.stable() ? ": stable" : ": not diffusively stable");
      out.stage("stability guard", v.stable(), detail);
      if (!v.stable()) {
        if (!opt_.force) throw GuardRefusal(detail + " (use --force to run anyway)");
        log() << "warning: " << detail << ", continuing because of --force\n";
      }
    }
  }

 private:
  WaveTrain seed_profile(double k, const TorusGrid& grid) const {
    if (sys_.name() == "lambda_omega") {
      AnalyticWaveTrain a = analytic_wavetrain(sys_, k);
      return solve_profile(sys_, k, a.sample(grid), a.omega);
    }
    RVec base(2);
    base << cfg_.brusselator_a, cfg_.brusselator_b / cfg_.brusselator_a;
    auto [guess, om] = relaxation_guess(sys_, k, grid, base, 0.3, 300.0, cfg_.seed);
    return solve_profile(sys_, k, guess, om);
  }

  RunConfig cfg_;
  const CommandOptions& opt_;
  ReactionSystem sys_;
  std::optional<WaveFamily> family_;
};

// ---------------------------------------------------------------- profile, family

int cmd_profile(Context& ctx, OutputSet& out) {
  const RunConfig& c = ctx.cfg();
  WaveTrain w = ctx.wave_at(c.profile_k);
  TransversalityVerdict tv = check_transversality(w);
  CsvTable t({"k", "omega", "r0", "residual", "transversality_gap"});
  t.add_row({w.k, w.omega, max_amplitude(w), w.residual, tv.gap});
  out.write_csv("profile.csv", t);

  std::vector<std::string> head{"theta"};
  for (int i = 0; i < w.profile.dim(); ++i) head.push_back("u" + std::to_string(i));
  CsvTable s(head);
  for (int j = 0; j < w.grid().size(); ++j) {
    std::vector<double> row{w.grid().node(j)};
    for (int i = 0; i < w.profile.dim(); ++i) row.push_back(w.profile.values(j, i));
    s.add_row(row);
  }
  out.write_csv("profile_samples.csv", s);
  out.stage("profile solve", w.residual < 1e-8, "residual " + format_real(w.residual));
  out.stage("transversality", tv.simple, "kernel angle " + format_real(tv.kernel_angle));
  ctx.log() << "k = " << format_real(w.k) << "  omega = " << format_real(w.omega)
            << "  residual = " << format_real(w.residual) << "\n";
  return kExitOk;
}

int cmd_family(Context& ctx, OutputSet& out) {
  const WaveFamily& f = ctx.family();
  const bool lo = ctx.system().name() == "lambda_omega";
  CsvTable t({"k", "omega", "r0", "residual", "transversality_gap", "kernel_angle", "simple", "domega_dk",
              "omega_prime_neutral", "b"});
  double worst_res = 0.0, worst_oracle = 0.0, worst_whitham = 0.0;
  bool all_simple = true;
  for (const WaveTrain& w : f.members) {
    TransversalityVerdict tv = check_transversality(w);
    WhithamReport wr = whitham_flux_check(f, w.k);
    t.add_row({w.k, w.omega, max_amplitude(w), w.residual, tv.gap, tv.kernel_angle, tv.simple ? 1.0 : 0.0,
               wr.omega_prime_family, wr.omega_prime_evans, wr.b});
    worst_res = std::max(worst_res, w.residual);
    worst_whitham = std::max(worst_whitham, wr.difference);
    all_simple = all_simple && tv.simple;
    if (lo) {
      AnalyticWaveTrain a = analytic_wavetrain(ctx.system(), w.k);
      worst_oracle = std::max({worst_oracle, std::abs(w.omega - a.omega), std::abs(max_amplitude(w) - a.r0)});
    }
  }
  out.write_csv("family.csv", t);
  Json j;
  j["system"] = ctx.system().name();
  j["k_min"] = f.k_min();
  j["k_max"] = f.k_max();
  j["members"] = f.members.size();
  j["max_residual"] = worst_res;
  j["all_transversal"] = all_simple;
  j["max_whitham_difference"] = worst_whitham;
  if (lo) j["max_closed_form_error"] = worst_oracle;
  out.write_json("family.json", j);
  out.stage("continuation", worst_res < 1e-8, "max residual " + format_real(worst_res));
  out.stage("transversality", all_simple);
  if (lo) out.stage("closed form", worst_oracle < 1e-8, "max error " + format_real(worst_oracle));
  ctx.log() << f.members.size() << " members on [" << format_real(f.k_min()) << ", " << format_real(f.k_max())
            << "]\n";
  return kExitOk;
}

// ---------------------------------------------------------------- stability, evans

struct CrossCheck {
  double xi = 0.0;
  std::vector<EvansRoot> roots;
  std::vector<cplx> eigs;
  double distance = 0.0;
};

std::vector<CrossCheck> evans_cross_check(const WaveTrain& w, const RunConfig& c) {
  PeriodMapper pm(w);
  std::vector<CrossCheck> out;
  for (double xi : c.evans_xi) {
    if (xi <= -0.5 || xi > 0.5) throw ConfigError("evans.xi values must lie in (-1/2, 1/2]");
    CrossCheck cc;
    cc.xi = xi;
    cc.roots = evans_roots(pm, xi, c.evans_radius);
    cc.eigs = bloch_eigenvalues_in_disk(w, xi, c.evans_radius);
    cc.distance = match_multisets(cc.roots, cc.eigs);
    out.push_back(std::move(cc));
  }
  return out;
}

int root_count(const std::vector<EvansRoot>& r) {
  int n = 0;
  for (const auto& x : r) n += x.multiplicity;
  return n;
}

Json cross_check_json(const std::vector<CrossCheck>& cc, double& worst) {
  Json a = Json::array();
  worst = 0.0;
  for (const auto& c : cc) {
    a.push_back({{"xi", c.xi},
                 {"evans_roots", root_count(c.roots)},
                 {"bloch_eigenvalues", c.eigs.size()},
                 {"max_distance", number(c.distance)}});
    worst = std::isfinite(c.distance) ? std::max(worst, c.distance) : std::numeric_limits<double>::infinity();
  }
  return a;
}

int cmd_stability(Context& ctx, OutputSet& out) {
  const RunConfig& c = ctx.cfg();
  WaveTrain w = ctx.wave_at(c.profile_k);
  StabilityVerdict v = ctx.stability(w);

  CsvTable spectra({"xi", "eta", "rank", "re", "im"});
  for (double eta : eta_grid(c)) {
    for (double xi : xi_grid(c)) {
      CVec ev = assemble_bloch(w, xi, eta).eigenvalues();
      std::vector<cplx> e(ev.data(), ev.data() + ev.size());
      std::sort(e.begin(), e.end(), [](cplx a, cplx b) { return a.real() > b.real(); });
      for (int r = 0; r < std::min<int>(4, static_cast<int>(e.size())); ++r) {
        spectra.add_row({xi, eta, static_cast<double>(r), e[r].real(), e[r].imag()});
      }
    }
  }
  out.write_csv("spectra.csv", spectra);

  NeutralCurve nc = neutral_curve(w, 0.05, 11);
  CsvTable nt({"xi", "re", "im"});
  for (size_t i = 0; i < nc.xi.size(); ++i) nt.add_row({nc.xi[i], nc.lambda[i].real(), nc.lambda[i].imag()});
  out.write_csv("neutral_curve.csv", nt);

  std::vector<CrossCheck> cc = evans_cross_check(w, c);
  double worst = 0.0;
  Json j;
  j["k"] = w.k;
  j["omega"] = w.omega;
  j["stable"] = v.stable();
  j["transversal"] = v.transversal;
  j["condition_i"] = v.condition_i;
  j["condition_ii"] = v.condition_ii;
  j["c"] = v.c;
  j["zero_eigenvalue"] = v.zero_eigenvalue;
  j["axis_distance"] = v.axis_distance;
  Json fail = Json::array();
  for (auto [xi, eta] : v.failing) fail.push_back({{"xi", xi}, {"eta", eta}});
  j["failing"] = fail;
  j["neutral_curve"] = {{"c_fit", nc.c_fit}, {"b_fit", nc.b_fit}, {"omega_prime_fit", nc.omega_prime_fit}};
  j["evans_bloch"] = cross_check_json(cc, worst);
  out.write_json("stability.json", j);

  out.stage("diffusive stability", v.stable(), "c = " + format_real(v.c));
  const bool agree = worst < 1e-5;
  out.stage("evans/bloch agreement", agree, "max distance " + format_real(worst));
  ctx.log() << "verdict: " << (v.stable() ? "stable" : "unstable") << "  c = " << format_real(v.c) << "\n";
  return agree ? kExitOk : kExitCertificate;
}

int cmd_evans(Context& ctx, OutputSet& out) {
  const RunConfig& c = ctx.cfg();
  WaveTrain w = ctx.wave_at(c.profile_k);
  std::vector<CrossCheck> cc = evans_cross_check(w, c);
  CsvTable t({"xi", "source", "re", "im", "multiplicity"});
  for (const auto& x : cc) {
    for (const auto& r : x.roots) {
      t.add_row({format_real(x.xi), "evans", format_real(r.lambda.real()), format_real(r.lambda.imag()),
                 std::to_string(r.multiplicity)});
    }
    for (const auto& e : x.eigs) {
      t.add_row({format_real(x.xi), "bloch", format_real(e.real()), format_real(e.imag()), "1"});
    }
  }
  out.write_csv("evans_roots.csv", t);
  double worst = 0.0;
  Json j;
  j["k"] = w.k;
  j["radius"] = c.evans_radius;
  j["checks"] = cross_check_json(cc, worst);
  j["max_distance"] = number(worst);
  j["pass"] = worst < 1e-5;
  out.write_json("evans.json", j);
  out.stage("evans/bloch agreement", worst < 1e-5, "max distance " + format_real(worst));
  ctx.log() << "max root distance " << format_real(worst) << "\n";
  return worst < 1e-5 ? kExitOk : kExitCertificate;
}

// ---------------------------------------------------------------- symmetrizer

Json certificate_json(const SymmetrizerCertificate& c) {
  return {{"pass", c.pass},
          {"c", c.c},
          {"min_ratio", c.min_ratio},
          {"samples", c.samples.size()},
          {"worst", {{"gamma", c.worst.gamma}, {"tau", c.worst.tau}}},
          {"s_norm_max", c.s_norm_max},
          {"hermitian_defect_max", c.hermitian_defect_max},
          {"branch_ambiguous", c.branch_ambiguous}};
}

double neutral_sqrt_slope(const PeriodMapper& pm, const NeutralBlockJet& jet) {
  std::vector<double> xs, ys;
  for (double l : {1e-3, 1e-4, 1e-5}) {
    NeutralFrame fr = neutral_frame(pm.monodromy(l).m1, jet);
    Eigen::ComplexEigenSolver<CMat> es(fr.block, false);
    xs.push_back(std::log(l));
    ys.push_back(std::log(std::abs(es.eigenvalues()(0))));
  }
  return (ys[0] - ys[2]) / (xs[0] - xs[2]);
}

int cmd_symmetrizer(Context& ctx, OutputSet& out) {
  const RunConfig& c = ctx.cfg();
  ctx.guard(out, {c.profile_k});
  WaveTrain w = ctx.wave_at(c.profile_k);
  CertificateGrid grid;
  grid.radius = c.symmetrizer_radius;
  grid.n_gamma = c.symmetrizer_n_gamma;
  grid.n_tau = c.symmetrizer_n_tau;
  grid.n_medium_radius = c.symmetrizer_n_medium_radius;
  grid.n_medium_angle = c.symmetrizer_n_medium_angle;
  SymmetrizerRun run = certify_wavetrain(w, grid);
  if (c.test_tamper_symmetrizer) {
    ctx.log() << "test hook: certifying the low grid with S replaced by -S\n";
    std::swap(run.low, run.flipped);
  }
  const double r = grid.radius;
  HighFrequencyReport high = high_frequency_check(w, {2.5 * r, 10.0 * r, 40.0 * r});
  bool high_ok = std::abs(high.margin_slope - 0.5) < 0.1;
  for (const auto& p : high.points) high_ok = high_ok && p.bound > 0.0;

  Json j;
  j["k"] = w.k;
  j["omega"] = w.omega;
  j["case"] = case_name(run.jet.case_tag);
  j["neutral_rank"] = run.jet.rank;
  if (run.jet.case_tag == 1) {
    j["speed"] = run.jet.speed;
    j["b"] = run.jet.b;
  }
  double slope = kNaN;
  if (run.jet.case_tag == 2) {
    slope = neutral_sqrt_slope(PeriodMapper(w), run.jet);
    j["c0"] = run.jet.c0;
    j["sqrt_slope"] = slope;
  }
  j["low"] = certificate_json(run.low);
  j["medium"] = certificate_json(run.medium);
  Json hp = Json::array();
  for (const auto& p : high.points) {
    hp.push_back({{"lambda_abs", std::abs(p.lambda)}, {"margin", p.margin}, {"bound", p.bound}});
  }
  j["high"] = {{"pass", high_ok}, {"margin_slope", high.margin_slope}, {"bound_spread", high.bound_spread},
               {"points", hp}};
  j["negative_control"] = {{"fails_as_expected", !run.flipped.pass}, {"min_ratio", run.flipped.min_ratio}};
  const bool slope_ok = run.jet.case_tag != 2 || std::abs(slope - 0.5) < 0.05;
  const bool pass = run.low.pass && run.medium.pass && high_ok && !run.flipped.pass && slope_ok;
  j["pass"] = pass;
  out.write_json("certificate.json", j);

  out.stage("low-frequency certificate", run.low.pass, "c = " + format_real(run.low.c));
  out.stage("medium-frequency certificate", run.medium.pass, "c = " + format_real(run.medium.c));
  out.stage("high-frequency split", high_ok, "margin slope " + format_real(high.margin_slope));
  out.stage("negative control", !run.flipped.pass);
  if (run.jet.case_tag == 2) out.stage("square-root branching", slope_ok, "slope " + format_real(slope));
  ctx.log() << "case " << case_name(run.jet.case_tag) << ": low c = " << format_real(run.low.c)
            << ", medium c = " << format_real(run.medium.c) << (pass ? ", certified\n" : ", FAILED\n");
  if (!pass) {
    const SymmetrizerCertificate& bad = run.low.pass ? run.medium : run.low;
    ctx.log() << "worst point: gamma = " << format_real(bad.worst.gamma)
                  << ", tau = " << format_real(bad.worst.tau) << ", ratio = " << format_real(bad.min_ratio) << "\n";
    return kExitCertificate;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- modulation pipeline

struct Modulation {
  ModulationProfile prof;
  RVec x, k0;
  double blowup = 0.0;
  double T = 0.0;
  std::shared_ptr<ProfileMap> map;
  std::optional<ModulationField> field;
};

Modulation prepare_modulation(Context& ctx, OutputSet& out, bool need_eps) {
  const RunConfig& c = ctx.cfg();
  Modulation m;
  m.prof.q = c.modulation_q;
  m.prof.amplitude = c.modulation_amplitude;
  m.prof.width = c.modulation_width;
  m.prof.center = c.modulation_center;
  m.prof.length = c.modulation_length;
  m.x = slow_grid(m.prof.length, c.modulation_nx);
  m.k0 = m.prof.k0(m.x);
  if (need_eps) {
    for (double e : c.epsilon) {
      if (!phase_admissible(m.prof.q, m.prof.length, e)) {
        throw ConfigError("epsilon = " + format_real(e) + " fails phase quantization: q L / (2 pi eps) = " +
                          format_real(m.prof.q * m.prof.length / (2.0 * 3.14159265358979323846 * e)) +
                          " is not an integer");
      }
    }
  }
  const double klo = m.k0.minCoeff(), khi = m.k0.maxCoeff();
  if (klo <= 0.0) throw ConfigError("modulation: k0 must stay positive");
  ctx.guard(out, klo == khi ? std::vector<double>{klo} : std::vector<double>{klo, khi});

  const double lo = klo - c.modulation_k_margin, hi = khi + c.modulation_k_margin;
  const WaveFamily& fam = ctx.family();
  if (lo < fam.k_min() || hi > fam.k_max()) {
    throw ConfigError("modulation needs k in [" + format_real(lo) + ", " + format_real(hi) +
                      "], outside family [" + format_real(fam.k_min()) + ", " + format_real(fam.k_max()) + "]");
  }
  m.map = std::make_shared<ProfileMap>(fam, lo, hi, c.modulation_k_nodes, c.modulation_n_theta);
  m.blowup = blowup_time_estimate(*m.map, m.k0, m.prof.length);
  m.T = c.modulation_T > 0.0 ? c.modulation_T : 0.5 * m.blowup;
  if (!std::isfinite(m.T)) {
    throw ConfigError("modulation.T = 0 needs a finite blow-up estimate; set modulation.T explicitly");
  }
  EikonalOptions eo;
  eo.n_time = c.modulation_n_time;
  try {
    m.field = solve_eikonal(*m.map, m.k0, m.prof.length, m.T, eo);
  } catch (const EikonalBlowup& e) {
    Json d;
    d["error"] = e.what();
    d["blowup_time"] = e.time;
    d["blowup_time_estimate"] = number(m.blowup);
    d["requested_T"] = m.T;
    out.write_json("eikonal_blowup.json", d);
    out.stage("eikonal", false, "gradient blow-up at t = " + format_real(e.time));
    throw;
  }
  out.stage("eikonal", true, "T = " + format_real(m.T));
  return m;
}

Json field_json(const Modulation& m) {
  const ModulationField& f = *m.field;
  return {{"T", m.T},
          {"blowup_time_estimate", number(m.blowup)},
          {"k_range", {m.k0.minCoeff(), m.k0.maxCoeff()}},
          {"map_range", {m.map->k_lo(), m.map->k_hi()}},
          {"map_node_residual", m.map->max_node_residual()},
          {"nx", f.nx()},
          {"n_time", f.t.size()},
          {"rk_steps", f.rk_steps},
          {"eikonal_residual", f.eikonal_residual},
          {"initial_gradient", f.initial_gradient},
          {"final_gradient", f.final_gradient}};
}

int cmd_modulate(Context& ctx, OutputSet& out) {
  Modulation m = prepare_modulation(ctx, out, false);
  const ModulationField& f = *m.field;
  const int last = f.t.size() - 1;
  CsvTable t({"x", "k0", "k_final", "k_characteristic", "psi_tilde_final"});
  double char_err = 0.0;
  for (int j = 0; j < f.nx(); ++j) {
    const double kc = characteristic_k(*m.map, m.prof, m.T, f.x(j));
    char_err = std::max(char_err, std::abs(kc - f.k[last](j)));
    t.add_row({f.x(j), m.k0(j), f.k[last](j), kc, f.psi_tilde[last](j)});
  }
  out.write_csv("eikonal.csv", t);
  CsvTable h({"t", "x", "k", "psi_tilde"});
  for (int i = 0; i < f.t.size(); ++i) {
    for (int j = 0; j < f.nx(); ++j) h.add_row({f.t.point(i), f.x(j), f.k[i](j), f.psi_tilde[i](j)});
  }
  out.write_csv("eikonal_history.csv", h);
  Json j = field_json(m);
  j["characteristic_difference"] = char_err;
  out.write_json("modulation.json", j);
  out.stage("characteristics", char_err < 1e-4, "max |k - k_char| " + format_real(char_err));
  ctx.log() << "T = " << format_real(m.T) << "  blow-up estimate " << format_real(m.blowup) << "\n";
  return kExitOk;
}

ExpansionData expansion_for(const Modulation& m, int order) { return build_expansion(m.map, *m.field, order); }

Json expansion_json(const ExpansionData& e) {
  return {{"order", e.order},
          {"n_theta", e.n_theta},
          {"consistency", number_list(e.consistency)},
          {"solvability", number_list(e.solvability)},
          {"source_norm", number_list(e.source_norm)}};
}

std::vector<double> sorted_eps(const RunConfig& c) {
  std::vector<double> e = c.epsilon;
  std::sort(e.begin(), e.end(), std::greater<>());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  return e;
}

Json residual_json(const ResidualReport& r) {
  Json pts = Json::array();
  for (int p : r.points) pts.push_back(p);
  return {{"m", r.m},       {"s", r.s},         {"eps", number_list(r.eps)},
          {"l2", number_list(r.l2)},  {"hs", number_list(r.hs)}, {"points", pts},
          {"slope_l2", number(r.slope_l2)}, {"slope_hs", number(r.slope_hs)}};
}

int cmd_expand(Context& ctx, OutputSet& out) {
  const RunConfig& c = ctx.cfg();
  Modulation m = prepare_modulation(ctx, out, true);
  ExpansionData e = expansion_for(m, c.expansion_order);
  const std::vector<double> eps = sorted_eps(c);
  ResidualReport r = residual_order_study(e, eps, c.norm_s);

  CsvTable rt({"eps", "points", "residual_l2", "residual_hs"});
  for (size_t i = 0; i < r.eps.size(); ++i) rt.add_row({r.eps[i], double(r.points[i]), r.l2[i], r.hs[i]});
  out.write_csv("residual.csv", rt);

  const double e_min = eps.back();
  AnsatzEval a = evaluate_ansatz(e, e_min, 0.0, fine_grid_size(e, e_min));
  std::vector<std::string> head{"x"};
  for (int i = 0; i < a.u.cols(); ++i) head.push_back("u" + std::to_string(i));
  CsvTable at(head);
  for (int j = 0; j < a.x.size(); ++j) {
    std::vector<double> row{a.x(j)};
    for (int i = 0; i < a.u.cols(); ++i) row.push_back(a.u(j, i));
    at.add_row(row);
  }
  out.write_csv("ansatz_initial.csv", at);

  Json j;
  j["modulation"] = field_json(m);
  j["expansion"] = expansion_json(e);
  j["residual"] = residual_json(r);
  j["ansatz_eps"] = e_min;
  out.write_json("expansion.json", j);
  double cons = 0.0;
  for (double x : e.consistency) cons = std::max(cons, x);
  out.stage("cascade consistency", cons < 1e-8, "max " + format_real(cons));
  ctx.log() << "order " << e.order << " expansion, residual slope "
            << (std::isfinite(r.slope_hs) ? format_real(r.slope_hs) : std::string("n/a (fewer than 3 eps)")) << "\n";
  return kExitOk;
}

StepperSettings stepper(const std::string& scheme, double dt) { return {parse_scheme(scheme), dt}; }

int cmd_simulate(Context& ctx, OutputSet& out) {
  const RunConfig& c = ctx.cfg();
  Modulation m = prepare_modulation(ctx, out, true);
  ExpansionData e = expansion_for(m, c.expansion_order);
  const std::vector<double> times = linspace(0.0, m.T, c.simulate_n_snapshots);
  Json runs = Json::array();
  for (double eps : sorted_eps(c)) {
    const int n = fine_grid_size(e, eps, c.simulate_points_per_wavelength);
    AnsatzEval a0 = evaluate_ansatz(e, eps, 0.0, n);
    SimulationRun run =
        simulate_direct(ctx.system(), eps, m.prof.length, a0.u, times, stepper(c.simulate_scheme, c.simulate_dt));
    const int dim = static_cast<int>(a0.u.cols());
    std::vector<std::string> head{"t", "x"};
    for (int i = 0; i < dim; ++i) head.push_back("u" + std::to_string(i));
    for (int i = 0; i < dim; ++i) head.push_back("ansatz" + std::to_string(i));
    CsvTable st(head);
    Json norms = Json::array();
    for (size_t s = 0; s < run.times.size(); ++s) {
      AnsatzEval a = evaluate_ansatz(e, eps, run.times[s], n);
      ErrorNorms en = error_norms(run.snapshots[s], a.u, m.prof.length, eps, c.norm_s);
      norms.push_back({{"t", run.times[s]}, {"l2", en.l2}, {"linf", en.linf}, {"hs", en.hs}});
      for (int j = 0; j < n; ++j) {
        std::vector<double> row{run.times[s], a.x(j)};
        for (int i = 0; i < dim; ++i) row.push_back(run.snapshots[s](j, i));
        for (int i = 0; i < dim; ++i) row.push_back(a.u(j, i));
        st.add_row(row);
      }
    }
    const std::string name = "snapshots_eps" + format_real(eps) + ".csv";
    out.write_csv(name, st);
    runs.push_back({{"eps", eps},
                    {"nx", run.nx},
                    {"scheme", scheme_name(run.scheme)},
                    {"dt", run.dt},
                    {"steps", run.steps},
                    {"file", name},
                    {"errors", norms}});
    ctx.log() << "eps = " << format_real(eps) << ": nx = " << run.nx << ", " << run.steps << " steps\n";
  }
  Json j;
  j["modulation"] = field_json(m);
  j["order"] = e.order;
  j["norm_s"] = c.norm_s;
  j["runs"] = runs;
  out.write_json("simulate.json", j);
  out.stage("direct simulation", true);
  return kExitOk;
}

// ---------------------------------------------------------------- validate

int cmd_validate(Context& ctx, OutputSet& out) {
  const RunConfig& c = ctx.cfg();
  const int order = c.expansion_order;
  Modulation m = prepare_modulation(ctx, out, true);
  ExpansionData e = expansion_for(m, order + 1);
  const std::vector<double> eps = sorted_eps(c);
  const bool slopes = eps.size() >= 3;

  ResidualReport res = residual_order_study(e, eps, c.norm_s, 5, order);
  StudyOptions so;
  so.s = c.norm_s;
  so.n_snapshots = c.simulate_n_snapshots;
  so.points_per_wavelength = c.simulate_points_per_wavelength;
  so.stepper = stepper(c.validate_scheme, c.simulate_dt);
  ConvergenceReport conv = convergence_study(e, order, eps, so);

  CsvTable t({"eps", "residual_hs", "residual_l2", "error_hs", "error_linf", "error_quad", "error_hs_next"});
  Json entries = Json::array();
  bool zero_start = true;
  for (size_t i = 0; i < eps.size(); ++i) {
    const ConvergenceEntry& en = conv.entries[i];
    t.add_row({eps[i], res.hs[i], res.l2[i], en.sup_hs, en.sup_linf, en.quad_hs, en.sup_hs_next});
    zero_start = zero_start && en.initial_error == 0.0;
    entries.push_back({{"eps", en.eps},
                       {"nx", en.nx},
                       {"dt", en.dt},
                       {"initial_error", en.initial_error},
                       {"sup_hs", en.sup_hs},
                       {"sup_linf", en.sup_linf},
                       {"quad_hs", en.quad_hs},
                       {"sup_hs_next", en.sup_hs_next},
                       {"sup_linf_next", en.sup_linf_next}});
  }
  out.write_csv("validate.csv", t);
  out.write("validate.gp", gnuplot_loglog_script("validate.csv", "validate.png",
                                                 {"residual_hs", "error_hs", "error_hs_next"}, "eps", "norm"));

  const double res_tol = order == 0 ? 0.15 : 0.2;
  Json targets = Json::object();
  bool pass = zero_start;
  out.stage("prescribed data", zero_start, "error at t = 0 is exactly 0");
  if (slopes) {
    const bool r_ok = std::abs(res.slope_hs - (order + 1)) < res_tol;
    const bool c_ok = conv.slope_hs >= order - 0.2;
    const bool n_ok = conv.has_next && conv.slope_hs_next >= order + 1 - 0.3;
    targets["residual_slope"] = {{"value", res.slope_hs}, {"target", order + 1}, {"tolerance", res_tol},
                                 {"pass", r_ok}};
    targets["error_slope"] = {{"value", conv.slope_hs}, {"minimum", order - 0.2}, {"pass", c_ok}};
    targets["improved_slope"] = {{"value", number(conv.slope_hs_next)}, {"minimum", order + 1 - 0.3},
                                 {"pass", n_ok}};
    out.stage("residual slope", r_ok, format_real(res.slope_hs));
    out.stage("error slope", c_ok, format_real(conv.slope_hs));
    out.stage("improved error slope", n_ok, format_real(conv.slope_hs_next));
    pass = pass && r_ok && c_ok && n_ok;
  } else {
    out.stage("slopes", true, "skipped: fewer than 3 eps values, norms only");
  }

  Json attraction = nullptr;
  if (eps.size() >= 2) {
    attraction = Json::array();
    std::vector<double> consts;
    for (double ee : {eps[eps.size() - 2], eps.back()}) {
      LayerReport lr = initial_layer_probe(e, order, ee, std::pow(ee, order + 1), c.seed, so);
      consts.push_back(lr.constant);
      attraction.push_back({{"eps", ee},
                            {"delta", lr.delta},
                            {"perturbation_hs", lr.perturbation_hs},
                            {"layer_growth", lr.layer_growth},
                            {"final_difference", lr.final_difference},
                            {"final_distance", lr.final_distance},
                            {"sup_distance", lr.sup_distance},
                            {"constant", lr.constant}});
    }
    const double ratio = consts[0] / consts[1];
    const bool a_ok = ratio >= 1.0 / 3.0 && ratio <= 3.0;
    targets["attraction_ratio"] = {{"value", ratio}, {"range", {1.0 / 3.0, 3.0}}, {"pass", a_ok}};
    out.stage("attraction", a_ok, "constant ratio " + format_real(ratio));
    pass = pass && a_ok;
  }

  Json j;
  j["modulation"] = field_json(m);
  j["expansion"] = expansion_json(e);
  j["m"] = order;
  j["s"] = c.norm_s;
  j["scheme"] = scheme_name(conv.scheme);
  j["residual"] = residual_json(res);
  j["convergence"] = {{"entries", entries},
                      {"slope_hs", number(slopes ? conv.slope_hs : kNaN)},
                      {"slope_linf", number(slopes ? conv.slope_linf : kNaN)},
                      {"slope_quad", number(slopes ? conv.slope_quad : kNaN)},
                      {"slope_hs_next", number(slopes ? conv.slope_hs_next : kNaN)}};
  j["attraction"] = attraction;
  j["targets"] = targets;
  j["pass"] = pass;
  out.write_json("validate.json", j);

  if (slopes) {
    ctx.log() << "residual slope " << format_real(res.slope_hs) << ", error slope " << format_real(conv.slope_hs)
              << ", improved slope " << format_real(conv.slope_hs_next) << "\n";
  } else {
    ctx.log() << "norms only (" << eps.size() << " eps value" << (eps.size() == 1 ? "" : "s") << ")\n";
  }
  ctx.log() << (pass ? "validation passed\n" : "validation FAILED\n");
  return pass ? kExitOk : kExitCertificate;
}

using Handler = int (*)(Context&, OutputSet&);

Handler find_handler(const std::string& name) {
  if (name == "profile") return cmd_profile;
  if (name == "family") return cmd_family;
  if (name == "stability") return cmd_stability;
  if (name == "evans") return cmd_evans;
  if (name == "symmetrizer") return cmd_symmetrizer;
  if (name == "modulate") return cmd_modulate;
  if (name == "expand") return cmd_expand;
  if (name == "simulate") return cmd_simulate;
  if (name == "validate") return cmd_validate;
  return nullptr;
}

RunConfig resolve_config(const CommandOptions& opt) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig{} : load_config(opt.config_path);
  if (opt.epsilon) set_config_value(cfg, "epsilon", *opt.epsilon);
  if (opt.order) set_config_value(cfg, "expansion.order", std::to_string(*opt.order));
  if (opt.seed) set_config_value(cfg, "seed", std::to_string(*opt.seed));
  if (opt.out_dir) set_config_value(cfg, "output.dir", *opt.out_dir);
  for (const auto& [k, v] : opt.overrides) set_config_value(cfg, k, v);
  validate_config(cfg);
  return cfg;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"profile",  "family", "stability", "evans",   "symmetrizer",
                                              "modulate", "expand", "simulate",  "validate"};
  return names;
}

int run_command(const std::string& name, const CommandOptions& opt) {
  std::ostream& err = *opt.err;
  Handler h = find_handler(name);
  if (!h) {
    err << "error: unknown command '" << name << "'\n";
    return kExitConfig;
  }
  RunConfig cfg;
  try {
    cfg = resolve_config(opt);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::optional<OutputSet> out;
  int code = kExitError;
  try {
    Context ctx(cfg, opt);
    out.emplace(cfg.output_dir, name);
    code = h(ctx, *out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    code = kExitConfig;
  } catch (const KRangeError& e) {
    err << "config error: " << e.what() << "\n";
    code = kExitConfig;
  } catch (const GuardRefusal& e) {
    err << "refused: " << e.what() << "\n";
    code = kExitGuard;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = kExitError;
  }
  if (out) {
    try {
      out->finish(cfg, opt.command_line, code);
    } catch (const std::exception& e) {
      err << "error: cannot write manifest: " << e.what() << "\n";
      if (code == kExitOk) code = kExitError;
    }
  }
  return code;
}

}  // namespace hfw
