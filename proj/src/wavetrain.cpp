#include "hfw/wavetrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "hfw/fredholm.hpp"

namespace hfw {

namespace {

double l2_norm(const PeriodicField& f) { return std::sqrt(inner(f, f)); }

struct NewtonState {
  RVec residual;  // profile equation, flattened, followed by the phase condition
  double max_profile_residual = 0.0;
  double phase = 0.0;
};

NewtonState evaluate(const ReactionSystem& sys, double k, double omega, const PeriodicField& p,
                     const PeriodicField& p_ref, const PeriodicField& dp_ref) {
  NewtonState st;
  PeriodicField r = profile_residual(sys, k, omega, p);
  const int m = static_cast<int>(r.values.size());
  st.residual.resize(m + 1);
  st.residual.head(m) = r.flat();
  PeriodicField diff(p.grid, RMat(p.values - p_ref.values));
  st.phase = inner(diff, dp_ref);
  st.residual(m) = st.phase;
  st.max_profile_residual = r.values.cwiseAbs().maxCoeff();
  return st;
}

int nearest_index(const std::vector<double>& ks, double k) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(ks.size()); ++i) {
    if (std::abs(ks[i] - k) < std::abs(ks[best] - k)) best = i;
  }
  return best;
}

// Indices of the (up to) five samples nearest k, contiguous and sorted.
std::pair<int, int> stencil(const std::vector<double>& ks, double k) {
  const int n = static_cast<int>(ks.size());
  const int width = std::min(5, n);
  int c = nearest_index(ks, k);
  int lo = std::clamp(c - width / 2, 0, n - width);
  return {lo, width};
}

// Derivatives at k of the polynomial through the points (Fornberg-free: solve Vandermonde
// in shifted, scaled coordinates).
RVec local_poly(const std::vector<double>& ks, const std::vector<double>& vs, int lo, int width, double k) {
  double scale = std::max(1e-12, ks[lo + width - 1] - ks[lo]);
  RMat v(width, width);
  RVec y(width);
  for (int i = 0; i < width; ++i) {
    double s = (ks[lo + i] - k) / scale;
    for (int p = 0; p < width; ++p) v(i, p) = std::pow(s, p);
    y(i) = vs[lo + i];
  }
  RVec c = v.fullPivLu().solve(y);
  for (int p = 0; p < width; ++p) c(p) /= std::pow(scale, p);
  return c;  // Taylor coefficients at k
}

}  // namespace

WaveTrain solve_profile(const ReactionSystem& sys, double k, const PeriodicField& guess, double omega_guess,
                        const std::optional<PeriodicField>& p_ref_opt, const NewtonOptions& opt) {
  if (k == 0.0) throw std::invalid_argument("solve_profile: k must be nonzero");
  if (guess.dim() != sys.dim()) throw std::invalid_argument("solve_profile: guess dimension mismatch");
  const TorusGrid& g = guess.grid;
  if (l2_norm(fourier_diff(guess, 1)) < 1e-6) {
    throw TrivialSolutionError("solve_profile: guess is constant in theta (trivial solution)");
  }
  PeriodicField p_ref = p_ref_opt.value_or(guess);
  PeriodicField dp_ref = fourier_diff(p_ref, 1);
  PeriodicField p = guess;
  double omega = omega_guess;
  const int m = g.size() * sys.dim();
  const double w = g.spacing();
  int it = 0;
  NewtonState st = evaluate(sys, k, omega, p, p_ref, dp_ref);
  while (!(st.max_profile_residual < opt.tol && std::abs(st.phase) < 1e-12)) {
    if (it >= opt.max_iter || !st.residual.allFinite()) {
      throw SolverError("solve_profile: Newton did not converge (residual " +
                        std::to_string(st.max_profile_residual) + ")");
    }
    RMat jac = RMat::Zero(m + 1, m + 1);
    jac.topLeftCorner(m, m) = linearization_matrix(sys, k, omega, p);
    jac.block(0, m, m, 1) = fourier_diff(p, 1).flat();
    jac.block(m, 0, 1, m) = w * dp_ref.flat().transpose();
    RVec delta = jac.partialPivLu().solve(-st.residual);
    p = PeriodicField::from_flat(g, RVec(p.flat() + delta.head(m)), sys.dim());
    omega += delta(m);
    ++it;
    st = evaluate(sys, k, omega, p, p_ref, dp_ref);
  }
  if (l2_norm(fourier_diff(p, 1)) < 1e-6) {
    throw TrivialSolutionError("solve_profile: Newton converged to a constant state");
  }
  WaveTrain out{sys, k, omega, p, st.max_profile_residual, st.phase, it};
  return out;
}

std::pair<PeriodicField, double> relaxation_guess(const ReactionSystem& sys, double k, const TorusGrid& grid,
                                                  const RVec& base_state, double perturbation, double t_final,
                                                  unsigned seed) {
  const int n = grid.size();
  const int d = sys.dim();
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ud(0.0, 2 * std::numbers::pi);
  PeriodicField v(grid, d);
  for (int c = 0; c < d; ++c) {
    double phase = ud(rng);
    for (int j = 0; j < n; ++j) v.values(j, c) = base_state(c) + perturbation * std::cos(grid.node(j) + phase);
  }
  const double dt = 0.01;
  const int steps = static_cast<int>(std::ceil(t_final / dt));
  RVec denom(n);
  for (int j = 0; j < n; ++j) {
    double q = wavenumber(j, n);
    denom(j) = 1.0 + dt * k * k * q * q;
  }
  PeriodicField prev = v;
  for (int s = 0; s < steps; ++s) {
    prev = v;
    Eigen::ArrayXXd fv = sys.f_rows(v.values.array());
    CMat rhs = dft_columns((v.values - dt * fv.matrix()).cast<cplx>());
    for (int c = 0; c < d; ++c) rhs.col(c) = rhs.col(c).cwiseQuotient(denom.cast<cplx>());
    v.values = idft_columns(rhs).real();
    if (!v.values.allFinite()) throw SolverError("relaxation_guess: blow-up");
  }
  PeriodicField vt(grid, RMat((v.values - prev.values) / dt));
  PeriodicField vth = fourier_diff(v, 1);
  double den = inner(vth, vth);
  if (den < 1e-12) throw TrivialSolutionError("relaxation_guess: relaxed to a constant state");
  return {v, inner(vt, vth) / den};
}

double WaveFamily::omega_at(double k) const {
  int idx = nearest_index(k_samples, k);
  if (k_samples[idx] == k) return members[idx].omega;
  std::vector<double> om;
  for (const auto& m : members) om.push_back(m.omega);
  auto [lo, width] = stencil(k_samples, k);
  return local_poly(k_samples, om, lo, width, k)(0);
}

const WaveTrain& WaveFamily::nearest(double k) const { return members[nearest_index(k_samples, k)]; }

WaveFamily continue_family(const WaveTrain& start, double k_min, double k_max, int n_steps, const NewtonOptions& opt) {
  if (!(k_min > 0.0) || !(k_max > k_min)) throw std::invalid_argument("continue_family: need 0 < k_min < k_max");
  if (n_steps < 1) throw std::invalid_argument("continue_family: n_steps must be >= 1");
  const double tol_k = 1e-12 * std::max(1.0, k_max);
  bool upward;
  if (std::abs(start.k - k_min) <= tol_k) {
    upward = true;
  } else if (std::abs(start.k - k_max) <= tol_k) {
    upward = false;
  } else {
    throw std::invalid_argument("continue_family: start must sit at an endpoint");
  }
  const double nominal = (k_max - k_min) / n_steps;
  const double target_end = upward ? k_max : k_min;
  std::vector<WaveTrain> path{start};
  int done = 0;  // nominal targets reached
  double step = nominal;
  while (done < n_steps) {
    const WaveTrain& last = path.back();
    double next_target = upward ? k_min + (done + 1) * nominal : k_max - (done + 1) * nominal;
    if (done + 1 == n_steps) next_target = target_end;
    double remaining = std::abs(next_target - last.k);
    double h = std::min(step, remaining);
    double k_try = last.k + (upward ? h : -h);
    if (remaining - h < 1e-14) k_try = next_target;
    try {
      WaveTrain w = solve_profile(last.system, k_try, last.profile, last.omega, last.profile, opt);
      double jump = (w.profile.values - last.profile.values).cwiseAbs().maxCoeff();
      if (jump >= 0.2) throw SolverError("continuation step too large");
      path.push_back(std::move(w));
      if (k_try == next_target) {
        ++done;
        step = nominal;
      }
    } catch (const SolverError&) {
      step *= 0.5;
      if (step < 1e-5) throw ContinuationError("continue_family: step underflow (possible fold)", last.k);
    }
  }
  if (!upward) std::reverse(path.begin(), path.end());
  WaveFamily fam;
  for (auto& w : path) {
    fam.k_samples.push_back(w.k);
    fam.members.push_back(std::move(w));
  }
  return fam;
}

OmegaDerivatives omega_derivatives(const WaveFamily& family, double k) {
  if (k < family.k_min() || k > family.k_max()) throw std::out_of_range("omega_derivatives: k outside family range");
  if (family.k_samples.size() < 5) throw std::invalid_argument("omega_derivatives: need at least 5 samples");
  std::vector<double> om;
  for (const auto& m : family.members) om.push_back(m.omega);
  auto [lo, width] = stencil(family.k_samples, k);
  RVec c = local_poly(family.k_samples, om, lo, width, k);
  return {c(1), 2.0 * c(2)};
}

TransversalityVerdict transversality_from_matrix(const RMat& op, const RVec& expected_kernel) {
  Eigen::EigenSolver<RMat> es(op, true);
  const int m = static_cast<int>(op.rows());
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return std::abs(es.eigenvalues()(a)) < std::abs(es.eigenvalues()(b)); });
  TransversalityVerdict v;
  v.zero_eig = es.eigenvalues()(order[0]);
  v.gap = m > 1 ? std::abs(es.eigenvalues()(order[1])) : std::numeric_limits<double>::infinity();
  v.simple = std::abs(v.zero_eig) < 1e-7 && v.gap > 1e-3;
  if (expected_kernel.size() == m) {
    // Angle from the component orthogonal to the expected kernel (acos is inaccurate near 0).
    CVec e = es.eigenvectors().col(order[0]);
    cplx coef = expected_kernel.cast<cplx>().dot(e) / expected_kernel.squaredNorm();
    double perp = (e - coef * expected_kernel.cast<cplx>()).norm() / e.norm();
    v.kernel_angle = std::asin(std::min(1.0, perp));
  }
  return v;
}

TransversalityVerdict check_transversality(const WaveTrain& w) {
  LinearizedOperator op = assemble_L(w);
  return transversality_from_matrix(op.matrix, op.dp);
}

}  // namespace hfw
