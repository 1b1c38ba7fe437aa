#include "hfw/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <tuple>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace hfw {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_finite(const CMat& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string(what) + ": non-finite matrix entries");
}

// Bartels-Stewart for upper triangular A, B: A X - X B = C.
CMat triangular_sylvester(const CMat& a, const CMat& b, const CMat& c) {
  const int p = static_cast<int>(a.rows());
  const int q = static_cast<int>(b.rows());
  CMat x = CMat::Zero(p, q);
  for (int j = 0; j < q; ++j) {
    CVec rhs = c.col(j);
    for (int i = 0; i < j; ++i) rhs += x.col(i) * b(i, j);
    CMat shifted = a - b(j, j) * CMat::Identity(p, p);
    for (int i = 0; i < p; ++i) {
      if (std::abs(shifted(i, i)) == 0.0) throw NumericalError("sylvester: common eigenvalue");
    }
    x.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
  }
  return x;
}

// Swap adjacent diagonal entries k, k+1 of the upper triangular t, updating u (M = u t u^*).
void swap_adjacent(CMat& t, CMat& u, int k) {
  cplx a = t(k, k), b = t(k + 1, k + 1), off = t(k, k + 1);
  Eigen::Vector2cd v(off, b - a);
  double nv = v.norm();
  if (nv == 0.0) {
    v = Eigen::Vector2cd(0.0, 1.0);
  } else {
    v /= nv;
  }
  Eigen::Matrix2cd g;
  g.col(0) = v;
  g.col(1) = Eigen::Vector2cd(-std::conj(v(1)), std::conj(v(0)));
  const int n = static_cast<int>(t.rows());
  t.middleRows(k, 2) = (g.adjoint() * t.middleRows(k, 2)).eval();
  t.middleCols(k, 2) = (t.middleCols(k, 2) * g).eval();
  u.middleCols(k, 2) = (u.middleCols(k, 2) * g).eval();
  t(k + 1, k) = 0.0;
  for (int i = k + 2; i < n; ++i) {
    t(i, k) = 0.0;
    t(i, k + 1) = 0.0;
  }
}

struct SlotLabel {
  int key;
  cplx value;
  int index;
};

bool label_less(const SlotLabel& x, const SlotLabel& y) {
  return std::make_tuple(x.key, x.value.real(), x.value.imag(), x.index) <
         std::make_tuple(y.key, y.value.real(), y.value.imag(), y.index);
}

// Reduces a block upper triangular matrix to block diagonal form: returns Y (block unit
// upper triangular) with Y^{-1} B Y = blockdiag.
CMat block_diagonalizer(const CMat& bmat, const std::vector<int>& sizes, bool triangular) {
  const int n = static_cast<int>(bmat.rows());
  CMat work = bmat;
  CMat y = CMat::Identity(n, n);
  int start = 0;
  for (size_t g = 0; g + 1 < sizes.size(); ++g) {
    const int p = sizes[g];
    const int q = n - start - p;
    CMat b11 = work.block(start, start, p, p);
    CMat b22 = work.block(start + p, start + p, q, q);
    CMat b12 = work.block(start, start + p, p, q);
    CMat x = triangular ? triangular_sylvester(b11, b22, -b12) : sylvester_solve(b11, b22, -b12);
    // Y_g = I + X in the (g, rest) block; Y_g^{-1} = I - X there.
    CMat yg = CMat::Identity(n, n);
    yg.block(start, start + p, p, q) = x;
    CMat yg_inv = CMat::Identity(n, n);
    yg_inv.block(start, start + p, p, q) = -x;
    work = yg_inv * work * yg;
    work.block(start, start + p, p, q).setZero();
    y = y * yg;
    start += p;
  }
  return y;
}

CMat block_unit_upper_inverse(const CMat& y) {
  const int n = static_cast<int>(y.rows());
  return y.triangularView<Eigen::Upper>().solve(CMat::Identity(n, n));
}

CMat blockdiag(const std::vector<CMat>& blocks) {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.rows());
  CMat out = CMat::Zero(n, n);
  int s = 0;
  for (const auto& b : blocks) {
    const int m = static_cast<int>(b.rows());
    out.block(s, s, m, m) = b;
    s += m;
  }
  return out;
}

cplx principal_log(cplx z) {
  if (z.imag() == 0.0) z = cplx(z.real(), 0.0);  // signed zero: -1 - 0i maps to +i pi
  return std::log(z);
}

struct WorkFrame {
  CMat q;
  CMat r;
};

// One period of RK4 on an orthonormal frame, re-orthonormalized every few steps.
WorkFrame sweep(const std::vector<CMat>& samples, int steps, const CMat& q_start) {
  const double h = kTwoPi / steps;
  const int m = static_cast<int>(q_start.rows());
  const int interval = 8;
  CMat q = q_start;
  CMat r_acc = CMat::Identity(m, m);
  auto orthonormalize = [&]() {
    Eigen::HouseholderQR<CMat> qr(q);
    CMat qq = qr.householderQ() * CMat::Identity(m, m);
    CMat rr = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < m; ++j) {
      cplx d = rr(j, j);
      double ad = std::abs(d);
      cplx phase = ad > 0.0 ? d / ad : cplx(1.0, 0.0);
      qq.col(j) *= phase;
      rr.row(j) *= std::conj(phase);
    }
    q = qq;
    r_acc = rr * r_acc;
  };
  for (int s = 0; s < steps; ++s) {
    const CMat& a0 = samples[2 * s];
    const CMat& ah = samples[2 * s + 1];
    const CMat& a1 = samples[2 * s + 2];
    CMat k1 = a0 * q;
    CMat k2 = ah * (q + 0.5 * h * k1);
    CMat k3 = ah * (q + 0.5 * h * k2);
    CMat k4 = a1 * (q + h * k3);
    q += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if ((s + 1) % interval == 0 || s + 1 == steps) orthonormalize();
  }
  return {q, r_acc};
}

std::vector<CMat> sample_half_steps(const MatrixFunction& a, int steps) {
  std::vector<CMat> samples(2 * steps + 1);
  const double h = kTwoPi / steps;
  for (int j = 0; j <= 2 * steps; ++j) {
    samples[j] = a(0.5 * h * j);
  }
  return samples;
}

}  // namespace

CMat integrate_linear_ode(const MatrixFunction& a, double theta0, double theta1, int steps) {
  if (steps < 1) throw std::invalid_argument("integrate_linear_ode: steps must be positive");
  const double h = (theta1 - theta0) / steps;
  CMat a0 = a(theta0);
  require_finite(a0, "integrate_linear_ode");
  const int m = static_cast<int>(a0.rows());
  CMat x = CMat::Identity(m, m);
  for (int s = 0; s < steps; ++s) {
    double t = theta0 + s * h;
    CMat ah = a(t + 0.5 * h);
    CMat a1 = a(t + h);
    require_finite(ah, "integrate_linear_ode");
    require_finite(a1, "integrate_linear_ode");
    CMat k1 = a0 * x;
    CMat k2 = ah * (x + 0.5 * h * k1);
    CMat k3 = ah * (x + 0.5 * h * k2);
    CMat k4 = a1 * (x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    a0 = std::move(a1);
  }
  return x;
}

CMat FactoredPeriodMap::dense() const { return basis * upper * basis.adjoint(); }

cplx FactoredPeriodMap::det_shifted(cplx z) const {
  cplx d = 1.0;
  int s = 0;
  for (int b : blocks) {
    CMat blk = upper.block(s, s, b, b) - z * CMat::Identity(b, b);
    d *= blk.determinant();
    s += b;
  }
  return d;
}

double FactoredPeriodMap::log_abs_det() const {
  double acc = 0.0;
  int s = 0;
  for (int b : blocks) {
    acc += std::log(std::abs(upper.block(s, s, b, b).determinant()));
    s += b;
  }
  return acc;
}

std::vector<cplx> FactoredPeriodMap::multipliers() const {
  std::vector<cplx> out;
  int s = 0;
  for (int b : blocks) {
    Eigen::ComplexEigenSolver<CMat> es(upper.block(s, s, b, b), false);
    for (int i = 0; i < b; ++i) out.push_back(es.eigenvalues()(i));
    s += b;
  }
  return out;
}

FactoredPeriodMap factored_period_map(const std::vector<CMat>& samples, int steps, double group_gap,
                                      int max_periods) {
  if (steps < 1 || static_cast<int>(samples.size()) != 2 * steps + 1) {
    throw std::invalid_argument("factored_period_map: need 2 * steps + 1 half-step samples");
  }
  for (const auto& a : samples) require_finite(a, "period map coefficient");
  const int m = static_cast<int>(samples.front().rows());
  CMat q_start = CMat::Identity(m, m);
  FactoredPeriodMap best;
  double best_err = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  for (int period = 1; period <= max_periods; ++period) {
    WorkFrame wf = sweep(samples, steps, q_start);
    RVec growth(m);
    for (int j = 0; j < m; ++j) growth(j) = std::log(std::abs(wf.r(j, j))) / kTwoPi;
    std::vector<int> sizes;
    int run = 1;
    for (int j = 0; j + 1 < m; ++j) {
      if (growth(j) - growth(j + 1) > group_gap) {
        sizes.push_back(run);
        run = 1;
      } else {
        ++run;
      }
    }
    sizes.push_back(run);
    CMat z = q_start.adjoint() * wf.q;
    double err = 0.0;
    int s = 0;
    for (size_t g = 0; g + 1 < sizes.size(); ++g) {
      s += sizes[g];
      err = std::max(err, z.block(s, 0, m - s, s).norm());
    }
    // Strictly lower blocks of z vanish for converged subspaces; dropping them before the
    // product keeps huge entries of r from leaking rounding noise into lower blocks.
    CMat zb = z;
    s = 0;
    for (size_t g = 0; g + 1 < sizes.size(); ++g) {
      s += sizes[g];
      zb.block(s, 0, m - s, s).setZero();
    }
    CMat upper = zb * wf.r;
    FactoredPeriodMap cur{q_start, upper, sizes, growth, period};
    if (err < best_err * 0.5) {
      best_err = err;
      best = cur;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (err < 1e-12 || (since_improvement >= 4 && best_err < 1e-8)) return best;
    q_start = wf.q;
  }
  if (best_err < 1e-8) return best;
  throw NumericalError("factored_period_map: invariant subspaces did not converge");
}

FactoredPeriodMap factored_period_map(const MatrixFunction& a, int steps, double group_gap, int max_periods) {
  if (steps < 1) throw std::invalid_argument("factored_period_map: steps must be positive");
  return factored_period_map(sample_half_steps(a, steps), steps, group_gap, max_periods);
}

CMat sylvester_solve(const CMat& a, const CMat& b, const CMat& c) {
  Eigen::ComplexSchur<CMat> sa(a), sb(b);
  CMat ua = sa.matrixU(), ta = sa.matrixT();
  CMat ub = sb.matrixU(), tb = sb.matrixT();
  CMat y = triangular_sylvester(ta, tb, ua.adjoint() * c * ub);
  return ua * y * ub.adjoint();
}

BlockDecomposition block_decompose(const CMat& m, const std::function<int(cplx, int)>& key) {
  require_finite(m, "block_decompose");
  const int n = static_cast<int>(m.rows());
  BlockDecomposition out;
  if (n == 0) return out;
  Eigen::ComplexSchur<CMat> cs(m);
  CMat u = cs.matrixU();
  CMat t = cs.matrixT();
  std::vector<SlotLabel> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = {key(t(i, i), i), t(i, i), i};
  bool swapped = true;
  while (swapped) {
    swapped = false;
    for (int i = 0; i + 1 < n; ++i) {
      if (label_less(labels[i + 1], labels[i])) {
        swap_adjacent(t, u, i);
        std::swap(labels[i], labels[i + 1]);
        swapped = true;
      }
    }
  }
  std::vector<int> sizes;
  for (int i = 0; i < n; ++i) {
    if (i == 0 || labels[i].key != labels[i - 1].key) {
      sizes.push_back(1);
      out.keys.push_back(labels[i].key);
      out.eigenvalues.emplace_back();
    } else {
      ++sizes.back();
    }
    out.eigenvalues.back().push_back(labels[i].value);
  }
  CMat y = block_diagonalizer(t, sizes, true);
  CMat y_inv = block_unit_upper_inverse(y);
  CMat d = y_inv * t * y;
  int s = 0;
  for (int sz : sizes) {
    out.blocks.push_back(d.block(s, s, sz, sz));
    s += sz;
  }
  out.basis = u * y;
  out.basis_inv = y_inv * u.adjoint();
  return out;
}

LogResult matrix_log_details(const CMat& x, bool neutral_hint) {
  require_finite(x, "matrix_log_normalized");
  const int n = static_cast<int>(x.rows());
  Eigen::ComplexEigenSolver<CMat> es(x, false);
  CVec rho = es.eigenvalues();
  double scale = std::max(1.0, x.norm());
  for (int i = 0; i < n; ++i) {
    if (std::abs(rho(i)) <= 1e-300 * scale) throw NumericalError("matrix_log_normalized: singular matrix");
  }
  // Union-find clusters over multipliers.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int i) { return parent[i] == i ? i : parent[i] = find(parent[i]); };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double r = std::max(std::abs(rho(i)), std::abs(rho(j)));
      if (std::abs(rho(i) - rho(j)) < std::max(1e-8, 0.05 * r)) parent[find(i)] = find(j);
    }
  }
  // Cluster key by matching against the solver's eigenvalue list.
  auto key = [&](cplx v, int) {
    int best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      double d = std::abs(rho(i) - v);
      if (d < dist) {
        dist = d;
        best = i;
      }
    }
    return find(best);
  };
  BlockDecomposition bd = block_decompose(x, key);
  LogResult out;
  std::vector<CMat> logs;
  for (size_t g = 0; g < bd.blocks.size(); ++g) {
    const CMat& b = bd.blocks[g];
    const int sz = static_cast<int>(b.rows());
    cplx centroid = b.trace() / static_cast<double>(sz);
    CMat normalized = b / centroid;
    CMat lg = principal_log(centroid) * CMat::Identity(sz, sz);
    if ((normalized - CMat::Identity(sz, sz)).norm() > 0.0) lg += normalized.log();
    logs.push_back(lg / kTwoPi);
    bool pos = false, neg = false;
    for (cplx v : bd.eigenvalues[g]) {
      if (v.real() < 0.0 && v.imag() > 0.0) pos = true;
      if (v.real() < 0.0 && v.imag() < 0.0) neg = true;
    }
    if (pos && neg) out.straddles_cut = true;
    out.cluster_sizes.push_back(sz);
  }
  (void)neutral_hint;  // the principal branch already maps the multiplier nearest 1 onto 0
  out.m1 = bd.basis * blockdiag(logs) * bd.basis_inv;
  for (const auto& l : logs) {
    Eigen::ComplexEigenSolver<CMat> el(l, false);
    for (int i = 0; i < l.rows(); ++i) out.exponents.push_back(el.eigenvalues()(i));
  }
  return out;
}

CMat matrix_log_normalized(const CMat& x, bool neutral_hint) { return matrix_log_details(x, neutral_hint).m1; }

FactoredLog matrix_log_factored(const FactoredPeriodMap& map, bool neutral_hint) {
  CMat y = block_diagonalizer(map.upper, map.blocks, false);
  CMat y_inv = block_unit_upper_inverse(y);
  CMat d = y_inv * map.upper * y;
  FactoredLog out;
  int s = 0;
  for (int sz : map.blocks) {
    LogResult lr = matrix_log_details(d.block(s, s, sz, sz), neutral_hint);
    out.block_logs.push_back(lr.m1);
    out.exponents.insert(out.exponents.end(), lr.exponents.begin(), lr.exponents.end());
    out.straddles_cut = out.straddles_cut || lr.straddles_cut;
    s += sz;
  }
  out.transform = map.basis * y;
  out.transform_inv = y_inv * map.basis.adjoint();
  out.m1 = out.transform * blockdiag(out.block_logs) * out.transform_inv;
  return out;
}

SchurSplit ordered_schur_split(const CMat& m, double c0, double gap_tol) {
  require_finite(m, "ordered_schur_split");
  Eigen::ComplexEigenSolver<CMat> es(m, false);
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double re = es.eigenvalues()(i).real();
    if (std::abs(std::abs(re) - c0) < gap_tol) {
      throw GapViolation("ordered_schur_split: eigenvalue with Re = " + std::to_string(re) +
                         " inside the gap band around +-" + std::to_string(c0));
    }
  }
  auto key = [c0](cplx v, int) {
    if (v.real() > c0) return 0;
    if (v.real() < -c0) return 2;
    return 1;
  };
  BlockDecomposition bd = block_decompose(m, key);
  SchurSplit out;
  out.transform = bd.basis_inv;
  out.transform_inv = bd.basis;
  out.p_plus = out.neutral = out.p_minus = CMat(0, 0);
  for (size_t g = 0; g < bd.blocks.size(); ++g) {
    switch (bd.keys[g]) {
      case 0:
        out.p_plus = bd.blocks[g];
        out.eig_plus = bd.eigenvalues[g];
        break;
      case 1:
        out.neutral = bd.blocks[g];
        out.eig_neutral = bd.eigenvalues[g];
        break;
      default:
        out.p_minus = bd.blocks[g];
        out.eig_minus = bd.eigenvalues[g];
    }
  }
  return out;
}

CMat hermitian_part(const CMat& a) { return 0.5 * (a + a.adjoint()); }

double min_eig_hermitian(const CMat& a) {
  if (a.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

CMat matrix_exp(const CMat& a) {
  require_finite(a, "matrix_exp");
  return a.exp();
}

CMat lyapunov_symmetrizer(const CMat& p, int sign) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("lyapunov_symmetrizer: sign must be +-1");
  require_finite(p, "lyapunov_symmetrizer");
  const int n = static_cast<int>(p.rows());
  if (n == 0) return CMat(0, 0);
  Eigen::ComplexEigenSolver<CMat> es(p, false);
  double c = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) c = std::min(c, sign * es.eigenvalues()(i).real());
  if (!(c > 0.0)) throw NumericalError("lyapunov_symmetrizer: spectrum not uniformly signed");
  // P^* S + S P = 2 sign c Id  <=>  P^* S - S (-P) = 2 sign c Id.
  CMat s = sylvester_solve(p.adjoint(), -p, 2.0 * sign * c * CMat::Identity(n, n));
  s = hermitian_part(s);
  if (min_eig_hermitian(static_cast<double>(sign) * (s * p)) < 0.5 * c) {
    throw NumericalError("lyapunov_symmetrizer: symmetric part check failed");
  }
  return s;
}

}  // namespace hfw
