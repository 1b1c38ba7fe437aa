#include "hfw/fredholm.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/SVD>

namespace hfw {

RMat linearization_matrix(const ReactionSystem& sys, double k, double omega, const PeriodicField& profile) {
  const TorusGrid& g = profile.grid;
  const int n = g.size();
  const int d = sys.dim();
  if (profile.dim() != d) throw std::invalid_argument("profile dimension does not match the system");
  RMat d1 = real_diff_matrix(g, 1);
  RMat d2 = real_diff_matrix(g, 2);
  RMat op = RMat::Zero(n * d, n * d);
  auto jac = sys.jacobian_rows(profile.values.array());
  for (int c = 0; c < d; ++c) {
    op.block(c * n, c * n, n, n) = omega * d1 - k * k * d2;
    for (int e = 0; e < d; ++e) op.block(c * n, e * n, n, n).diagonal() += jac[c * d + e].matrix();
  }
  return op;
}

PeriodicField LinearizedOperator::apply(const PeriodicField& w) const {
  return PeriodicField::from_flat(grid, RVec(matrix * w.flat()), dim);
}

LinearizedOperator assemble_L(const WaveTrain& w) {
  LinearizedOperator op;
  op.k = w.k;
  op.omega = w.omega;
  op.grid = w.grid();
  op.dim = w.system.dim();
  op.matrix = linearization_matrix(w.system, w.k, w.omega, w.profile);
  op.dp = w.dtheta().flat();
  return op;
}

AdjointNullData adjoint_null(const LinearizedOperator& op) {
  // Left singular vector of the smallest singular value spans ker L^T; with the uniform
  // trapezoid weight, L^T is the L^2 adjoint.
  Eigen::JacobiSVD<RMat> svd(op.matrix, Eigen::ComputeFullU);
  const int last = static_cast<int>(op.matrix.rows()) - 1;
  RVec h = svd.matrixU().col(last);
  const double w = op.grid.spacing();
  double integral = w * h.dot(op.dp);
  if (std::abs(integral) < 1e-8) {
    throw SolverError("adjoint_null: h is orthogonal to p' (transversality fails)");
  }
  h /= integral;
  AdjointNullData out;
  out.h = PeriodicField::from_flat(op.grid, h, op.dim);
  out.normalization = w * h.dot(op.dp);
  out.adjoint_residual = (op.matrix.transpose() * h).norm() / std::max(1.0, h.norm());
  return out;
}

PartialInverse::PartialInverse(const LinearizedOperator& op, const AdjointNullData& adj) : op_(op), adj_(adj) {
  const int m = static_cast<int>(op.matrix.rows());
  hw_ = op.grid.spacing() * adj.h.flat();
  RMat b = RMat::Zero(m + 1, m + 1);
  b.topLeftCorner(m, m) = op.matrix;
  b.block(0, m, m, 1) = op.dp;
  b.block(m, 0, 1, m) = hw_.transpose();
  lu_.compute(b);
  double rcond = lu_.rcond();
  if (!(rcond > 1e-14)) throw SolverError("partial inverse: bordered matrix singular (transversality failure)");
}

double PartialInverse::h_integral(const PeriodicField& f) const { return hw_.dot(f.flat()); }

PeriodicField PartialInverse::project_kernel(const PeriodicField& f) const {
  RVec v = h_integral(f) * op_.dp;
  return PeriodicField::from_flat(op_.grid, v, op_.dim);
}

RVec PartialInverse::apply_flat(const RVec& rhs) const {
  const int m = static_cast<int>(rhs.size());
  RVec proj = rhs - hw_.dot(rhs) * op_.dp;
  RVec full(m + 1);
  full.head(m) = proj;
  full(m) = 0.0;
  RVec sol = lu_.solve(full);
  return sol.head(m);
}

PeriodicField PartialInverse::apply(const PeriodicField& rhs) const {
  return PeriodicField::from_flat(op_.grid, apply_flat(rhs.flat()), op_.dim);
}

double cm_norm(const PeriodicField& f, int m) {
  double best = max_abs(f);
  PeriodicField d = f;
  for (int j = 1; j <= m; ++j) {
    d = fourier_diff(d, 1);
    best = std::max(best, max_abs(d));
  }
  return best;
}

GrowthReport verify_bounded_on_Cm(const PartialInverse& r, int m, int samples, unsigned seed) {
  if (m < 0 || m > 4) throw std::invalid_argument("verify_bounded_on_Cm: m must be in 0..4");
  const TorusGrid& g = r.op().grid;
  const int dim = r.op().dim;
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  GrowthReport rep;
  rep.m = m;
  rep.samples = samples;
  // Band-limited fields with a fixed mode range, so the sample set does not depend on the grid.
  const int modes = 16;
  for (int s = 0; s < samples; ++s) {
    std::vector<double> a(dim * (2 * modes + 1));
    for (auto& v : a) v = nd(rng);
    PeriodicField f(g, dim);
    for (int c = 0; c < dim; ++c) {
      for (int j = 0; j < g.size(); ++j) {
        double t = g.node(j);
        double acc = a[c * (2 * modes + 1)];
        for (int q = 1; q <= modes; ++q) {
          double decay = std::pow(1.0 + q, -(m + 2));
          acc += decay * (a[c * (2 * modes + 1) + 2 * q - 1] * std::cos(q * t) +
                          a[c * (2 * modes + 1) + 2 * q] * std::sin(q * t));
        }
        f.values(j, c) = acc;
      }
    }
    PeriodicField rf = r.apply(f);
    double ratio = cm_norm(rf, m) / cm_norm(f, m);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    rep.mean_ratio += ratio / samples;
  }
  return rep;
}

}  // namespace hfw
