#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hfw {

using cplx = std::complex<double>;
using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Equispaced nodes theta_j = 2 pi j / n on [0, 2 pi).
class TorusGrid {
 public:
  explicit TorusGrid(int n_theta = 64);
  int size() const { return n_; }
  double spacing() const;
  double node(int j) const;
  RVec nodes() const;
  bool operator==(const TorusGrid& o) const { return n_ == o.n_; }

 private:
  int n_;
};

// Values sampled on a TorusGrid: one row per node, one column per component.
template <class Scalar>
struct BasicField {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  TorusGrid grid;
  Matrix values;

  BasicField() : grid(8), values(Matrix::Zero(8, 1)) {}
  BasicField(const TorusGrid& g, int dim) : grid(g), values(Matrix::Zero(g.size(), dim)) {}
  BasicField(const TorusGrid& g, Matrix v) : grid(g), values(std::move(v)) {
    if (values.rows() != grid.size()) throw std::invalid_argument("field rows must equal n_theta");
  }
  int dim() const { return static_cast<int>(values.cols()); }
  // Component-major flattening: index c * n_theta + j.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flat() const {
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(values.data(), values.size());
  }
  static BasicField from_flat(const TorusGrid& g, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v, int dim) {
    Matrix m = Eigen::Map<const Matrix>(v.data(), g.size(), dim);
    return BasicField(g, m);
  }
};

using PeriodicField = BasicField<double>;
using CPeriodicField = BasicField<cplx>;

// Sample a function of theta on the grid.
template <class F>
PeriodicField sample_field(const TorusGrid& g, int dim, F&& fn) {
  PeriodicField out(g, dim);
  for (int j = 0; j < g.size(); ++j) {
    RVec v = fn(g.node(j));
    out.values.row(j) = v.transpose();
  }
  return out;
}

// Fourier wavenumber attached to DFT slot j (Nyquist slot returns +n/2).
int wavenumber(int j, int n);

// Unnormalized forward DFT and inverse (inverse divides by n), column-wise.
CMat dft_columns(const CMat& x);
CMat idft_columns(const CMat& x);

PeriodicField fourier_diff(const PeriodicField& field, int order);
CPeriodicField fourier_diff(const CPeriodicField& field, int order);

// Dense matrices of (d/dtheta + i xi)^order on the grid; xi = 0 gives real matrices.
// Nyquist convention: order 1 -> i xi, order 2 -> -((n/2)^2 + xi^2).
CMat diff_matrix(const TorusGrid& g, int order, double xi = 0.0);
RMat real_diff_matrix(const TorusGrid& g, int order);

// Trapezoid sum (2 pi / n) sum_j values, per component.
RVec periodic_quadrature(const PeriodicField& field);
CVec periodic_quadrature(const CPeriodicField& field);
// (2 pi / n) sum_j a_j . b_j
double inner(const PeriodicField& a, const PeriodicField& b);

// Trigonometric interpolant evaluated at arbitrary angles (rows: angles, cols: components).
RMat trig_eval(const PeriodicField& field, const RVec& theta);
// Resample the trigonometric interpolant onto m equispaced nodes (m >= 2).
RMat trig_resample(const RMat& values, int m);

// Pointwise product with 3/2 zero padding; componentwise.
PeriodicField dealiased_product(const PeriodicField& a, const PeriodicField& b);

// Translate a field by an integer number of nodes (value at j becomes value at j + shift).
PeriodicField shift_nodes(const PeriodicField& f, int shift);

double max_abs(const PeriodicField& f);

}  // namespace hfw
