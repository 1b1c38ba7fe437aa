#include "hfw/spectral.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace hfw {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

CMat dft_impl(const CMat& x, int sign) {
  const int n = static_cast<int>(x.rows());
  CMat out(x.rows(), x.cols());
  CVec in_col(n), out_col(n);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in_col.data()),
                            reinterpret_cast<fftw_complex*>(out_col.data()), sign, FFTW_ESTIMATE);
  }
  for (int c = 0; c < x.cols(); ++c) {
    in_col = x.col(c);
    fftw_execute(plan);
    out.col(c) = out_col;
  }
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

// Coefficients (DFT / n) of an n-point spectrum mapped onto an m-point spectrum.
CMat spectrum_resize(const CMat& c, int m) {
  const int n = static_cast<int>(c.rows());
  CMat out = CMat::Zero(m, c.cols());
  auto place = [&](int kappa, const Eigen::RowVectorXcd& v) {
    if (2 * std::abs(kappa) > m) return;
    int slot = kappa >= 0 ? kappa : kappa + m;
    if (2 * std::abs(kappa) == m) slot = m / 2;
    out.row(slot) += v;
  };
  for (int j = 0; j < n; ++j) {
    if (n % 2 == 0 && j == n / 2) {
      Eigen::RowVectorXcd half = 0.5 * c.row(j);
      place(n / 2, half);
      place(-n / 2, half);
    } else {
      place(wavenumber(j, n), c.row(j));
    }
  }
  return out;
}

CMat to_complex(const RMat& m) { return m.cast<cplx>(); }

}  // namespace

TorusGrid::TorusGrid(int n_theta) : n_(n_theta) {
  if (n_theta < 8 || n_theta % 2 != 0) throw std::invalid_argument("n_theta must be even and >= 8");
}

double TorusGrid::spacing() const { return 2.0 * std::numbers::pi / n_; }

double TorusGrid::node(int j) const { return 2.0 * std::numbers::pi * j / n_; }

RVec TorusGrid::nodes() const {
  RVec t(n_);
  for (int j = 0; j < n_; ++j) t(j) = node(j);
  return t;
}

int wavenumber(int j, int n) { return (2 * j <= n) ? j : j - n; }

CMat dft_columns(const CMat& x) { return dft_impl(x, FFTW_FORWARD); }

CMat idft_columns(const CMat& x) { return dft_impl(x, FFTW_BACKWARD) / static_cast<double>(x.rows()); }

namespace {

CVec spectral_multiplier(int n, int order, double xi) {
  CVec mult(n);
  for (int j = 0; j < n; ++j) {
    if (j == n / 2) {
      double q = n / 2.0;
      mult(j) = order == 1 ? cplx(0.0, xi) : cplx(-(q * q + xi * xi), 0.0);
    } else {
      double q = wavenumber(j, n) + xi;
      mult(j) = order == 1 ? cplx(0.0, q) : cplx(-q * q, 0.0);
    }
  }
  return mult;
}

void check_order(int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("fourier_diff order must be 1 or 2");
}

}  // namespace

CPeriodicField fourier_diff(const CPeriodicField& field, int order) {
  check_order(order);
  const int n = field.grid.size();
  CMat c = dft_columns(field.values);
  CVec mult = spectral_multiplier(n, order, 0.0);
  for (int col = 0; col < c.cols(); ++col) c.col(col) = c.col(col).cwiseProduct(mult);
  return CPeriodicField(field.grid, idft_columns(c));
}

PeriodicField fourier_diff(const PeriodicField& field, int order) {
  check_order(order);
  CPeriodicField z(field.grid, to_complex(field.values));
  return PeriodicField(field.grid, fourier_diff(z, order).values.real());
}

CMat diff_matrix(const TorusGrid& g, int order, double xi) {
  check_order(order);
  const int n = g.size();
  CMat eye = CMat::Identity(n, n);
  CMat c = dft_columns(eye);
  CVec mult = spectral_multiplier(n, order, xi);
  for (int col = 0; col < n; ++col) c.col(col) = c.col(col).cwiseProduct(mult);
  return idft_columns(c);
}

RMat real_diff_matrix(const TorusGrid& g, int order) { return diff_matrix(g, order, 0.0).real(); }

RVec periodic_quadrature(const PeriodicField& field) {
  return field.grid.spacing() * field.values.colwise().sum().transpose();
}

CVec periodic_quadrature(const CPeriodicField& field) {
  return field.grid.spacing() * field.values.colwise().sum().transpose();
}

double inner(const PeriodicField& a, const PeriodicField& b) {
  return a.grid.spacing() * (a.values.array() * b.values.array()).sum();
}

RMat trig_eval(const PeriodicField& field, const RVec& theta) {
  const int n = field.grid.size();
  CMat c = dft_columns(to_complex(field.values)) / static_cast<double>(n);
  RMat out = RMat::Zero(theta.size(), field.dim());
  for (int a = 0; a < theta.size(); ++a) {
    for (int j = 0; j < n; ++j) {
      if (j == n / 2) {
        double w = std::cos(0.5 * n * theta(a));
        out.row(a) += w * c.row(j).real();
      } else {
        cplx e = std::exp(cplx(0.0, wavenumber(j, n) * theta(a)));
        out.row(a) += (e * c.row(j)).real();
      }
    }
  }
  return out;
}

RMat trig_resample(const RMat& values, int m) {
  if (m < 2) throw std::invalid_argument("trig_resample needs m >= 2");
  const int n = static_cast<int>(values.rows());
  CMat c = dft_columns(to_complex(values)) / static_cast<double>(n);
  CMat cm = spectrum_resize(c, m);
  return (idft_columns(cm) * static_cast<double>(m)).real();
}

PeriodicField dealiased_product(const PeriodicField& a, const PeriodicField& b) {
  if (!(a.grid == b.grid) || a.dim() != b.dim()) throw std::invalid_argument("dealiased_product: shape mismatch");
  const int n = a.grid.size();
  int m = 2 * ((3 * n + 3) / 4);
  RMat pa = trig_resample(a.values, m);
  RMat pb = trig_resample(b.values, m);
  RMat prod = pa.cwiseProduct(pb);
  return PeriodicField(a.grid, trig_resample(prod, n));
}

PeriodicField shift_nodes(const PeriodicField& f, int shift) {
  const int n = f.grid.size();
  PeriodicField out(f.grid, f.dim());
  for (int j = 0; j < n; ++j) out.values.row(j) = f.values.row(((j + shift) % n + n) % n);
  return out;
}

double max_abs(const PeriodicField& f) { return f.values.cwiseAbs().maxCoeff(); }

}  // namespace hfw
