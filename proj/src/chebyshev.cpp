#include "hfw/chebyshev.hpp"

#include <cmath>
#include <numbers>

namespace hfw {

ChebyshevGrid::ChebyshevGrid(double a, double b, int n_points) : a_(a), b_(b) {
  if (n_points < 2 || !(b > a)) throw std::invalid_argument("ChebyshevGrid needs b > a and >= 2 points");
  const int n = n_points - 1;
  x_.resize(n_points);
  w_.resize(n_points);
  for (int i = 0; i <= n; ++i) {
    double s = -std::cos(std::numbers::pi * i / n);
    x_(i) = a + 0.5 * (b - a) * (s + 1.0);
    w_(i) = ((i % 2) ? -1.0 : 1.0) * ((i == 0 || i == n) ? 0.5 : 1.0);
  }
  d_ = RMat::Zero(n_points, n_points);
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      if (i != j) d_(i, j) = (w_(j) / w_(i)) / (x_(i) - x_(j));
    }
    d_(i, i) = -d_.row(i).sum();
  }
}

RVec ChebyshevGrid::weights(double t) const {
  RVec out = RVec::Zero(size());
  for (int i = 0; i < size(); ++i) {
    if (t == x_(i)) {
      out(i) = 1.0;
      return out;
    }
  }
  double denom = 0.0;
  for (int i = 0; i < size(); ++i) {
    out(i) = w_(i) / (t - x_(i));
    denom += out(i);
  }
  return out / denom;
}

bool ChebyshevGrid::contains(double t, double tol) const {
  double scale = tol * std::max(1.0, b_ - a_);
  return t >= a_ - scale && t <= b_ + scale;
}

}  // namespace hfw
