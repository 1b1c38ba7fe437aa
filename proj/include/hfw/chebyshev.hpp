#pragma once

#include "hfw/spectral.hpp"

namespace hfw {

// Chebyshev-Lobatto points on [a, b], increasing, with barycentric interpolation
// and a dense differentiation matrix.
class ChebyshevGrid {
 public:
  ChebyshevGrid(double a, double b, int n_points);
  int size() const { return static_cast<int>(x_.size()); }
  double a() const { return a_; }
  double b() const { return b_; }
  const RVec& points() const { return x_; }
  double point(int i) const { return x_(i); }
  // Row vector of interpolation weights: f(t) = weights(t) . f(nodes).
  RVec weights(double t) const;
  const RMat& diff() const { return d_; }
  bool contains(double t, double tol = 1e-12) const;

 private:
  double a_, b_;
  RVec x_, w_;
  RMat d_;
};

}  // namespace hfw
