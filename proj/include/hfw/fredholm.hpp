#pragma once

#include "hfw/wavetrain.hpp"

namespace hfw {

// Dense collocation matrix of omega d/dtheta + f'(p) - k^2 d^2/dtheta^2 on component-major
// unknowns (index c * n_theta + j).
RMat linearization_matrix(const ReactionSystem& sys, double k, double omega, const PeriodicField& profile);

struct LinearizedOperator {
  double k = 0.0;
  double omega = 0.0;
  TorusGrid grid;
  int dim = 0;
  RMat matrix;
  RVec dp;  // flattened d/dtheta p

  PeriodicField apply(const PeriodicField& w) const;
};

LinearizedOperator assemble_L(const WaveTrain& w);

struct AdjointNullData {
  PeriodicField h;
  double normalization = 0.0;  // integral of h . p', equals 1 after construction
  double adjoint_residual = 0.0;
};

AdjointNullData adjoint_null(const LinearizedOperator& op);

// Bordered-system partial inverse of L on the range complement of p'.
class PartialInverse {
 public:
  PartialInverse(const LinearizedOperator& op, const AdjointNullData& adj);

  // Solves L w = (I - Pi0) rhs with integral(h . w) = 0.
  PeriodicField apply(const PeriodicField& rhs) const;
  RVec apply_flat(const RVec& rhs) const;
  double h_integral(const PeriodicField& f) const;  // integral of h . f
  PeriodicField project_kernel(const PeriodicField& f) const;  // Pi0 f = (integral h.f) p'
  const LinearizedOperator& op() const { return op_; }
  const AdjointNullData& adjoint() const { return adj_; }

 private:
  LinearizedOperator op_;
  AdjointNullData adj_;
  Eigen::PartialPivLU<RMat> lu_;
  RVec hw_;  // (2 pi / n) h, flattened
};

struct GrowthReport {
  int m = 0;
  int samples = 0;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
};

// Sampled ||R f||_{C^m} / ||f||_{C^m} over random band-limited fields.
GrowthReport verify_bounded_on_Cm(const PartialInverse& r, int m, int samples = 20, unsigned seed = 0);

// Max over derivatives of order <= m of the max norm.
double cm_norm(const PeriodicField& f, int m);

}  // namespace hfw
