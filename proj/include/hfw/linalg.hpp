#pragma once

#include <functional>
#include <vector>

#include "hfw/spectral.hpp"

namespace hfw {

using MatrixFunction = std::function<CMat(double)>;

class GapViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Fixed-step classical RK4 for dX/dtheta = A(theta) X, X(theta0) = Id.
CMat integrate_linear_ode(const MatrixFunction& a, double theta0, double theta1, int steps);

// Period map over [0, 2 pi] kept in factored form. The columns of `basis` are an
// orthonormal frame whose leading column groups span nested invariant subspaces of
// ordered growth; `upper` = basis^* X basis is block upper triangular with diagonal
// blocks of sizes `blocks`. This keeps multipliers accurate when their moduli span
// many orders of magnitude.
struct FactoredPeriodMap {
  CMat basis;
  CMat upper;
  std::vector<int> blocks;
  RVec growth;  // log|R_jj| / 2 pi from the last sweep, per column
  int periods = 0;

  CMat dense() const;
  cplx det_shifted(cplx z) const;  // det(X - z Id)
  double log_abs_det() const;
  std::vector<cplx> multipliers() const;
};

FactoredPeriodMap factored_period_map(const MatrixFunction& a, int steps, double group_gap = 0.5,
                                      int max_periods = 60);
// Same, from coefficient samples at theta_j = j * pi / steps, j = 0..2 steps.
FactoredPeriodMap factored_period_map(const std::vector<CMat>& half_step_samples, int steps,
                                      double group_gap = 0.5, int max_periods = 60);

// M = basis * blockdiag(blocks) * basis_inv, with eigenvalues grouped by a key.
struct BlockDecomposition {
  CMat basis;
  CMat basis_inv;
  std::vector<CMat> blocks;
  std::vector<std::vector<cplx>> eigenvalues;
  std::vector<int> keys;  // group key of each block
};

// Groups: key(eigenvalue, original index) ascending; ties ordered by (Re, Im, index).
BlockDecomposition block_decompose(const CMat& m, const std::function<int(cplx, int)>& key);

// Solves A Y - Y B = C.
CMat sylvester_solve(const CMat& a, const CMat& b, const CMat& c);

struct LogResult {
  CMat m1;                       // exp(2 pi m1) = X
  std::vector<cplx> exponents;   // eigenvalues of m1
  std::vector<int> cluster_sizes;
  bool straddles_cut = false;    // a multiplier cluster lies across the negative real axis
};

// Floquet branch: exponent imaginary parts in (-1/2, 1/2]; clusters closer than
// 1e-8 (and, for conditioning, within 5% relative distance) share one block.
LogResult matrix_log_details(const CMat& x, bool neutral_hint = false);
CMat matrix_log_normalized(const CMat& x, bool neutral_hint = false);

// Log of a factored period map, block by block.
struct FactoredLog {
  CMat m1;         // dense logarithm / 2 pi in original coordinates
  CMat transform;  // columns: adapted basis; m1 = transform * blockdiag(block_logs) * transform^{-1}
  CMat transform_inv;
  std::vector<CMat> block_logs;
  std::vector<cplx> exponents;
  bool straddles_cut = false;
};
FactoredLog matrix_log_factored(const FactoredPeriodMap& map, bool neutral_hint = false);

struct SchurSplit {
  CMat transform;      // T with T M T^{-1} = blockdiag(P+, m, P-)
  CMat transform_inv;
  CMat p_plus, neutral, p_minus;
  std::vector<cplx> eig_plus, eig_neutral, eig_minus;
  int n_plus() const { return static_cast<int>(p_plus.rows()); }
  int n_neutral() const { return static_cast<int>(neutral.rows()); }
  int n_minus() const { return static_cast<int>(p_minus.rows()); }
};

SchurSplit ordered_schur_split(const CMat& m, double c0, double gap_tol = 1e-8);

// Hermitian S with sign * sym(S P) = c Id, c = min sign * Re sigma(P).
CMat lyapunov_symmetrizer(const CMat& p, int sign);

CMat hermitian_part(const CMat& a);
double min_eig_hermitian(const CMat& a);  // smallest eigenvalue of (a + a^*) / 2
CMat matrix_exp(const CMat& a);

}  // namespace hfw
