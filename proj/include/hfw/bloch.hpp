#pragma once

#include <vector>

#include "hfw/linalg.hpp"
#include "hfw/wavetrain.hpp"

namespace hfw {

// Dense matrix of L_{xi,eta} = -omega (d + i xi) - f'(p) + k^2 (d + i xi)^2 - eta^2 on
// component-major unknowns. L_{0,0} is the negative of linearization_matrix.
struct BlochOperator {
  double k = 0.0;
  double omega = 0.0;
  double xi = 0.0;
  double eta = 0.0;
  TorusGrid grid;
  int dim = 0;
  CMat matrix;

  CVec eigenvalues() const;
};

BlochOperator assemble_bloch(const WaveTrain& w, double xi, double eta = 0.0);

struct StabilityVerdict {
  bool transversal = false;
  bool condition_i = false;
  bool condition_ii = false;
  double c = 0.0;               // largest c with max Re sigma <= -c (xi^2 + eta^2) on the grid
  double zero_eigenvalue = 0.0; // modulus of the translation eigenvalue
  double axis_distance = 0.0;   // min |Re| over the other eigenvalues of L_{0,0}
  std::vector<std::pair<double, double>> failing;  // (xi, eta) with max Re sigma >= 0
  bool stable() const { return transversal && condition_i && condition_ii; }
};

StabilityVerdict verify_diffusive_stability(const WaveTrain& w, const std::vector<double>& xi_grid,
                                            const std::vector<double>& eta_grid);
// Uses the family member at k, re-solved from the nearest sample when k is not a sample.
StabilityVerdict verify_diffusive_stability(const WaveFamily& family, double k, const std::vector<double>& xi_grid,
                                            const std::vector<double>& eta_grid);

// Wavetrain at arbitrary k inside a family, solved from the nearest member.
WaveTrain member_at(const WaveFamily& family, double k);

// First-order form V' = M(theta) V of the Bloch eigenvalue problem with V = (u, k u'):
// M = [[0, I/k], [(lambda + G)/k, (omega/k^2) I]], G = f'(p).
struct SampledSymbol {
  RVec theta;
  std::vector<CMat> values;
};
SampledSymbol first_order_symbol(const WaveTrain& w, cplx lambda, int n_samples = 0);

struct MonodromyRecord {
  double k = 0.0;
  cplx lambda;
  CMat x;   // period map X(2 pi); entries can be large
  CMat m1;  // exp(2 pi m1) = X
  std::vector<cplx> exponents;
  bool straddles_cut = false;
  FactoredPeriodMap map;
  FactoredLog log;
};

struct EvansValue {
  cplx log_d = 0.0;        // log D, any branch of the imaginary part
  double log_scale = 0.0;  // log prod (1 + |rho_j|) over the multipliers
};

// Caches f'(p) on the RK4 half-step grid so repeated evaluations in lambda are cheap.
class PeriodMapper {
 public:
  explicit PeriodMapper(const WaveTrain& w, int steps = 0);

  int steps() const { return steps_; }
  int dim() const { return dim_; }
  const WaveTrain& wave() const { return wave_; }
  std::vector<CMat> half_step_symbol(cplx lambda) const;
  FactoredPeriodMap period_map(cplx lambda) const;
  MonodromyRecord monodromy(cplx lambda) const;
  // D(lambda, xi) = det(X - e^{2 pi i xi} Id) in log form, with its natural scale.
  EvansValue evans_value(cplx lambda, double xi) const;
  cplx log_evans(cplx lambda, double xi) const;
  double log_evans_scale(cplx lambda) const;

 private:
  WaveTrain wave_;
  int steps_ = 0;
  int dim_ = 0;
  std::vector<RMat> jac_;  // f'(p) at theta_j = j pi / steps
};

// Default step count: at least 8 n_theta and h rho(M) <= 0.1 for |lambda| up to lambda_bound.
int default_monodromy_steps(const WaveTrain& w, double lambda_bound = 1.0);

MonodromyRecord monodromy(const WaveTrain& w, cplx lambda);
cplx evans(const WaveTrain& w, cplx lambda, double xi);

struct EvansRoot {
  cplx lambda;
  int multiplicity = 1;
};

struct RootSearchStats {
  int evaluations = 0;
  int rectangles = 0;
};

// Zeros of D(., xi) in |lambda| <= radius by argument-principle counting on rectangles
// (quadtree subdivision) followed by Newton polishing.
std::vector<EvansRoot> evans_roots(const PeriodMapper& mapper, double xi, double radius,
                                   RootSearchStats* stats = nullptr);
// Winding number of D(., xi) around the rectangle [lo.re, hi.re] x [lo.im, hi.im].
int evans_winding(const PeriodMapper& mapper, double xi, cplx lo, cplx hi);

// Eigenvalues of the dense Bloch operator in |lambda| <= radius.
std::vector<cplx> bloch_eigenvalues_in_disk(const WaveTrain& w, double xi, double radius);

// Greedy multiset match; returns the largest pairing distance, or +inf on a count mismatch.
double match_multisets(const std::vector<EvansRoot>& roots, const std::vector<cplx>& eigs);

struct NeutralCurve {
  double k = 0.0;
  double omega = 0.0;
  std::vector<double> xi;
  std::vector<cplx> lambda;
  // Fit lambda*(xi) = -i c xi - b xi^2 + higher odd/even terms, c the theta-frame speed.
  double c_fit = 0.0;
  double b_fit = 0.0;
  double omega_prime_fit = 0.0;  // lab-frame group velocity, (omega - c) / k
};

NeutralCurve neutral_curve(const WaveTrain& w, double xi_max, int n_samples);

struct WhithamReport {
  double k = 0.0;
  double omega_prime_evans = 0.0;
  double omega_prime_family = 0.0;
  double difference = 0.0;
  double b = 0.0;
};

WhithamReport whitham_flux_check(const WaveFamily& family, double k, double xi_max = 0.05, int n_samples = 11);

}  // namespace hfw
