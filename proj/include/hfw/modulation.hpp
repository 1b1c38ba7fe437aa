#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "hfw/chebyshev.hpp"
#include "hfw/wavetrain.hpp"

namespace hfw {

// Profiles on Chebyshev nodes in k, all phase-aligned to one reference profile, so that
// p(k, .), omega(k) and omega'(k) are smooth interpolants on [k_lo, k_hi].
class ProfileMap {
 public:
  ProfileMap(const WaveFamily& family, double k_lo, double k_hi, int n_nodes = 16, int n_theta = 32);

  const ReactionSystem& system() const { return nodes_.front().system; }
  const TorusGrid& grid() const { return grid_; }
  int dim() const { return nodes_.front().profile.dim(); }
  double k_lo() const { return cheb_.a(); }
  double k_hi() const { return cheb_.b(); }
  bool contains(double k) const { return cheb_.contains(k, 1e-9); }
  const std::vector<WaveTrain>& nodes() const { return nodes_; }

  PeriodicField profile(double k) const;
  double omega(double k) const;
  double omega_prime(double k) const;
  double max_node_residual() const;

 private:
  RVec weights_checked(double k) const;
  ChebyshevGrid cheb_;
  TorusGrid grid_;
  std::vector<WaveTrain> nodes_;
  RVec omega_nodes_, omega_prime_nodes_;
};

// k0(x) = q + A (b(x) - mean b), b(x) = exp((cos(2 pi (x - x0) / L) - 1) / w^2), on [0, L).
struct ModulationProfile {
  double q = 0.28;  // slow mean wavenumber; the fast phase wraps iff q L / (2 pi eps) is an integer
  double amplitude = 0.05;
  double width = 0.5;
  double center = 3.0;
  double length = 2.0 * 3.14159265358979323846;

  RVec k0(const RVec& x) const;
  double bump_mean() const;
};

// Uniform periodic slow grid x_j = j L / n.
RVec slow_grid(double length, int n);

// Phase-quantization test: q L / (2 pi eps) within 1e-9 of an integer.
bool phase_admissible(double q, double length, double eps);

class EikonalBlowup : public SolverError {
 public:
  EikonalBlowup(const std::string& what, double time) : SolverError(what), time(time) {}
  double time;
};

class KRangeError : public SolverError {
 public:
  using SolverError::SolverError;
};

// psi(t, x) = q x + psi_tilde(t, x), psi_tilde periodic; samples at Chebyshev times on [0, T].
struct ModulationField {
  double length = 0.0;
  double q = 0.0;
  RVec x;
  ChebyshevGrid t{0.0, 1.0, 2};
  std::vector<RVec> psi_tilde;  // per time node
  std::vector<RVec> k;          // per time node, q + d_x psi_tilde
  int rk_steps = 0;
  double max_step = 0.0;
  double eikonal_residual = 0.0;  // max |d_t psi - omega(k)| with Chebyshev d_t
  double initial_gradient = 0.0;  // max |d_x k0|
  double final_gradient = 0.0;

  int nx() const { return static_cast<int>(x.size()); }
  RVec psi(int i) const;
};

struct EikonalOptions {
  int n_time = 20;              // Chebyshev nodes on [0, T]
  double max_step = 2e-3;       // RK4 step bound
  double blowup_factor = 10.0;  // abort when max |d_x k| exceeds this times the initial value
};

// Evolves d_t psi = omega(d_x psi) with spectral d_x and RK4.
ModulationField solve_eikonal(const ProfileMap& map, const RVec& k0, double length, double T,
                              const EikonalOptions& opt = {});

// -1 / min_x d_x c(k0(x)) with c = -omega'; infinity when the minimum is >= 0.
double blowup_time_estimate(const ProfileMap& map, const RVec& k0, double length);

// Characteristic tracing: k(t, x) = k0(x0) with x = x0 - omega'(k0(x0)) t, solved for x0 by Newton.
double characteristic_k(const ProfileMap& map, const ModulationProfile& prof, double t, double x);

// Spectral derivative of a periodic sample vector on [0, L).
RVec periodic_derivative(const RVec& f, double length, int order = 1);
// Values of the periodic trigonometric interpolant of f on n_out equispaced points.
RVec periodic_upsample(const RVec& f, int n_out);

// Order-m pieces on the slow grid (x_j, t_i) times the fast grid theta_l. Fields are stored
// per time node as (nx * n_theta) x dim arrays with row index j * n_theta + l.
struct ExpansionData {
  std::shared_ptr<const ProfileMap> map;
  ModulationField field;
  int order = 0;
  int n_theta = 0;
  std::vector<std::vector<RMat>> u;    // u[n][i]
  std::vector<std::vector<RMat>> u_t;  // Chebyshev d_t of u[n]
  std::vector<std::vector<RVec>> phi;  // phi[n][i], n < order
  std::vector<std::vector<RVec>> phi_t;
  std::vector<double> consistency;  // per n: max |F_{n+1}| after construction
  std::vector<double> solvability;  // per n: max |int h (rhs)| at slow points
  std::vector<double> source_norm;  // per n: max |F_{n+1}| before the order-(n+1) pieces were added
  int n_time() const { return field.t.size(); }
  int nx() const { return field.nx(); }
};

// Builds U_0..U_m and phi_0..phi_{m-1}. m may be 3 internally (the improved-rate comparator).
ExpansionData build_expansion(std::shared_ptr<const ProfileMap> map, const ModulationField& field, int m);

// Jet coefficients of eps d_t + f - eps^2 d_x^2 acting on the ansatz at time node i, up to `order`.
std::vector<RMat> operator_jet(const ExpansionData& e, int i, int order);

struct AnsatzEval {
  RVec x;
  RMat u;         // rows: fine points, cols: components
  RMat residual;  // eps u_t + f(u) - eps^2 u_xx by exact chain rule; empty unless requested
};

// u^{eps,m}(t, .) on n_points equispaced points of [0, L); `order` < 0 means e.order.
AnsatzEval evaluate_ansatz(const ExpansionData& e, double eps, double t, int n_points, bool with_residual = false,
                           int order = -1);

// Points per fast wavelength needed for evaluation and the smallest power-of-two grid providing it.
int fine_grid_size(const ExpansionData& e, double eps, int points_per_wavelength = 64);

// Sum_{j <= s} eps^{2j} ||d_x^j h||^2 over [0, L), square root; rows of h are equispaced samples.
double hseps_norm(const RMat& h, double length, double eps, int s);
double l2_norm(const RMat& h, double length);

struct ResidualReport {
  int m = 0;
  int s = 0;
  std::vector<double> eps;
  std::vector<double> l2;
  std::vector<double> hs;
  std::vector<int> points;
  double slope_l2 = 0.0;
  double slope_hs = 0.0;
};

// Least-squares slope of log y against log x; NaN with fewer than 3 points.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Sup over `n_snapshots` equispaced times in [0, T] of the residual norms.
ResidualReport residual_order_study(const ExpansionData& e, const std::vector<double>& eps, int s,
                                    int n_snapshots = 5, int order = -1);

}  // namespace hfw
