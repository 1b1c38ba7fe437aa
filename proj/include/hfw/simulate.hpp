#pragma once

#include <string>
#include <vector>

#include "hfw/modulation.hpp"

namespace hfw {

enum class Scheme { Strang, ETDRK4 };
const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

struct StepperSettings {
  Scheme scheme = Scheme::Strang;
  double dt = 0.0;  // unscaled; 0 selects min(0.25 dx'^2, 0.01)
};

class SimulationError : public SolverError {
 public:
  using SolverError::SolverError;
};

// Solution of v_t' = v_x'x' - f(v) on [0, L/eps) reported in scaled variables (t = eps t', x = eps x').
struct SimulationRun {
  double eps = 0.0;
  double length = 0.0;  // scaled domain length L
  int nx = 0;
  Scheme scheme = Scheme::Strang;
  double dt = 0.0;  // largest unscaled step used
  int steps = 0;
  std::string provenance;
  std::vector<double> times;  // scaled
  std::vector<RMat> snapshots;
};

double default_time_step(double dx_unscaled);

// u0 holds nx equispaced samples (rows) of the state on the scaled domain [0, L).
// Snapshot times are scaled, increasing, in [0, T].
SimulationRun simulate_direct(const ReactionSystem& sys, double eps, double length, const RMat& u0,
                              const std::vector<double>& snapshot_times, const StepperSettings& settings = {});

struct ErrorNorms {
  double t = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  double hs = 0.0;
};

ErrorNorms error_norms(const RMat& a, const RMat& b, double length, double eps, int s);

struct ConvergenceEntry {
  double eps = 0.0;
  int nx = 0;
  double dt = 0.0;
  double initial_error = 0.0;  // h^s norm of u(0) - u^{eps,m}(0)
  double sup_hs = 0.0;
  double sup_linf = 0.0;
  double quad_hs = 0.0;  // (int_0^T ||e||^2 dt)^{1/2}, trapezoid over snapshots
  double sup_hs_next = 0.0;  // against the order m+1 ansatz
  double sup_linf_next = 0.0;
  std::vector<ErrorNorms> snapshots;
};

struct ConvergenceReport {
  int m = 0;
  int s = 0;
  Scheme scheme = Scheme::ETDRK4;
  std::vector<ConvergenceEntry> entries;
  double slope_hs = 0.0;
  double slope_linf = 0.0;
  double slope_quad = 0.0;
  double slope_hs_next = 0.0;
  bool has_next = false;
};

struct StudyOptions {
  int s = 2;
  int n_snapshots = 6;  // equispaced in [0, T], including both ends
  int points_per_wavelength = 32;
  StepperSettings stepper{Scheme::ETDRK4, 0.0};
};

// Prescribed-data runs from u^{eps,m}(0); compares with the order-m ansatz and, when the
// expansion carries order m+1, with that one too.
ConvergenceReport convergence_study(const ExpansionData& e, int m, const std::vector<double>& eps,
                                    const StudyOptions& opt = {});

struct LayerReport {
  double eps = 0.0;
  double delta = 0.0;
  double perturbation_hs = 0.0;  // achieved size of the initial perturbation
  double layer_growth = 0.0;     // max over [0, eps] of ||w(t)|| / ||w(0)||, w = perturbed - unperturbed
  double final_difference = 0.0;   // ||w(T)||
  double final_distance = 0.0;     // perturbed run against the ansatz at T
  double final_distance_unperturbed = 0.0;
  double sup_distance = 0.0;       // perturbed run against the ansatz, sup over [0, T]
  double constant = 0.0;           // sup_distance / eps^m
};

// Smooth random perturbation (slow Fourier modes, fixed seed) scaled to h^s size delta.
RMat smooth_perturbation(int nx, int dim, double length, double eps, int s, double delta, unsigned seed);

LayerReport initial_layer_probe(const ExpansionData& e, int m, double eps, double delta, unsigned seed = 0,
                                const StudyOptions& opt = {});

}  // namespace hfw
