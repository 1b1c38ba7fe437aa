#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hfw/reaction.hpp"
#include "hfw/spectral.hpp"

namespace hfw {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrivialSolutionError : public SolverError {
 public:
  using SolverError::SolverError;
};

class ContinuationError : public SolverError {
 public:
  ContinuationError(const std::string& what, double last_good_k) : SolverError(what), last_good_k(last_good_k) {}
  double last_good_k;
};

struct WaveTrain {
  ReactionSystem system;
  double k = 0.0;
  double omega = 0.0;
  PeriodicField profile;
  double residual = 0.0;       // max-norm residual of the profile equation
  double phase_value = 0.0;    // value of the phase condition at the solution
  int newton_iterations = 0;

  const TorusGrid& grid() const { return profile.grid; }
  PeriodicField dtheta() const { return fourier_diff(profile, 1); }
};

struct NewtonOptions {
  double tol = 1e-11;
  int max_iter = 50;
};

// Newton on omega p' + f(p) - k^2 p'' = 0 with the phase condition <p - p_ref, p_ref'> = 0.
// p_ref defaults to the guess.
WaveTrain solve_profile(const ReactionSystem& sys, double k, const PeriodicField& guess, double omega_guess,
                        const std::optional<PeriodicField>& p_ref = std::nullopt, const NewtonOptions& opt = {});

// Guess for a system without a closed form: relax v_t = k^2 v'' - f(v) from a perturbed
// equilibrium, then fit omega by least squares on v_t = omega v'. Returns (profile, omega).
std::pair<PeriodicField, double> relaxation_guess(const ReactionSystem& sys, double k, const TorusGrid& grid,
                                                  const RVec& base_state, double perturbation, double t_final,
                                                  unsigned seed = 0);

struct WaveFamily {
  std::vector<double> k_samples;
  std::vector<WaveTrain> members;

  double k_min() const { return k_samples.front(); }
  double k_max() const { return k_samples.back(); }
  // Local degree-4 interpolation through the 5 nearest samples (of all if fewer).
  double omega_at(double k) const;
  const WaveTrain& nearest(double k) const;
};

// Marching continuation from start (which must sit at k_min or k_max).
WaveFamily continue_family(const WaveTrain& start, double k_min, double k_max, int n_steps,
                           const NewtonOptions& opt = {});

struct OmegaDerivatives {
  double d1 = 0.0;
  double d2 = 0.0;
};
OmegaDerivatives omega_derivatives(const WaveFamily& family, double k);

struct TransversalityVerdict {
  bool simple = false;
  cplx zero_eig;
  double gap = 0.0;            // second-smallest eigenvalue modulus
  double kernel_angle = 0.0;   // angle between the kernel eigenvector and p' (radians)
};

TransversalityVerdict check_transversality(const WaveTrain& w);
// Same test on an arbitrary operator matrix; `expected_kernel` may be empty.
TransversalityVerdict transversality_from_matrix(const RMat& op, const RVec& expected_kernel);

}  // namespace hfw
