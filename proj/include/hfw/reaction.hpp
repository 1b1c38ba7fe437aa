#pragma once

#include <map>
#include <string>
#include <vector>

#include "hfw/jet.hpp"
#include "hfw/spectral.hpp"

namespace hfw {

struct Monomial {
  double coef = 0.0;
  std::vector<int> exponents;  // one per state component
};

// Polynomial reaction term f: R^n -> R^n, sign as in eps u_t + f(u) = eps^2 u_xx.
// Derivatives are exact monomial differentiation.
class ReactionSystem {
 public:
  ReactionSystem(std::string name, int n, std::vector<std::vector<Monomial>> components,
                 std::map<std::string, double> parameters = {});

  const std::string& name() const { return name_; }
  int dim() const { return n_; }
  const std::map<std::string, double>& parameters() const { return params_; }
  double parameter(const std::string& key) const;
  const std::vector<std::vector<Monomial>>& components() const { return comps_; }
  int degree() const { return degree_; }
  // Highest derivative order exposed; derivatives beyond the degree are zero,
  // so one order past the degree is available exactly.
  int max_derivative_order() const { return degree_ + 1; }

  RVec f(const RVec& u) const;
  RMat jacobian(const RVec& u) const;
  // Tensor d^r f_i / du_{j1}..du_{jr}, flattened at index i + n (j1 + n (j2 + ...)).
  std::vector<double> derivative_tensor(const RVec& u, int order) const;
  // d^r f(u)[v_1, .., v_r].
  RVec derivative_apply(const RVec& u, const std::vector<RVec>& dirs) const;

  // Row-batched versions: each row of U is a state.
  Eigen::ArrayXXd f_rows(const Eigen::ArrayXXd& u) const;
  Eigen::ArrayXXd derivative_apply_rows(const Eigen::ArrayXXd& u,
                                        const std::vector<const Eigen::ArrayXXd*>& dirs) const;
  // Jacobian entries per row: result[i * n + j] is the column of d f_i / d u_j.
  std::vector<Eigen::ArrayXd> jacobian_rows(const Eigen::ArrayXXd& u) const;

 private:
  Eigen::ArrayXXd partial_rows(const std::vector<Eigen::ArrayXXd>& powers, const std::vector<int>& alpha,
                               int rows) const;
  std::vector<Eigen::ArrayXXd> power_table(const Eigen::ArrayXXd& u) const;

  std::string name_;
  int n_;
  std::vector<std::vector<Monomial>> comps_;
  std::map<std::string, double> params_;
  int degree_ = 0;
};

ReactionSystem make_lambda_omega(double omega0, double omega1);
ReactionSystem make_brusselator(double a, double b);

// Faa di Bruno composition of the reaction term with a jet of row-batched states.
EpsJet<Eigen::ArrayXXd> jet_compose(const ReactionSystem& sys, const EpsJet<Eigen::ArrayXXd>& jet);

struct AnalyticWaveTrain {
  double k = 0.0;
  double omega = 0.0;
  double r0 = 0.0;
  RVec profile(double theta) const;
  PeriodicField sample(const TorusGrid& g) const;
};

// Closed-form lambda-omega wave train; the system must come from make_lambda_omega.
AnalyticWaveTrain analytic_wavetrain(const ReactionSystem& sys, double k);

// Residual omega p' + f(p) - k^2 p'' on the grid (spectral derivatives).
PeriodicField profile_residual(const ReactionSystem& sys, double k, double omega, const PeriodicField& p);

}  // namespace hfw
