#include "hfw/reaction.hpp"

#include <cmath>
#include <stdexcept>

namespace hfw {

namespace {

double falling(int e, int a) {
  double v = 1.0;
  for (int i = 0; i < a; ++i) v *= (e - i);
  return v;
}

// Merges monomials with identical exponents and drops zeros.
std::vector<Monomial> normalize(const std::vector<Monomial>& in, int n) {
  std::map<std::vector<int>, double> acc;
  for (const auto& m : in) {
    if (static_cast<int>(m.exponents.size()) != n) throw std::invalid_argument("monomial exponent count != n");
    for (int e : m.exponents) {
      if (e < 0) throw std::invalid_argument("negative monomial exponent");
    }
    if (!std::isfinite(m.coef)) throw std::invalid_argument("non-finite monomial coefficient");
    acc[m.exponents] += m.coef;
  }
  std::vector<Monomial> out;
  for (const auto& [e, c] : acc) {
    if (c != 0.0) out.push_back({c, e});
  }
  return out;
}

Monomial mono(double c, std::vector<int> e) { return {c, std::move(e)}; }

}  // namespace

ReactionSystem::ReactionSystem(std::string name, int n, std::vector<std::vector<Monomial>> components,
                               std::map<std::string, double> parameters)
    : name_(std::move(name)), n_(n), params_(std::move(parameters)) {
  if (n < 1) throw std::invalid_argument("ReactionSystem: dimension must be positive");
  if (static_cast<int>(components.size()) != n) throw std::invalid_argument("ReactionSystem: need n components");
  for (auto& c : components) {
    comps_.push_back(normalize(c, n));
    for (const auto& m : comps_.back()) {
      int d = 0;
      for (int e : m.exponents) d += e;
      degree_ = std::max(degree_, d);
    }
  }
}

double ReactionSystem::parameter(const std::string& key) const {
  auto it = params_.find(key);
  if (it == params_.end()) throw std::out_of_range("ReactionSystem: no parameter " + key);
  return it->second;
}

std::vector<Eigen::ArrayXXd> ReactionSystem::power_table(const Eigen::ArrayXXd& u) const {
  if (u.cols() != n_) throw std::invalid_argument("state rows must have n columns");
  std::vector<Eigen::ArrayXXd> powers(n_);
  for (int l = 0; l < n_; ++l) {
    powers[l].resize(u.rows(), degree_ + 1);
    powers[l].col(0).setOnes();
    for (int e = 1; e <= degree_; ++e) powers[l].col(e) = powers[l].col(e - 1) * u.col(l);
  }
  return powers;
}

Eigen::ArrayXXd ReactionSystem::partial_rows(const std::vector<Eigen::ArrayXXd>& powers,
                                             const std::vector<int>& alpha, int rows) const {
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(rows, n_);
  Eigen::ArrayXd term(rows);
  for (int i = 0; i < n_; ++i) {
    for (const auto& m : comps_[i]) {
      double c = m.coef;
      bool vanishes = false;
      for (int l = 0; l < n_; ++l) {
        if (m.exponents[l] < alpha[l]) {
          vanishes = true;
          break;
        }
        c *= falling(m.exponents[l], alpha[l]);
      }
      if (vanishes) continue;
      term.setConstant(c);
      for (int l = 0; l < n_; ++l) {
        int e = m.exponents[l] - alpha[l];
        if (e > 0) term *= powers[l].col(e);
      }
      out.col(i) += term;
    }
  }
  return out;
}

Eigen::ArrayXXd ReactionSystem::f_rows(const Eigen::ArrayXXd& u) const {
  return partial_rows(power_table(u), std::vector<int>(n_, 0), static_cast<int>(u.rows()));
}

Eigen::ArrayXXd ReactionSystem::derivative_apply_rows(const Eigen::ArrayXXd& u,
                                                      const std::vector<const Eigen::ArrayXXd*>& dirs) const {
  const int rows = static_cast<int>(u.rows());
  const int r = static_cast<int>(dirs.size());
  auto powers = power_table(u);
  if (r == 0) return partial_rows(powers, std::vector<int>(n_, 0), rows);
  if (r > degree_) return Eigen::ArrayXXd::Zero(rows, n_);
  for (const auto* d : dirs) {
    if (d->rows() != rows || d->cols() != n_) throw std::invalid_argument("direction shape mismatch");
  }
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(rows, n_);
  std::vector<int> sel(r, 0);
  long total = 1;
  for (int k = 0; k < r; ++k) total *= n_;
  for (long code = 0; code < total; ++code) {
    long c = code;
    std::vector<int> alpha(n_, 0);
    Eigen::ArrayXd weight = Eigen::ArrayXd::Ones(rows);
    for (int k = 0; k < r; ++k) {
      sel[k] = static_cast<int>(c % n_);
      c /= n_;
      ++alpha[sel[k]];
      weight *= dirs[k]->col(sel[k]);
    }
    Eigen::ArrayXXd part = partial_rows(powers, alpha, rows);
    out += part.colwise() * weight;
  }
  return out;
}

std::vector<Eigen::ArrayXd> ReactionSystem::jacobian_rows(const Eigen::ArrayXXd& u) const {
  const int rows = static_cast<int>(u.rows());
  auto powers = power_table(u);
  std::vector<Eigen::ArrayXd> out(n_ * n_);
  for (int j = 0; j < n_; ++j) {
    std::vector<int> alpha(n_, 0);
    alpha[j] = 1;
    Eigen::ArrayXXd part = partial_rows(powers, alpha, rows);
    for (int i = 0; i < n_; ++i) out[i * n_ + j] = part.col(i);
  }
  return out;
}

RVec ReactionSystem::f(const RVec& u) const {
  Eigen::ArrayXXd row = u.transpose().array();
  return f_rows(row).row(0).transpose().matrix();
}

RMat ReactionSystem::jacobian(const RVec& u) const {
  Eigen::ArrayXXd row = u.transpose().array();
  auto cols = jacobian_rows(row);
  RMat j(n_, n_);
  for (int a = 0; a < n_; ++a) {
    for (int b = 0; b < n_; ++b) j(a, b) = cols[a * n_ + b](0);
  }
  return j;
}

std::vector<double> ReactionSystem::derivative_tensor(const RVec& u, int order) const {
  if (order < 0) throw std::invalid_argument("derivative order must be >= 0");
  Eigen::ArrayXXd row = u.transpose().array();
  auto powers = power_table(row);
  long slots = 1;
  for (int k = 0; k < order; ++k) slots *= n_;
  std::vector<double> out(n_ * slots, 0.0);
  for (long code = 0; code < slots; ++code) {
    long c = code;
    std::vector<int> alpha(n_, 0);
    for (int k = 0; k < order; ++k) {
      ++alpha[c % n_];
      c /= n_;
    }
    Eigen::ArrayXXd part = partial_rows(powers, alpha, 1);
    for (int i = 0; i < n_; ++i) out[i + n_ * code] = part(0, i);
  }
  return out;
}

RVec ReactionSystem::derivative_apply(const RVec& u, const std::vector<RVec>& dirs) const {
  Eigen::ArrayXXd row = u.transpose().array();
  std::vector<Eigen::ArrayXXd> d;
  d.reserve(dirs.size());
  for (const auto& v : dirs) d.push_back(v.transpose().array());
  std::vector<const Eigen::ArrayXXd*> ptrs;
  for (const auto& x : d) ptrs.push_back(&x);
  return derivative_apply_rows(row, ptrs).row(0).transpose().matrix();
}

ReactionSystem make_lambda_omega(double omega0, double omega1) {
  // f = -[(1 - |u|^2) u + (omega0 + omega1 |u|^2) J u], J u = (-v, u).
  std::vector<Monomial> f1 = {mono(-1.0, {1, 0}), mono(1.0, {3, 0}), mono(1.0, {1, 2}), mono(omega0, {0, 1}),
                              mono(omega1, {2, 1}), mono(omega1, {0, 3})};
  std::vector<Monomial> f2 = {mono(-1.0, {0, 1}), mono(1.0, {2, 1}), mono(1.0, {0, 3}), mono(-omega0, {1, 0}),
                              mono(-omega1, {3, 0}), mono(-omega1, {1, 2})};
  return ReactionSystem("lambda_omega", 2, {f1, f2}, {{"omega0", omega0}, {"omega1", omega1}});
}

ReactionSystem make_brusselator(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("brusselator needs a > 0, b > 0");
  std::vector<Monomial> f1 = {mono(-a, {0, 0}), mono(b + 1.0, {1, 0}), mono(-1.0, {2, 1})};
  std::vector<Monomial> f2 = {mono(-b, {1, 0}), mono(1.0, {2, 1})};
  return ReactionSystem("brusselator", 2, {f1, f2}, {{"a", a}, {"b", b}});
}

EpsJet<Eigen::ArrayXXd> jet_compose(const ReactionSystem& sys, const EpsJet<Eigen::ArrayXXd>& jet) {
  auto ml = [&sys](const Eigen::ArrayXXd& u0, const std::vector<const Eigen::ArrayXXd*>& dirs) {
    return sys.derivative_apply_rows(u0, dirs);
  };
  return jet_compose(ml, sys.max_derivative_order(), jet);
}

RVec AnalyticWaveTrain::profile(double theta) const {
  RVec p(2);
  p << r0 * std::cos(theta), r0 * std::sin(theta);
  return p;
}

PeriodicField AnalyticWaveTrain::sample(const TorusGrid& g) const {
  return sample_field(g, 2, [this](double t) { return profile(t); });
}

AnalyticWaveTrain analytic_wavetrain(const ReactionSystem& sys, double k) {
  if (sys.name() != "lambda_omega") throw std::invalid_argument("analytic_wavetrain: lambda-omega systems only");
  if (!(std::abs(k) < 1.0)) throw std::invalid_argument("analytic_wavetrain: |k| must be < 1");
  if (k == 0.0) throw std::invalid_argument("analytic_wavetrain: k must be nonzero");
  AnalyticWaveTrain w;
  w.k = k;
  w.r0 = std::sqrt(1.0 - k * k);
  w.omega = sys.parameter("omega0") + sys.parameter("omega1") * (1.0 - k * k);
  return w;
}

PeriodicField profile_residual(const ReactionSystem& sys, double k, double omega, const PeriodicField& p) {
  PeriodicField d1 = fourier_diff(p, 1);
  PeriodicField d2 = fourier_diff(p, 2);
  Eigen::ArrayXXd fp = sys.f_rows(p.values.array());
  RMat r = omega * d1.values + fp.matrix() - k * k * d2.values;
  return PeriodicField(p.grid, r);
}

}  // namespace hfw
