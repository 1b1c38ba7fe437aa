#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

namespace hfw {

// Truncated power series sum_j eps^j c_j, j = 0..order. T needs +, -, elementwise *
// and scalar *, e.g. double or Eigen::ArrayXXd.
template <class T>
class EpsJet {
 public:
  EpsJet() = default;
  EpsJet(int order, const T& zero) : c_(order + 1, zero) {}
  explicit EpsJet(std::vector<T> coefficients) : c_(std::move(coefficients)) {
    if (c_.empty()) throw std::invalid_argument("EpsJet needs at least one coefficient");
  }

  int order() const { return static_cast<int>(c_.size()) - 1; }
  const T& operator[](int j) const { return c_.at(j); }
  T& operator[](int j) { return c_.at(j); }
  const std::vector<T>& coefficients() const { return c_; }

  EpsJet& operator+=(const EpsJet& o) {
    check(o);
    for (size_t j = 0; j < c_.size(); ++j) c_[j] = c_[j] + o.c_[j];
    return *this;
  }
  EpsJet& operator-=(const EpsJet& o) {
    check(o);
    for (size_t j = 0; j < c_.size(); ++j) c_[j] = c_[j] - o.c_[j];
    return *this;
  }
  friend EpsJet operator+(EpsJet a, const EpsJet& b) { return a += b; }
  friend EpsJet operator-(EpsJet a, const EpsJet& b) { return a -= b; }
  friend EpsJet operator*(const EpsJet& a, const EpsJet& b) {
    a.check(b);
    EpsJet out = a;
    for (int q = 0; q <= a.order(); ++q) {
      T acc = a.c_[0] * b.c_[q];
      for (int j = 1; j <= q; ++j) acc = acc + a.c_[j] * b.c_[q - j];
      out.c_[q] = acc;
    }
    return out;
  }
  friend EpsJet operator*(double s, EpsJet a) {
    for (auto& c : a.c_) c = s * c;
    return a;
  }
  // Multiplication by eps, truncated.
  EpsJet shifted() const {
    EpsJet out = *this;
    for (int j = order(); j >= 1; --j) out.c_[j] = c_[j - 1];
    out.c_[0] = 0.0 * c_[0];
    return out;
  }

 private:
  void check(const EpsJet& o) const {
    if (o.c_.size() != c_.size()) throw std::invalid_argument("EpsJet order mismatch");
  }
  std::vector<T> c_;
};

// Calls fn(parts) for every ordered composition of q into positive parts.
template <class Fn>
void for_each_composition(int q, Fn&& fn) {
  std::vector<int> parts;
  auto rec = [&](auto&& self, int remaining) -> void {
    if (remaining == 0) {
      fn(parts);
      return;
    }
    for (int p = 1; p <= remaining; ++p) {
      parts.push_back(p);
      self(self, remaining - p);
      parts.pop_back();
    }
  };
  rec(rec, q);
}

// Faa di Bruno: coefficient q of f(sum eps^j u_j) equals
//   sum_r (1/r!) sum_{j_1+..+j_r = q, j_i >= 1} d^r f(u_0)[u_{j_1}, .., u_{j_r}].
// `multilinear(u0, dirs)` returns d^r f(u0)[dirs...] (r = dirs.size(); r = 0 gives f(u0)).
// `max_derivative` is the highest derivative order the map provides.
template <class T, class Multilinear>
EpsJet<T> jet_compose(const Multilinear& multilinear, int max_derivative, const EpsJet<T>& jet) {
  if (jet.order() > max_derivative - 1) {
    throw std::invalid_argument("jet_compose: insufficient derivative order of f");
  }
  std::vector<T> out;
  std::vector<const T*> none;
  out.push_back(multilinear(jet[0], none));
  for (int q = 1; q <= jet.order(); ++q) {
    T acc = 0.0 * out[0];
    for_each_composition(q, [&](const std::vector<int>& parts) {
      std::vector<const T*> dirs;
      for (int p : parts) dirs.push_back(&jet[p]);
      double fact = 1.0;
      for (size_t r = 2; r <= parts.size(); ++r) fact *= static_cast<double>(r);
      acc = acc + (1.0 / fact) * multilinear(jet[0], dirs);
    });
    out.push_back(acc);
  }
  return EpsJet<T>(std::move(out));
}

}  // namespace hfw
