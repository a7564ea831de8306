// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Truncated Taylor jets in one variable.
///
/// A `Jet<S>` of order K stores the Taylor coefficients c_0..c_K of a function
/// about a point, so derivative k equals k! * c_k. Products truncate to the
/// smaller of the two orders; differentiation lowers the order by one. The
/// order bookkeeping catches expressions that silently run out of derivatives.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace clab {

template <typename S>
struct is_complex : std::false_type {};
template <typename R>
struct is_complex<std::complex<R>> : std::true_type {};

namespace detail {
inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}
}  // namespace detail

template <typename S>
class Jet {
 public:
  using scalar_type = S;

  Jet() = default;

  explicit Jet(int order) : c_(static_cast<std::size_t>(order + 1), S{}) {
    if (order < 0) throw std::invalid_argument("Jet: negative order");
  }

  /// Constant function `value` carried to `order`.
  static Jet constant(S value, int order) {
    Jet j(order);
    j.c_[0] = value;
    return j;
  }

  /// The identity function x evaluated about x0.
  static Jet variable(double x0, int order) {
    Jet j(order);
    j.c_[0] = S(x0);
    if (order >= 1) j.c_[1] = S(1);
    return j;
  }

  /// Build from derivative values f(x0), f'(x0), ..., f^(K)(x0).
  static Jet from_derivatives(const std::vector<S>& derivs) {
    if (derivs.empty()) throw std::invalid_argument("Jet: no derivatives");
    Jet j(static_cast<int>(derivs.size()) - 1);
    for (std::size_t k = 0; k < derivs.size(); ++k)
      j.c_[k] = derivs[k] / S(detail::factorial(static_cast<int>(k)));
    return j;
  }

  [[nodiscard]] int order() const { return static_cast<int>(c_.size()) - 1; }
  [[nodiscard]] S value() const { return c_.at(0); }
  [[nodiscard]] S coeff(int k) const { return c_.at(static_cast<std::size_t>(k)); }
  S& coeff(int k) { return c_.at(static_cast<std::size_t>(k)); }

  [[nodiscard]] S derivative(int k) const {
    if (k > order())
      throw std::out_of_range("Jet: derivative " + std::to_string(k) +
                              " exceeds order " + std::to_string(order()));
    return c_[static_cast<std::size_t>(k)] * S(detail::factorial(k));
  }

  /// d/dx of the jet; the result has order K-1.
  [[nodiscard]] Jet dx() const {
    if (order() < 1) throw std::out_of_range("Jet: cannot differentiate order-0 jet");
    Jet d(order() - 1);
    for (int k = 0; k <= d.order(); ++k) d.c_[k] = c_[k + 1] * S(k + 1);
    return d;
  }

  [[nodiscard]] Jet dx(int n) const {
    Jet d = *this;
    for (int i = 0; i < n; ++i) d = d.dx();
    return d;
  }

  [[nodiscard]] Jet truncated(int order) const {
    if (order > this->order()) throw std::out_of_range("Jet: cannot raise order");
    Jet j(order);
    std::copy_n(c_.begin(), order + 1, j.c_.begin());
    return j;
  }

  Jet& operator+=(const Jet& o) {
    shrink_to(o.order());
    for (int k = 0; k <= order(); ++k) c_[k] += o.c_[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    shrink_to(o.order());
    for (int k = 0; k <= order(); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Jet& operator*=(S s) {
    for (auto& v : c_) v *= s;
    return *this;
  }
  Jet& operator+=(S s) {
    c_.at(0) += s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) {
    for (auto& v : a.c_) v = -v;
    return a;
  }
  friend Jet operator*(Jet a, S s) { return a *= s; }
  friend Jet operator*(S s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, S s) {
    for (auto& v : a.c_) v /= s;
    return a;
  }
  friend Jet operator+(Jet a, S s) { return a += s; }
  friend Jet operator+(S s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, S s) { return a += -s; }
  friend Jet operator-(S s, Jet a) { return (-a) += s; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    const int n = std::min(a.order(), b.order());
    Jet r(n);
    for (int i = 0; i <= n; ++i) {
      S acc{};
      for (int j = 0; j <= i; ++j) acc += a.c_[j] * b.c_[i - j];
      r.c_[i] = acc;
    }
    return r;
  }

 private:
  void shrink_to(int order) {
    if (order < this->order()) c_.resize(static_cast<std::size_t>(order + 1));
  }

  std::vector<S> c_;
};

using RealJet = Jet<double>;
using ComplexJet = Jet<std::complex<double>>;

/// Complex conjugate; identity for real jets.
template <typename S>
Jet<S> conj(const Jet<S>& a) {
  if constexpr (is_complex<S>::value) {
    Jet<S> r(a.order());
    for (int k = 0; k <= a.order(); ++k) r.coeff(k) = std::conj(a.coeff(k));
    return r;
  } else {
    return a;
  }
}

template <typename S>
Jet<S> exp(const Jet<S>& a) {
  // g = e^f satisfies g' = f' g, giving k g_k = sum_{j=1..k} j f_j g_{k-j}.
  Jet<S> g(a.order());
  g.coeff(0) = std::exp(a.coeff(0));
  for (int k = 1; k <= a.order(); ++k) {
    S acc{};
    for (int j = 1; j <= k; ++j) acc += S(j) * a.coeff(j) * g.coeff(k - j);
    g.coeff(k) = acc / S(k);
  }
  return g;
}

inline ComplexJet to_complex(const RealJet& a) {
  ComplexJet r(a.order());
  for (int k = 0; k <= a.order(); ++k) r.coeff(k) = a.coeff(k);
  return r;
}

/// Polynomial sum_k p[k] x^k about x0 as a real jet of the given order.
inline RealJet polynomial_jet(const std::vector<double>& p, double x0, int order) {
  RealJet x = RealJet::variable(x0, order);
  RealJet acc = RealJet::constant(0.0, order);
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + *it;
  return acc;
}

}  // namespace clab
