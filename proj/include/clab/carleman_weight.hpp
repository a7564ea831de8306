// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Carleman weights and the coefficients of the conjugated operator.
///
/// Both weights have the form a(x,t) = (e^{mu (psi(x) + s)} - e^K) / (t (T - t))
/// with l = lambda a, theta = e^l and phi = e^{mu (psi + s)} / (t (T - t)).
///   hat:   psi = x (1-x) e^{kappa (x-c)} / (c (1-c)), s = 3, K = 5 mu,
///          c the midpoint of the observation window, kappa = (2c-1)/(c(1-c));
///   tilde: psi = (x - x0)^2 + delta0, s = 0, K = 1.5 mu max psi.
/// The hat profile has a single critical point, at c, where it equals 1.
/// Spatial derivatives come from Taylor jets, so every partial is exact up to
/// rounding. theta itself is kept as log theta = l.

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "clab/errors.hpp"
#include "clab/jet.hpp"

namespace clab {

enum class WeightVariant { hat, tilde };

struct WeightSpec {
  WeightVariant variant = WeightVariant::hat;
  double lambda = 100.0;
  double mu = 2.0;
  double T = 1.0;
  double alpha = 0.3;  // observation window (alpha, beta), hat only
  double beta = 0.7;
  double x0 = 1.5;  // tilde only
  double delta0 = 6.0;

  /// The configured default lambda = 50 (T + T^2).
  static double default_lambda(double T) { return 50.0 * (T + T * T); }
  [[nodiscard]] double window_center() const { return 0.5 * (alpha + beta); }
};

/// Value and x-derivatives of l and l_t at a point, as jets in x.
struct WeightJets {
  RealJet l;
  RealJet lt;
};

using WeightJetFn = std::function<WeightJets(double x, double t, int order)>;

struct WeightEval {
  double x = 0.0;
  double t = 0.0;
  double a = 0.0;
  double l = 0.0;  // log theta
  double phi = 0.0;
  double log_phi = 0.0;
  double lx = 0.0, lxx = 0.0, lxxx = 0.0, lxxxx = 0.0;
  double lt = 0.0, lxt = 0.0, lxxt = 0.0;
  bool time_endpoint = false;  // t in {0, T}: theta = 0 limit, partials left at 0

  [[nodiscard]] double theta() const { return std::exp(l); }
};

class CarlemanWeight {
 public:
  static constexpr int kCheckGrid = 2048;

  explicit CarlemanWeight(WeightSpec spec) : spec_(spec) {
    require(spec_.lambda > 0.0 && std::isfinite(spec_.lambda), "weight: lambda must be positive");
    require(spec_.mu > 0.0 && std::isfinite(spec_.mu), "weight: mu must be positive");
    require(spec_.T > 0.0 && std::isfinite(spec_.T), "weight: T must be positive");
    if (spec_.variant == WeightVariant::hat) {
      require(0.0 < spec_.alpha && spec_.alpha < spec_.beta && spec_.beta < 1.0,
              "weight: observation window must satisfy 0 < alpha < beta < 1");
      const double c = spec_.window_center();
      kappa_ = (2.0 * c - 1.0) / (c * (1.0 - c));
      shift_ = 3.0;
      top_ = 5.0 * spec_.mu;
    } else {
      require(spec_.x0 > 1.0, "weight: x0 must exceed 1");
      require(spec_.delta0 > 0.0, "weight: delta0 must be positive");
      shift_ = 0.0;
      top_ = 1.5 * spec_.mu * psi_max();
    }
    check_profile();
  }

  [[nodiscard]] const WeightSpec& spec() const { return spec_; }

  /// max psi over [0,1]: 1 for hat, psi(0) for tilde (x0 > 1).
  [[nodiscard]] double psi_max() const {
    if (spec_.variant == WeightVariant::hat) return 1.0;
    return spec_.x0 * spec_.x0 + spec_.delta0;
  }

  [[nodiscard]] RealJet psi_jet(double x, int order) const {
    const RealJet X = RealJet::variable(x, order);
    if (spec_.variant == WeightVariant::tilde) {
      const RealJet d = X - spec_.x0;
      return d * d + spec_.delta0;
    }
    const double c = spec_.window_center();
    return X * (1.0 - X) * exp((X - c) * kappa_) / (c * (1.0 - c));
  }

  [[nodiscard]] double psi(double x) const { return psi_jet(x, 0).value(); }

  /// e^{mu (psi + s)} as a jet; phi = this * g(t).
  [[nodiscard]] RealJet exponent_jet(double x, int order) const {
    return exp((psi_jet(x, order) + shift_) * spec_.mu);
  }

  /// 1 / (t (T - t)) and its t-derivative.
  [[nodiscard]] double time_factor(double t) const { return 1.0 / (t * (spec_.T - t)); }
  [[nodiscard]] double time_factor_dt(double t) const {
    const double g = time_factor(t);
    return -(spec_.T - 2.0 * t) * g * g;
  }

  [[nodiscard]] WeightJets jets(double x, double t, int order) const {
    require(t > 0.0 && t < spec_.T, "weight: jets need 0 < t < T");
    RealJet n = exponent_jet(x, order) - std::exp(top_);
    return {n * (spec_.lambda * time_factor(t)), n * (spec_.lambda * time_factor_dt(t))};
  }

  [[nodiscard]] WeightJetFn jet_fn() const {
    return [w = *this](double x, double t, int order) { return w.jets(x, t, order); };
  }

  [[nodiscard]] WeightEval eval(double x, double t) const {
    require(t >= 0.0 && t <= spec_.T, "weight: t outside [0, T]");
    WeightEval e;
    e.x = x;
    e.t = t;
    if (t == 0.0 || t == spec_.T) {
      e.time_endpoint = true;
      e.a = -std::numeric_limits<double>::infinity();
      e.l = e.a;
      e.phi = std::numeric_limits<double>::infinity();
      e.log_phi = e.phi;
      return e;
    }
    const RealJet E = exponent_jet(x, 4);
    const double g = time_factor(t);
    const double gt = time_factor_dt(t);
    const double lam = spec_.lambda;
    const double n = E.value() - std::exp(top_);
    e.a = n * g;
    e.l = lam * e.a;
    e.phi = E.value() * g;
    e.log_phi = spec_.mu * (psi(x) + shift_) + std::log(g);
    e.lx = lam * g * E.derivative(1);
    e.lxx = lam * g * E.derivative(2);
    e.lxxx = lam * g * E.derivative(3);
    e.lxxxx = lam * g * E.derivative(4);
    e.lt = lam * n * gt;
    e.lxt = lam * gt * E.derivative(1);
    e.lxxt = lam * gt * E.derivative(2);
    return e;
  }

  /// log theta and log(lambda phi) without the derivative work.
  [[nodiscard]] double log_theta(double x, double t) const {
    if (t <= 0.0 || t >= spec_.T) return -std::numeric_limits<double>::infinity();
    const double ex = std::exp(spec_.mu * (psi(x) + shift_));
    return spec_.lambda * (ex - std::exp(top_)) * time_factor(t);
  }
  [[nodiscard]] double log_lambda_phi(double x, double t) const {
    return std::log(spec_.lambda) + spec_.mu * (psi(x) + shift_) + std::log(time_factor(t));
  }

 private:
  void check_profile() const {
    const int n = kCheckGrid;
    auto at = [n](int i) { return static_cast<double>(i) / static_cast<double>(n - 1); };
    if (spec_.variant == WeightVariant::tilde) {
      double mx = 0.0;
      double mn = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        mx = std::max(mx, psi(at(i)));
        mn = std::min(mn, psi(at(i)));
      }
      if (mn < 0.75 * mx)
        throw InvalidInput("weight: tilde profile violates psi >= 3/4 max psi (delta0 too small)");
      return;
    }
    if (std::abs(psi(0.0)) > 1e-14 || std::abs(psi(1.0)) > 1e-14)
      throw InvalidInput("weight: hat profile must vanish at both ends");
    if (!(psi_jet(0.0, 1).derivative(1) > 0.0) || !(psi_jet(1.0, 1).derivative(1) < 0.0))
      throw InvalidInput("weight: hat profile has wrong boundary slopes");
    double mx = 0.0;
    double min_slope = std::numeric_limits<double>::infinity();
    for (int i = 1; i + 1 < n; ++i) {
      const double x = at(i);
      const RealJet p = psi_jet(x, 1);
      if (!(p.value() > 0.0)) throw InvalidInput("weight: hat profile not positive inside (0,1)");
      mx = std::max(mx, p.value());
      if (x <= spec_.alpha || x >= spec_.beta)
        min_slope = std::min(min_slope, std::abs(p.derivative(1)));
    }
    if (mx > 1.0 + 1e-12 || std::abs(psi(spec_.window_center()) - 1.0) > 1e-12)
      throw InvalidInput("weight: hat profile maximum is not 1");
    if (!(min_slope > 0.0))
      throw InvalidInput("weight: hat profile has a critical point outside the window");
  }

  WeightSpec spec_;
  double kappa_ = 0.0;
  double shift_ = 0.0;
  double top_ = 0.0;
};

/// l = sum_{i,j} p[j][i] x^i t^j: a smooth synthetic weight for identity checks.
class PolynomialWeight {
 public:
  explicit PolynomialWeight(std::vector<std::vector<double>> by_time_power)
      : p_(std::move(by_time_power)) {
    require(!p_.empty(), "PolynomialWeight: no coefficients");
  }

  [[nodiscard]] WeightJets jets(double x, double t, int order) const {
    RealJet l = RealJet::constant(0.0, order);
    RealJet lt = RealJet::constant(0.0, order);
    for (std::size_t j = 0; j < p_.size(); ++j) {
      const RealJet q = polynomial_jet(p_[j], x, order);
      l += q * std::pow(t, static_cast<double>(j));
      if (j > 0) lt += q * (static_cast<double>(j) * std::pow(t, static_cast<double>(j - 1)));
    }
    return {l, lt};
  }

  [[nodiscard]] WeightJetFn jet_fn() const {
    return [w = *this](double x, double t, int order) { return w.jets(x, t, order); };
  }

 private:
  std::vector<std::vector<double>> p_;
};

template <typename R>
struct complex_of {
  using type = std::complex<double>;
};
template <>
struct complex_of<RealJet> {
  using type = ComplexJet;
};

/// Coefficients of theta L (theta^{-1} u) = I_2 + I_1 dt for real scalars or
/// real jets; A0 and D0 are complex.
template <typename R>
struct CoefficientBundle {
  using C = typename complex_of<R>::type;
  C A0;
  R A1, A2, A3;
  R B0, B1, B2;
  R C0, C1, C2, C3;
  C D0;
};

namespace detail {
inline std::complex<double> make_complex(double re, double im) { return {re, im}; }
inline ComplexJet make_complex(const RealJet& re, const RealJet& im) {
  return to_complex(re) + to_complex(im) * std::complex<double>(0.0, 1.0);
}
}  // namespace detail

template <typename R>
CoefficientBundle<R> coefficients_from_partials(const R& lx, const R& lxx, const R& lxxx,
                                                const R& lxxxx, const R& lt) {
  CoefficientBundle<R> c;
  const R lx2 = lx * lx;
  const R lx3 = lx2 * lx;
  const R lx4 = lx2 * lx2;
  const R zero = lx * 0.0;
  c.A0 = detail::make_complex(lx4 + 4.0 * (lx * lxxx) - lxxxx - 6.0 * (lx2 * lxx) + 3.0 * (lxx * lxx),
                              zero - lt);
  c.A1 = -4.0 * lx3 + 12.0 * (lx * lxx) - 4.0 * lxxx;
  c.A2 = 6.0 * lx2 - 6.0 * lxx;
  c.A3 = -4.0 * lx;
  c.B0 = -6.0 * (lx2 * lxx) + 2.0 * (lxx * lxx) + 2.0 * (lx * lxxx) + lxxxx;
  c.B1 = 8.0 * (lx * lxx) - 4.0 * lxxx;
  c.B2 = -6.0 * lxx;
  c.C0 = lx4 + 2.0 * (lx * lxxx) - 2.0 * lxxxx + lxx * lxx;
  c.C1 = -4.0 * lx3 + 4.0 * (lx * lxx);
  c.C2 = 6.0 * lx2;
  c.C3 = -4.0 * lx;
  c.D0 = detail::make_complex(zero, zero - lt);
  return c;
}

inline CoefficientBundle<double> conjugated_coefficients(const WeightEval& w) {
  return coefficients_from_partials<double>(w.lx, w.lxx, w.lxxx, w.lxxxx, w.lt);
}

/// Jet version: the coefficients as functions of x about the jet point.
inline CoefficientBundle<RealJet> conjugated_coefficients(const WeightJets& w) {
  return coefficients_from_partials<RealJet>(w.l.dx(), w.l.dx(2), w.l.dx(3), w.l.dx(4), w.lt);
}

}  // namespace clab
