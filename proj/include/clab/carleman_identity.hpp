// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Pointwise checks of the weighted identity for the conjugated operator and
/// of the two multiplier identities.
///
/// A test field is y(x,t,w) = m(x,t) + w n(x,t), with w the Brownian value, so
/// dy = (m_t + w n_t) dt + n dW. Every quantity is carried as a `Proc`: its x-jet
/// at (t, w), at (t + dt, w), and its first two w-derivatives. A differential
/// is a `Diff` pair {dt part, dW part} with dW dW = dt. d(F) takes the time part
/// as a forward difference plus the Ito term F_ww / 2 and the dW part as F_w,
/// so the w-dependence is exact and the residual is pure time-differencing
/// error, first order in dt.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "clab/carleman_weight.hpp"
#include "clab/errors.hpp"
#include "clab/jet.hpp"
#include "clab/noise.hpp"

namespace clab {

using cjet = ComplexJet;

struct Proc {
  cjet v, vn, w, ww;

  static Proc deterministic(const cjet& now, const cjet& next) {
    return {now, next, now * 0.0, now * 0.0};
  }
  [[nodiscard]] Proc dx(int n = 1) const { return {v.dx(n), vn.dx(n), w.dx(n), ww.dx(n)}; }
  [[nodiscard]] int order() const { return v.order(); }
};

inline Proc operator+(const Proc& a, const Proc& b) {
  return {a.v + b.v, a.vn + b.vn, a.w + b.w, a.ww + b.ww};
}
inline Proc operator-(const Proc& a, const Proc& b) {
  return {a.v - b.v, a.vn - b.vn, a.w - b.w, a.ww - b.ww};
}
inline Proc operator*(const Proc& a, const Proc& b) {
  return {a.v * b.v, a.vn * b.vn, a.w * b.v + a.v * b.w, a.ww * b.v + 2.0 * (a.w * b.w) + a.v * b.ww};
}
inline Proc operator*(std::complex<double> s, const Proc& a) {
  return {a.v * s, a.vn * s, a.w * s, a.ww * s};
}
inline Proc conj(const Proc& a) { return {conj(a.v), conj(a.vn), conj(a.w), conj(a.ww)}; }

struct Diff {
  cjet dt, dw;

  [[nodiscard]] Diff dx(int n = 1) const { return {dt.dx(n), dw.dx(n)}; }
};

inline Diff operator+(const Diff& a, const Diff& b) { return {a.dt + b.dt, a.dw + b.dw}; }
inline Diff operator-(const Diff& a, const Diff& b) { return {a.dt - b.dt, a.dw - b.dw}; }
/// Function times differential; only the value at (t, w) enters.
inline Diff operator*(const cjet& f, const Diff& d) { return {f * d.dt, f * d.dw}; }
inline Diff operator*(std::complex<double> s, const Diff& d) { return {d.dt * s, d.dw * s}; }
inline Diff conj(const Diff& d) { return {conj(d.dt), conj(d.dw)}; }

inline Diff dt_term(const cjet& f) { return {f, f * 0.0}; }

/// Quadratic covariation d1 d2 = (d1.dw d2.dw) dt.
inline Diff covar(const Diff& a, const Diff& b) { return dt_term(a.dw * b.dw); }

/// Ito differential of F along one step of length h.
inline Diff ito(const Proc& F, double h) { return {(F.vn - F.v) / h + F.ww * 0.5, F.w}; }

/// y = m(x,t) + w n(x,t); a null n means a deterministic field.
struct TestField {
  std::function<cjet(double x, double t, int order)> m;
  std::function<cjet(double x, double t, int order)> n;

  [[nodiscard]] Proc at(double x, double t, double w, double h, int order) const {
    cjet v = m(x, t, order);
    cjet vn = m(x, t + h, order);
    cjet dw = v * 0.0;
    if (n) {
      dw = n(x, t, order);
      v += dw * w;
      vn += n(x, t + h, order) * w;
    }
    return {v, vn, dw, v * 0.0};
  }
};

/// Residual of one identity at one grid point: dt and dW parts, plus the size
/// of the left-hand side for scale.
struct PointResidual {
  std::complex<double> dt;
  std::complex<double> dw;
  double scale = 0.0;
};

namespace detail {
inline constexpr int kIdentityOrder = 12;
inline constexpr std::complex<double> kJ{0.0, 1.0};

inline Proc real_proc(const RealJet& now, const RealJet& next) {
  return Proc::deterministic(to_complex(now), to_complex(next));
}

inline PointResidual finish(const Diff& lhs, const Diff& rhs) {
  const Diff r = lhs - rhs;
  return {r.dt.value(), r.dw.value(), std::max(std::abs(lhs.dt.value()), std::abs(lhs.dw.value()))};
}
}  // namespace detail

/// Weighted identity at (x, t, w) with u = theta y and theta = e^l.
inline PointResidual identity_point(const TestField& y, const WeightJetFn& weight, double x, double t,
                                    double w, double h) {
  using detail::kJ;
  const int K = detail::kIdentityOrder;
  const WeightJets wn = weight(x, t, K);
  const WeightJets wp = weight(x, t + h, K);
  const auto cn = conjugated_coefficients(wn);
  const auto cp = conjugated_coefficients(wp);
  const Proc theta = detail::real_proc(exp(wn.l), exp(wp.l));
  const Proc Y = y.at(x, t, w, h, K);
  const Proc U = theta * Y;

  const Proc B0 = detail::real_proc(cn.B0, cp.B0);
  const Proc C1 = detail::real_proc(cn.C1, cp.C1);
  const Proc B2 = detail::real_proc(cn.B2, cp.B2);
  const Proc C3 = detail::real_proc(cn.C3, cp.C3);

  // Plain values at (t, w).
  std::vector<cjet> u(7), ub(7), au(7);
  for (int k = 0; k <= 6; ++k) {
    u[k] = U.v.dx(k);
    ub[k] = conj(u[k]);
    au[k] = u[k] * ub[k];
  }
  const cjet b0 = to_complex(cn.B0), b1 = to_complex(cn.B1), b2 = to_complex(cn.B2);
  const cjet c0 = to_complex(cn.C0), c1 = to_complex(cn.C1), c2 = to_complex(cn.C2),
             c3 = to_complex(cn.C3);
  const cjet d0 = cn.D0;
  const cjet d0b = conj(cn.D0);
  auto D = [](const cjet& f, int n = 1) { return f.dx(n); };

  const Diff dU = ito(U, h);
  std::vector<Diff> du(4), dub(4);
  for (int k = 0; k < 4; ++k) {
    du[k] = dU.dx(k);
    dub[k] = conj(du[k]);
  }

  // Left side: theta * (L y conj(I1) + conj(L y) I1), L y = i dy + y_xxxx dt.
  const cjet I1 = b0 * u[0] + c1 * u[1] + b2 * u[2] + c3 * u[3];
  const Diff Ly = kJ * ito(Y, h) + dt_term(Y.v.dx(4));
  const cjet th = theta.v;
  const Diff lhs = th * (conj(I1) * Ly + I1 * conj(Ly));

  const cjet br0 = D(b0, 4) + D(b0 * c2, 2) - D(b0 * b1) + 2.0 * (b0 * c0) + b0 * (d0 + d0b) -
                   D(c0 * c1) + D(b2 * c0, 2) - D(c0 * c3, 3);
  const cjet br1 = -4.0 * D(b0, 2) - 2.0 * (b0 * c2) - D(c1, 3) - D(c1 * c2) + 2.0 * (b1 * c1) -
                   D(b1 * b2) - 2.0 * (b2 * c0) + D(b1 * c3, 2) + 3.0 * D(c0 * c3);
  const cjet br2 = 2.0 * b0 + 3.0 * D(c1) + D(b2, 2) + 2.0 * (b2 * c2) - D(c2 * c3) - 2.0 * (b1 * c3);
  const cjet br3 = -2.0 * b2 - D(c3);

  Diff rhs = dt_term(2.0 * (I1 * conj(I1)) + au[0] * br0 + au[1] * br1 + au[2] * br2 + au[3] * br3);

  auto anti = [&](int j, int k) { return ub[k] * du[j] - u[k] * dub[j]; };  // du_j ub_k - dub_j u_k
  const std::complex<double> mi{0.0, -1.0};
  Diff X = dt_term(8.0 * (D(b0) * au[1]) - 4.0 * (D(b0, 3) * au[0]) - 2.0 * (D(b0 * c2) * au[0]) +
                   b0 * b1 * au[0] + 3.0 * (D(c1, 2) * au[1]) - 3.0 * (c1 * au[2]) + c1 * c2 * au[1] +
                   c0 * c1 * au[0] - 2.0 * (D(b2) * au[2]) + b1 * b2 * au[1] -
                   2.0 * (D(b2 * c0) * au[0]) + c3 * au[3] + c2 * c3 * au[2] -
                   2.0 * (D(b1 * c3) * au[1]) + 3.0 * (D(c0 * c3, 2) * au[0]) -
                   3.0 * (c0 * c3 * au[1]));
  // (dub_j u_k - du_j ub_k) = -anti(j, k)
  X = X + (mi * 0.5 * c1) * (-1.0 * anti(0, 0));
  X = X + (mi * b2) * (-1.0 * anti(0, 1));
  X = X - (0.5 * mi * D(b2)) * (-1.0 * anti(0, 0));
  X = X + (mi * c3) * (-1.0 * anti(0, 2));
  X = X - (mi * D(c3)) * (-1.0 * anti(0, 1));
  X = X + (0.5 * mi * D(c3, 2)) * (-1.0 * anti(0, 0));
  X = X - (0.5 * mi * c3) * (-1.0 * anti(1, 1));
  rhs = rhs + X.dx();

  const Diff XX = dt_term(6.0 * (D(b0, 2) * au[0]) - 4.0 * (b0 * au[1]) + b0 * c2 * au[0] -
                          3.0 * (D(c1) * au[1]) + b2 * au[2] + b2 * c0 * au[0] + b1 * c3 * au[1] -
                          3.0 * (D(c0 * c3) * au[0]));
  rhs = rhs + XX.dx(2);
  rhs = rhs + dt_term(-4.0 * (D(b0) * au[0]) + c1 * au[1] + c0 * c3 * au[0]).dx(3);
  rhs = rhs + dt_term(b0 * au[0]).dx(4);

  const Proc Ub = conj(U);
  const Proc coefM = C1 - B2.dx() + C3.dx(2);
  const Proc M = (0.5 * kJ) * (coefM * (U * Ub.dx() - U.dx() * Ub) -
                               C3 * (U.dx() * Ub.dx(2) - U.dx(2) * Ub.dx()));
  rhs = rhs + ito(M, h);

  rhs = rhs + (kJ * (b0 - 0.5 * D(c1) + 0.5 * D(b2, 2) - 0.5 * D(c3, 3))) * anti(0, 0);
  rhs = rhs + (kJ * (1.5 * D(c3) - b2)) * anti(1, 1);
  const cjet cm = c1 - D(b2) + D(c3, 2);
  rhs = rhs + (mi * 0.5 * cm) * (covar(du[0], dub[1]) - covar(du[1], dub[0]));
  rhs = rhs + (0.5 * kJ * c3) * (covar(du[1], dub[2]) - covar(du[2], dub[1]));

  // Explicit time derivatives of the coefficients, from l_t.
  const RealJet lx = wn.l.dx(), lxx = wn.l.dx(2);
  const RealJet lxt = wn.lt.dx(), lxxt = wn.lt.dx(2);
  const cjet c1t = to_complex(-12.0 * (lx * lx * lxt) + 4.0 * (lxt * lxx) + 4.0 * (lx * lxxt));
  const cjet b2t = to_complex(-6.0 * lxxt);
  const cjet c3t = to_complex(-4.0 * lxt);
  const cjet Kt = c1t - D(b2t) + D(c3t, 2);
  rhs = rhs + dt_term(u[0] * ub[1] * (mi * 0.5 * Kt + c1 * d0) + u[1] * ub[0] * (0.5 * kJ * Kt + c1 * d0b));
  rhs = rhs + dt_term((u[1] * ub[2] - u[2] * ub[1]) * (0.5 * kJ * c3t));
  rhs = rhs + dt_term(b2 * d0 * u[0] * ub[2] + b2 * d0b * u[2] * ub[0] + c3 * d0 * u[0] * ub[3] +
                      c3 * d0b * u[3] * ub[0]);
  return detail::finish(lhs, rhs);
}

/// Real multiplier A(x,t) with its time derivative, as x-jets.
struct Multiplier {
  std::function<RealJet(double x, double t, int order)> value;
  std::function<RealJet(double x, double t, int order)> dt;

  /// A(x) = -4x^3 + 6x^2 - 1.
  static Multiplier standard() {
    return polynomial({-1.0, 0.0, 6.0, -4.0});
  }
  static Multiplier polynomial(std::vector<double> p) {
    return {[p](double x, double, int order) { return polynomial_jet(p, x, order); },
            [](double, double, int order) { return RealJet::constant(0.0, order); }};
  }
};

/// First (which = 1, multiplier A conj(y_x)) or second (which = 2, multiplier
/// A conj(y_xxx)) multiplier identity at (x, t, w).
inline PointResidual multiplier_point(const TestField& y, const Multiplier& A, int which, double x,
                                      double t, double w, double h) {
  using detail::kJ;
  require(which == 1 || which == 2, "multiplier identity: which must be 1 or 2");
  const int K = detail::kIdentityOrder;
  const Proc Y = y.at(x, t, w, h, K);
  const Proc Yb = conj(Y);
  const Proc mA = (-kJ) * detail::real_proc(A.value(x, t, K), A.value(x, t + h, K));
  const cjet a = to_complex(A.value(x, t, K));
  const cjet ma = mA.v;
  const cjet mat = to_complex(A.dt(x, t, K)) * (-kJ);
  std::vector<cjet> yv(6), yb(6), ay(6);
  for (int k = 0; k < 6; ++k) {
    yv[k] = Y.v.dx(k);
    yb[k] = conj(yv[k]);
    ay[k] = yv[k] * yb[k];
  }
  const Diff dY = ito(Y, h);
  std::vector<Diff> dy(3), dyb(3);
  for (int k = 0; k < 3; ++k) {
    dy[k] = dY.dx(k);
    dyb[k] = conj(dy[k]);
  }
  auto D = [](const cjet& f, int n = 1) { return f.dx(n); };
  // dyb_j y_k - dy_j yb_k
  auto anti = [&](int j, int k) { return yv[k] * dyb[j] - yb[k] * dy[j]; };
  const Diff Ly = kJ * dY + dt_term(yv[4]);
  const Diff Lyb = conj(Ly);

  Diff lhs, rhs;
  if (which == 1) {
    lhs = (a * yb[1]) * Ly + (a * yv[1]) * Lyb;
    rhs = ((0.5 * ma) * anti(0, 0)).dx();
    rhs = rhs - 0.5 * ito(mA * (Y * Yb.dx() - Y.dx() * Yb), h);
    rhs = rhs + (0.5 * ma) * (covar(dy[0], dyb[1]) - covar(dy[1], dyb[0]));
    rhs = rhs + (0.5 * D(ma)) * (-1.0 * anti(0, 0));
    rhs = rhs + dt_term(0.5 * (mat * (yv[0] * yb[1] - yv[1] * yb[0])));
    const cjet a1 = ay[1];
    rhs = rhs + dt_term(D(a * a1, 3) - 3.0 * D(D(a) * a1, 2) + D(3.0 * (D(a, 2) * a1) - 3.0 * (a * ay[2])) -
                        D(a, 3) * a1 + 3.0 * (D(a) * ay[2]));
  } else {
    lhs = (a * yb[3]) * Ly + (a * yv[3]) * Lyb;
    const Diff inner = ma * anti(0, 2) - D(ma) * anti(0, 1) + (0.5 * D(ma, 2)) * anti(0, 0) -
                       (0.5 * ma) * anti(1, 1) + dt_term(a * ay[3]);
    rhs = inner.dx();
    rhs = rhs + 0.5 * ito(mA * (Y.dx() * Yb.dx(2) - Yb.dx() * Y.dx(2)) -
                              mA.dx(2) * (Y * Yb.dx() - Yb * Y.dx()), h);
    rhs = rhs - (0.5 * ma) * (covar(dy[1], dyb[2]) - covar(dy[2], dyb[1]));
    rhs = rhs - (1.5 * D(ma)) * (-1.0 * anti(1, 1));
    rhs = rhs + (0.5 * D(ma, 2)) * (covar(dy[0], dyb[1]) - covar(dy[1], dyb[0]));
    rhs = rhs + (0.5 * D(ma, 3)) * (-1.0 * anti(0, 0));
    rhs = rhs + dt_term(0.5 * (D(mat, 2) * (yv[0] * yb[1] - yv[1] * yb[0])) -
                        0.5 * (mat * (yv[1] * yb[2] - yv[2] * yb[1])) - D(a) * ay[3]);
  }
  return detail::finish(lhs, rhs);
}

/// e^{it} sin^2(pi x).
inline TestField trig_field() {
  return {[](double x, double t, int order) {
            std::vector<std::complex<double>> d(static_cast<std::size_t>(order + 1));
            const double k = 2.0 * 3.14159265358979323846;
            d[0] = 0.5 * (1.0 - std::cos(k * x));
            for (int r = 1; r <= order; ++r)
              d[r] = -0.5 * std::pow(k, r) * std::cos(k * x + 0.5 * r * 3.14159265358979323846);
            return ComplexJet::from_derivatives(d) * std::exp(std::complex<double>(0.0, t));
          },
          nullptr};
}

/// cos(t) x^2 (1-x)^3 e^x + i t x (1-x).
inline TestField poly_exp_field() {
  return {[](double x, double t, int order) {
            const RealJet X = RealJet::variable(x, order);
            const RealJet a = polynomial_jet({0.0, 0.0, 1.0, -3.0, 3.0, -1.0}, x, order) * exp(X);
            const RealJet b = polynomial_jet({0.0, 1.0, -1.0}, x, order);
            return to_complex(a) * std::cos(t) + to_complex(b) * std::complex<double>(0.0, t);
          },
          nullptr};
}

/// w e^{it} (1 + i x / 2) sin^2(pi x), so dy = i y dt + e^{it} (1 + i x / 2) sin^2(pi x) dW.
inline TestField noise_field() {
  const TestField trig = trig_field();
  return {[](double, double, int order) { return ComplexJet::constant(0.0, order); },
          [trig](double x, double t, int order) {
            const ComplexJet s = trig.m(x, t, order);
            const ComplexJet f = to_complex(polynomial_jet({1.0}, x, order)) +
                                 to_complex(RealJet::variable(x, order)) * std::complex<double>(0.0, 0.5);
            return s * f;
          }};
}

/// A smooth synthetic weight with moderate derivatives.
inline PolynomialWeight synthetic_weight() {
  return PolynomialWeight({{0.1, 0.4, -0.3, 0.2, 0.1}, {0.2, -0.1, 0.3}, {-0.1, 0.05}});
}

/// Max-norm residuals over an (x, t) grid for one step size.
struct IdentityLevel {
  std::size_t n_steps = 0;
  double dt = 0.0;
  double max_dt_residual = 0.0;  // absolute, time part
  double max_dw_residual = 0.0;  // absolute, noise part
  double max_scale = 0.0;        // max |left-hand side|
};

struct IdentityStudy {
  std::vector<IdentityLevel> levels;
  double slope = 0.0;              // least-squares log2 slope of the time residual vs dt
  double min_pair_slope = 0.0;     // smallest slope between consecutive levels
  double max_relative_dw = 0.0;    // noise residual relative to the scale
  bool exact = false;              // time residual at rounding level on every level
  bool converging = false;         // slope >= 0.9, or exact
};

using PointCheck = std::function<PointResidual(double x, double t, double w, double h)>;

/// Evaluate `check` at x_i = (i + 1/2)/nx (i < nx) and at the interior times of
/// the coarsest grid, once per step size, so every level sees the same points.
/// The Brownian values w(t) come from one path on the finest grid.
inline IdentityStudy identity_convergence(const PointCheck& check, double T,
                                          const std::vector<std::size_t>& steps, int nx,
                                          const BrownianPath* path = nullptr) {
  require(steps.size() >= 2, "identity_convergence: need two or more levels");
  require(nx >= 1, "identity_convergence: need spatial points");
  std::vector<std::size_t> sorted = steps;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t finest = sorted.back();
  std::vector<double> wfine(finest + 1, 0.0);
  if (path != nullptr) {
    require(path->n_steps == finest && path->T == T, "identity_convergence: path grid mismatch");
    wfine = path->values();
  }
  const std::size_t coarsest = sorted.front();
  IdentityStudy st;
  for (std::size_t ns : steps) {
    require(ns >= 2 && finest % ns == 0 && ns % coarsest == 0,
            "identity_convergence: levels must be nested");
    IdentityLevel lv;
    lv.n_steps = ns;
    lv.dt = T / static_cast<double>(ns);
    for (std::size_t n = 1; n < coarsest; ++n) {
      const double t = T * static_cast<double>(n) / static_cast<double>(coarsest);
      const double w = wfine[n * (finest / coarsest)];
      for (int i = 0; i < nx; ++i) {
        const double x = (i + 0.5) / nx;
        const PointResidual r = check(x, t, w, lv.dt);
        if (!std::isfinite(std::abs(r.dt)) || !std::isfinite(std::abs(r.dw)))
          throw NumericalError("identity_convergence: non-finite residual");
        lv.max_dt_residual = std::max(lv.max_dt_residual, std::abs(r.dt));
        lv.max_dw_residual = std::max(lv.max_dw_residual, std::abs(r.dw));
        lv.max_scale = std::max(lv.max_scale, r.scale);
      }
    }
    st.levels.push_back(lv);
    st.max_relative_dw = std::max(st.max_relative_dw, lv.max_dw_residual / std::max(lv.max_scale, 1e-300));
  }
  // Slope of log2(residual) against log2(dt).
  const double m = static_cast<double>(st.levels.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& lv : st.levels) {
    const double lx = std::log2(lv.dt);
    const double ly = std::log2(std::max(lv.max_dt_residual, 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  st.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  st.min_pair_slope = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < st.levels.size(); ++k) {
    const auto& a = st.levels[k];
    const auto& b = st.levels[k + 1];
    const double s = std::log2(std::max(a.max_dt_residual, 1e-300) / std::max(b.max_dt_residual, 1e-300)) /
                     std::log2(a.dt / b.dt);
    st.min_pair_slope = std::min(st.min_pair_slope, s);
  }
  st.exact = std::all_of(st.levels.begin(), st.levels.end(), [](const IdentityLevel& lv) {
    return lv.max_dt_residual <= 1e-12 * std::max(lv.max_scale, 1.0);
  });
  st.converging = st.slope >= 0.9 || st.exact;
  return st;
}

}  // namespace clab
