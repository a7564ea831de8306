// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Backward equation i dz + z_xxxx dt = (M_z z + M_Z Z + h) dt + Z dw, z(T) = z_T.
///
/// In modal form dd = i Lambda d dt + G dt - i D dw with G = -i(M_z d + M_Z D + h).
/// Each step inverts the forward Cayley step
///   d_{n+1} = R (d_n + G(d_n, D_n) dt - i D_n dW_n),
/// so Y = R^{-1} d_{n+1} is split into its conditional mean and a martingale
/// increment by least squares on Hermite regressors in w(t_n) / sqrt(t_n):
///   D_n = i E_n[(Y - Y0) dW_n] / E_n[dW_n^2]   with Y0 a first fit of E_n[Y],
///   Yhat = E_n[Y + i D_n dW_n],
///   d_n = (I + i dt M_z) Yhat + i dt (M_Z D_n + h_n).
/// With the adjoint drift, I + i dt M_z is (I + A' dt)^H, so a forward and a
/// backward solve on the same grid satisfy the discrete transposition
/// identity up to rounding and the Z estimation error.
/// The Z fit regresses Y - Y0 on He_m(xi) dW_n, so the sample dW^2 enters
/// exactly. Centering by Y0 keeps its variance O(1) instead of O(|Y|^2/dt),
/// and removing the fitted martingale increment before the final mean fit
/// stops regression noise from accumulating in d across steps. The Z fit uses
/// one regressor degree less, matching the degree drop of the representation.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "clab/errors.hpp"
#include "clab/forward_solver.hpp"
#include "clab/noise.hpp"
#include "clab/parallel.hpp"
#include "clab/spectral_basis.hpp"

namespace clab {

/// Which drift the backward equation carries: (a z + b Z + h) or the adjoint
/// form (conj(a) z - i conj(b) Z + h) dual to the forward equation.
enum class BackwardDrift { generic, adjoint };

struct BackwardGenerator {
  Eigen::VectorXd lambda;
  Eigen::MatrixXcd mz;  // coefficient of z in the drift
  Eigen::MatrixXcd mZ;  // coefficient of Z in the drift

  [[nodiscard]] int size() const { return static_cast<int>(lambda.size()); }
};

inline BackwardGenerator assemble_backward_generator(const Eigen::VectorXcd& a_nodes,
                                                     const Eigen::VectorXcd& b_nodes,
                                                     const BeamBasis& basis,
                                                     BackwardDrift form = BackwardDrift::adjoint) {
  const auto q = static_cast<Eigen::Index>(basis.quadrature().size());
  require(a_nodes.size() == q && b_nodes.size() == q,
          "assemble_backward_generator: coefficients must be sampled on the quadrature nodes");
  BackwardGenerator g;
  g.lambda = basis.lambda();
  if (form == BackwardDrift::generic) {
    g.mz = basis.weighted_mass(a_nodes);
    g.mZ = basis.weighted_mass(b_nodes);
  } else {
    g.mz = basis.weighted_mass(a_nodes.conjugate());
    g.mZ = -kI * basis.weighted_mass(b_nodes.conjugate());
  }
  return g;
}

/// Deterministic solution on the grid: z is modes x (n_steps+1), Z is modes x n_steps.
struct BackwardSolution {
  std::vector<double> times;
  Eigen::MatrixXcd z;
  Eigen::MatrixXcd Z;
  Eigen::VectorXcd zT;
  double dt = 0.0;

  [[nodiscard]] SpectralState z_state(std::size_t n) const {
    return {z.col(static_cast<Eigen::Index>(n)), times.at(n)};
  }
};

/// Ensemble solution stored per time slice as (paths x modes) matrices.
struct BackwardEnsemble {
  std::vector<double> times;
  std::vector<Eigen::MatrixXcd> z;  // n_steps + 1 slices
  std::vector<Eigen::MatrixXcd> Z;  // n_steps slices
  double dt = 0.0;
  std::vector<double> condition_numbers;  // per slice, 0..n_steps-1
  Eigen::VectorXd identity_residual;      // per mode, relative
  double residual_tolerance = 1e-2;
  bool residual_ok = true;

  [[nodiscard]] std::size_t n_paths() const { return z.empty() ? 0 : static_cast<std::size_t>(z[0].rows()); }
  [[nodiscard]] std::size_t n_steps() const { return Z.size(); }
  [[nodiscard]] double max_condition() const {
    double m = 0.0;
    for (double c : condition_numbers) m = std::max(m, c);
    return m;
  }

  /// The per-path view of the ensemble.
  [[nodiscard]] BackwardSolution path_solution(std::size_t p) const {
    BackwardSolution s;
    s.times = times;
    s.dt = dt;
    const auto P = static_cast<Eigen::Index>(p);
    const Eigen::Index N = z[0].cols();
    s.z.resize(N, static_cast<Eigen::Index>(z.size()));
    s.Z.resize(N, static_cast<Eigen::Index>(Z.size()));
    for (std::size_t n = 0; n < z.size(); ++n) s.z.col(static_cast<Eigen::Index>(n)) = z[n].row(P).transpose();
    for (std::size_t n = 0; n < Z.size(); ++n) s.Z.col(static_cast<Eigen::Index>(n)) = Z[n].row(P).transpose();
    s.zT = s.z.col(s.z.cols() - 1);
    return s;
  }
};

/// Replicate a deterministic solution across n_paths.
inline BackwardEnsemble broadcast(const BackwardSolution& s, std::size_t n_paths) {
  BackwardEnsemble e;
  e.times = s.times;
  e.dt = s.dt;
  const auto P = static_cast<Eigen::Index>(n_paths);
  for (Eigen::Index n = 0; n < s.z.cols(); ++n) e.z.push_back(s.z.col(n).transpose().replicate(P, 1));
  for (Eigen::Index n = 0; n < s.Z.cols(); ++n) e.Z.push_back(s.Z.col(n).transpose().replicate(P, 1));
  e.condition_numbers.assign(e.Z.size(), 1.0);
  e.identity_residual = Eigen::VectorXd::Zero(s.z.rows());
  return e;
}

namespace detail {

inline void check_h(const std::vector<Eigen::VectorXcd>& h, std::size_t n_steps, int n) {
  require(h.empty() || h.size() == n_steps, "backward solve: h series length must equal n_steps");
  for (const auto& v : h) require(v.size() == n, "backward solve: h has wrong mode count");
}

// Backward drift factor I + i dt M. Against the forward step R (I + dt A) it
// is the exact discrete adjoint, so the transposition identity holds to
// rounding on the grid instead of to O(dt).
inline Eigen::MatrixXcd drift_factor(const BackwardGenerator& g, double dt) {
  const Eigen::Index N = g.size();
  return Eigen::MatrixXcd::Identity(N, N) + kI * dt * g.mz;
}

}  // namespace detail

inline BackwardSolution solve_backward_deterministic(const BackwardGenerator& gen,
                                                     const Eigen::VectorXcd& zT, double T,
                                                     std::size_t n_steps,
                                                     const std::vector<Eigen::VectorXcd>& h = {}) {
  const int N = gen.size();
  require(zT.size() == N, "solve_backward_deterministic: z_T has wrong mode count");
  require(T > 0.0 && n_steps >= 1, "solve_backward_deterministic: bad grid");
  detail::check_h(h, n_steps, N);
  const double dt = T / static_cast<double>(n_steps);
  const Eigen::VectorXcd Rinv = detail::cayley_factor(gen.lambda, dt).cwiseInverse();
  const Eigen::MatrixXcd B = detail::drift_factor(gen, dt);
  BackwardSolution s;
  s.dt = dt;
  s.zT = zT;
  s.times.resize(n_steps + 1);
  for (std::size_t n = 0; n <= n_steps; ++n) s.times[n] = dt * static_cast<double>(n);
  s.z.resize(N, static_cast<Eigen::Index>(n_steps + 1));
  s.Z = Eigen::MatrixXcd::Zero(N, static_cast<Eigen::Index>(n_steps));
  s.z.col(static_cast<Eigen::Index>(n_steps)) = zT;
  for (std::size_t n = n_steps; n-- > 0;) {
    Eigen::VectorXcd zn = B * Rinv.cwiseProduct(s.z.col(static_cast<Eigen::Index>(n + 1)));
    if (!h.empty()) zn += kI * dt * h[n];
    s.z.col(static_cast<Eigen::Index>(n)) = zn;
    if (!s.z.col(static_cast<Eigen::Index>(n)).allFinite())
      throw NumericalError("solve_backward_deterministic: non-finite state at step " + std::to_string(n));
  }
  return s;
}

/// Terminal data as an F_T-measurable map from a path to modal coefficients.
using TerminalFunctional = std::function<Eigen::VectorXcd(const BrownianPath&)>;

struct RegressionOptions {
  int degree = 3;
  double residual_tolerance = 1e-2;
};

/// Hermite regressors He_0..He_d of w / sqrt(t) for every path (paths x (d+1)).
inline Eigen::MatrixXd hermite_regressors(const Eigen::VectorXd& w, double t, int degree) {
  const Eigen::Index P = w.size();
  const int d = t > 0.0 ? degree : 0;
  Eigen::MatrixXd X(P, d + 1);
  const double s = t > 0.0 ? 1.0 / std::sqrt(t) : 0.0;
  for (Eigen::Index p = 0; p < P; ++p) {
    const double xi = w(p) * s;
    X(p, 0) = 1.0;
    if (d >= 1) X(p, 1) = xi;
    for (int m = 2; m <= d; ++m) X(p, m) = xi * X(p, m - 1) - (m - 1) * X(p, m - 2);
  }
  return X;
}

inline BackwardEnsemble solve_backward_regression(const BackwardGenerator& gen,
                                                  const TerminalFunctional& zT,
                                                  const std::vector<BrownianPath>& paths,
                                                  const RegressionOptions& opt = {},
                                                  const std::vector<Eigen::VectorXcd>& h = {}) {
  require(!paths.empty(), "solve_backward_regression: empty ensemble");
  require(opt.degree >= 0 && opt.degree <= 6, "solve_backward_regression: degree must be in [0,6]");
  const int N = gen.size();
  const std::size_t n_steps = paths[0].n_steps;
  const double T = paths[0].T;
  for (const auto& p : paths)
    require(p.n_steps == n_steps && p.T == T, "solve_backward_regression: paths on different grids");
  detail::check_h(h, n_steps, N);
  const auto P = static_cast<Eigen::Index>(paths.size());
  const double dt = T / static_cast<double>(n_steps);

  // w(t_n) and dW_n as (paths x grid) matrices.
  Eigen::MatrixXd W(P, static_cast<Eigen::Index>(n_steps + 1));
  Eigen::MatrixXd dW(P, static_cast<Eigen::Index>(n_steps));
  for (Eigen::Index p = 0; p < P; ++p) {
    W(p, 0) = 0.0;
    for (std::size_t n = 0; n < n_steps; ++n) {
      dW(p, static_cast<Eigen::Index>(n)) = paths[p].increments[n];
      W(p, static_cast<Eigen::Index>(n + 1)) = W(p, static_cast<Eigen::Index>(n)) + paths[p].increments[n];
    }
  }

  BackwardEnsemble e;
  e.dt = dt;
  e.residual_tolerance = opt.residual_tolerance;
  e.times.resize(n_steps + 1);
  for (std::size_t n = 0; n <= n_steps; ++n) e.times[n] = dt * static_cast<double>(n);
  e.z.assign(n_steps + 1, Eigen::MatrixXcd());
  e.Z.assign(n_steps, Eigen::MatrixXcd());
  e.condition_numbers.assign(n_steps, 0.0);

  Eigen::MatrixXcd terminal(P, N);
  parallel_for(paths.size(), [&](std::size_t p) {
    const Eigen::VectorXcd v = zT(paths[p]);
    require(v.size() == N, "solve_backward_regression: terminal functional has wrong mode count");
    terminal.row(static_cast<Eigen::Index>(p)) = v.transpose();
  });
  if (!terminal.allFinite()) throw NumericalError("solve_backward_regression: non-finite terminal data");
  e.z[n_steps] = terminal;

  const Eigen::RowVectorXcd Rinv = detail::cayley_factor(gen.lambda, dt).cwiseInverse().transpose();
  const Eigen::MatrixXcd BT = detail::drift_factor(gen, dt).transpose();
  const Eigen::MatrixXcd mZT = gen.mZ.transpose();
  Eigen::VectorXd eps2 = Eigen::VectorXd::Zero(N);

  for (std::size_t n = n_steps; n-- > 0;) {
    const Eigen::MatrixXd X = hermite_regressors(W.col(static_cast<Eigen::Index>(n)), e.times[n], opt.degree);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    // Z of a degree-d functional has degree d-1 in w(t_n).
    const Eigen::MatrixXd Xz = X.leftCols(std::max<Eigen::Index>(1, X.cols() - 1));
    const Eigen::VectorXd dw = dW.col(static_cast<Eigen::Index>(n));
    const Eigen::MatrixXd Xw = Xz.array().colwise() * dw.array();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrw(Xw);
    if (qrw.rank() < Xw.cols())
      throw NumericalError("solve_backward_regression: rank-deficient increment regression at step " +
                           std::to_string(n) + "; increase the ensemble");
    if (qr.rank() < X.cols())
      throw NumericalError("solve_backward_regression: rank-deficient regression at step " +
                           std::to_string(n) + " (rank " + std::to_string(qr.rank()) + " of " +
                           std::to_string(X.cols()) + "); increase the ensemble");
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(X).singularValues();
    e.condition_numbers[n] = sv(0) / sv(sv.size() - 1);

    const Eigen::MatrixXcd Y = e.z[n + 1].array().rowwise() * Rinv.array();
    auto fit = [&](const Eigen::MatrixXd& basis, const auto& solver, const Eigen::MatrixXcd& rhs) {
      Eigen::MatrixXcd out(P, N);
      const Eigen::MatrixXd re = basis * solver.solve(Eigen::MatrixXd(rhs.real()));
      const Eigen::MatrixXd im = basis * solver.solve(Eigen::MatrixXd(rhs.imag()));
      out.real() = re;
      out.imag() = im;
      return out;
    };
    const Eigen::MatrixXcd Y0 = fit(X, qr, Y);
    // Y - Y0 ~ -i D dW: least squares on the basis He_m(xi) dW.
    const Eigen::MatrixXcd D = kI * fit(Xz, qrw, Y - Y0);
    const Eigen::MatrixXcd mart = kI * (D.array().colwise() * dw.cast<cplx>().array()).matrix();
    const Eigen::MatrixXcd Yhat = fit(X, qr, Y + mart);
    const Eigen::MatrixXcd resid = Y - Yhat;
    e.z[n] = Yhat * BT + kI * dt * (D * mZT);
    if (!h.empty()) e.z[n].rowwise() += (kI * dt * h[n]).transpose();
    e.Z[n] = D;
    if (!e.z[n].allFinite() || !D.allFinite())
      throw NumericalError("solve_backward_regression: non-finite state at step " + std::to_string(n));
    const Eigen::MatrixXcd eps = resid + mart;
    eps2 += eps.cwiseAbs2().colwise().sum().transpose();
  }

  e.identity_residual.resize(N);
  const Eigen::VectorXd term2 = terminal.cwiseAbs2().colwise().sum().transpose();
  const double scale = std::sqrt(term2.sum() / static_cast<double>(P));
  for (int k = 0; k < N; ++k) {
    const double r = std::sqrt(eps2(k) / static_cast<double>(P));
    e.identity_residual(k) = scale > 0.0 ? r / scale : r;
  }
  e.residual_ok = e.identity_residual.maxCoeff() <= opt.residual_tolerance;
  return e;
}

/// Terminal data that ignores the path.
inline TerminalFunctional deterministic_terminal(const Eigen::VectorXcd& zT) {
  return [zT](const BrownianPath&) { return zT; };
}

struct DualityResult {
  cplx mean{0.0, 0.0};
  double residual = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
};

/// Transposition identity with zero boundary controls, evaluated per path:
///   X = <y(tau), z(tau)> - <y0, z(0)> - sum_{n < tau} [-i<f,z> + <g,Z> + i<y,h>] dt,
/// with <p, q> = sum_k p_k conj(q_k). Returns |E X| and its standard error.
inline DualityResult duality_residual(const TrajectoryEnsemble& fwd, const ForcingSeries& forcing,
                                      const BackwardEnsemble& bwd, std::size_t tau_step,
                                      const std::vector<Eigen::VectorXcd>& h = {}) {
  require(!fwd.empty(), "duality_residual: empty forward ensemble");
  require(fwd.size() == bwd.n_paths(), "duality_residual: ensembles have different path counts");
  const std::size_t n_steps = bwd.n_steps();
  require(std::abs(fwd[0].dt - bwd.dt) <= 1e-14 * bwd.dt, "duality_residual: time grids differ");
  require(tau_step <= n_steps, "duality_residual: tau beyond the horizon");
  const std::size_t stride = fwd[0].record_stride;
  require(tau_step % stride == 0, "duality_residual: y(tau) was not recorded");
  require(h.empty() || stride == 1, "duality_residual: h forcing needs every step recorded");
  forcing.check(n_steps, static_cast<int>(fwd[0].coeffs.rows()));
  const double dt = bwd.dt;
  const std::size_t P = fwd.size();
  std::vector<cplx> X(P);
  for (std::size_t p = 0; p < P; ++p) {
    const auto& tr = fwd[p];
    const auto row = static_cast<Eigen::Index>(p);
    auto pair = [](const auto& a, const auto& b) { return (a.array() * b.conjugate().array()).sum(); };
    cplx v = pair(tr.coeffs.col(static_cast<Eigen::Index>(tau_step / stride)),
                  bwd.z[tau_step].row(row).transpose());
    v -= pair(tr.coeffs.col(0), bwd.z[0].row(row).transpose());
    for (std::size_t n = 0; n < tau_step; ++n) {
      cplx s{0.0, 0.0};
      if (forcing.has_f()) s += -kI * pair(forcing.f[n], bwd.z[n].row(row).transpose());
      if (forcing.has_g()) s += pair(forcing.g[n], bwd.Z[n].row(row).transpose());
      if (!h.empty()) s += kI * pair(tr.coeffs.col(static_cast<Eigen::Index>(n)), h[n]);
      v -= s * dt;
    }
    X[p] = v;
  }
  DualityResult r;
  r.n_paths = P;
  for (const auto& x : X) r.mean += x;
  r.mean /= static_cast<double>(P);
  double var = 0.0;
  for (const auto& x : X) var += std::norm(x - r.mean);
  if (P > 1) var /= static_cast<double>(P - 1);
  r.residual = std::abs(r.mean);
  r.std_error = std::sqrt(var / static_cast<double>(P));
  return r;
}

}  // namespace clab
