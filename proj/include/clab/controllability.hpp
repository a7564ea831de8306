// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Boundary and noise controls by conjugate gradients on the duality Gramian.
///
/// Terminal test data live in a finite "dual space" spanned by orthonormal
/// data zeta_j (unit modes for deterministic data, modes times normalized
/// Hermite chaos of w(T) otherwise). Each zeta_j is solved backward once;
/// its traces z_xx(0,.), z_xxx(0,.) and martingale density Z form the
/// observation. Controls act on y through the weak terminal state
///   <y(T), zeta> = <y0, z(0)> + E sum_n dt [i(u1 conj z_xxx(0) - u2 conj z_xx(0))
///                  + <g, Z> - i <f, z>],
/// so y(T) is only ever evaluated against test data. See docs/controls.md.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "clab/backward_solver.hpp"
#include "clab/errors.hpp"
#include "clab/forward_solver.hpp"
#include "clab/noise.hpp"
#include "clab/spectral_basis.hpp"

namespace clab {

/// Dual observations on the left points t_0..t_{n-1}; rows are paths.
struct ObservationTriple {
  double dt = 0.0;
  Eigen::MatrixXcd zxx0;
  Eigen::MatrixXcd zxxx0;
  std::vector<Eigen::MatrixXcd> Z;  // empty when Z vanishes identically

  [[nodiscard]] std::size_t n_paths() const { return static_cast<std::size_t>(zxx0.rows()); }
  [[nodiscard]] std::size_t n_steps() const { return static_cast<std::size_t>(zxx0.cols()); }
};

/// u1 = y(0,.), u2 = y_x(0,.) and the noise control g, same layout.
struct ControlTriple {
  double dt = 0.0;
  Eigen::MatrixXcd u1;
  Eigen::MatrixXcd u2;
  std::vector<Eigen::MatrixXcd> g;

  [[nodiscard]] std::size_t n_paths() const { return static_cast<std::size_t>(u1.rows()); }
  [[nodiscard]] std::size_t n_steps() const { return static_cast<std::size_t>(u1.cols()); }
  /// sqrt(E sum_n dt (|u1|^2 + |u2|^2 + |g|^2)).
  [[nodiscard]] double norm() const {
    double acc = u1.squaredNorm() + u2.squaredNorm();
    for (const auto& m : g) acc += m.squaredNorm();
    return n_paths() == 0 ? 0.0 : std::sqrt(acc * dt / static_cast<double>(n_paths()));
  }
};

inline ObservationTriple observe(const BeamBasis& basis, const BackwardEnsemble& bwd) {
  require(bwd.n_paths() > 0, "observe: empty backward ensemble");
  const auto P = static_cast<Eigen::Index>(bwd.n_paths());
  const auto S = static_cast<Eigen::Index>(bwd.n_steps());
  ObservationTriple o;
  o.dt = bwd.dt;
  o.zxx0.resize(P, S);
  o.zxxx0.resize(P, S);
  const Eigen::VectorXcd r2 = basis.boundary_row(0, 2).transpose().cast<cplx>();
  const Eigen::VectorXcd r3 = basis.boundary_row(0, 3).transpose().cast<cplx>();
  bool any_Z = false;
  for (Eigen::Index n = 0; n < S; ++n) {
    const auto& z = bwd.z[static_cast<std::size_t>(n)];
    o.zxx0.col(n) = z * r2;
    o.zxxx0.col(n) = z * r3;
    any_Z = any_Z || bwd.Z[static_cast<std::size_t>(n)].squaredNorm() > 0.0;
  }
  if (any_Z) o.Z = bwd.Z;
  if (!o.zxx0.allFinite() || !o.zxxx0.allFinite()) throw NumericalError("observe: non-finite traces");
  return o;
}

/// u1 = -i z_xxx(0), u2 = i z_xx(0), g = Z.
inline ControlTriple observation_to_control(const ObservationTriple& obs) {
  ControlTriple c;
  c.dt = obs.dt;
  c.u1 = -kI * obs.zxxx0;
  c.u2 = kI * obs.zxx0;
  c.g = obs.Z;
  return c;
}

/// E sum_n dt [i(u1 conj z_xxx(0) - u2 conj z_xx(0)) + <g, Z>].
inline cplx transposition_pairing(const ControlTriple& c, const ObservationTriple& o) {
  require(c.n_paths() == o.n_paths() && c.n_steps() == o.n_steps(),
          "transposition_pairing: controls and observation grids differ");
  require(std::abs(c.dt - o.dt) <= 1e-14 * o.dt, "transposition_pairing: time steps differ");
  cplx s = kI * ((c.u1.array() * o.zxxx0.conjugate().array()).sum() -
                 (c.u2.array() * o.zxx0.conjugate().array()).sum());
  if (!c.g.empty() && !o.Z.empty()) {
    require(c.g.size() == o.Z.size(), "transposition_pairing: noise control length mismatch");
    for (std::size_t n = 0; n < c.g.size(); ++n) s += (c.g[n].array() * o.Z[n].conjugate().array()).sum();
  }
  return s * o.dt / static_cast<double>(o.n_paths());
}

/// Deterministic data for the weak state: initial state and drift forcing.
struct ControlData {
  Eigen::VectorXcd y0;              // empty = 0
  std::vector<Eigen::VectorXcd> f;  // empty = 0, else n_steps entries
};

/// One test datum: its backward solution and observation.
struct DualDatum {
  BackwardEnsemble bwd;
  ObservationTriple obs;
};

/// <y0, z(0)> - i E sum_n dt <f_n, z_n> for one test datum.
inline cplx data_pairing(const ControlData& d, const DualDatum& t) {
  const auto P = static_cast<double>(t.bwd.n_paths());
  cplx s{0.0, 0.0};
  if (d.y0.size() > 0) {
    require(d.y0.size() == t.bwd.z[0].cols(), "data_pairing: y0 has wrong mode count");
    s += (t.bwd.z[0].conjugate() * d.y0).sum() / P;
  }
  if (!d.f.empty()) {
    require(d.f.size() == t.bwd.n_steps(), "data_pairing: f series length must equal n_steps");
    cplx acc{0.0, 0.0};
    for (std::size_t n = 0; n < d.f.size(); ++n) acc += (t.bwd.z[n].conjugate() * d.f[n]).sum();
    s += -kI * acc * t.bwd.dt / P;
  }
  return s;
}

/// Maps coordinates in the test basis to the backward solution from
/// z_T = sum_j c_j zeta_j. Must be linear in c.
using DualSolve = std::function<BackwardEnsemble(const Eigen::VectorXcd& coords)>;

struct DualSpace {
  const BeamBasis* basis = nullptr;
  DualSolve solve;
  std::vector<DualDatum> tests;
  std::string label;

  [[nodiscard]] int dim() const { return static_cast<int>(tests.size()); }
};

inline DualSpace make_dual_space(const BeamBasis& basis, DualSolve solve, int dim, std::string label) {
  require(dim >= 1, "make_dual_space: empty test basis");
  DualSpace s;
  s.basis = &basis;
  s.solve = std::move(solve);
  s.label = std::move(label);
  for (int j = 0; j < dim; ++j) {
    DualDatum d;
    d.bwd = s.solve(Eigen::VectorXcd::Unit(dim, j));
    if (!d.bwd.residual_ok)
      log_warning("dual space: backward identity residual above tolerance for test datum " + std::to_string(j));
    d.obs = observe(basis, d.bwd);
    s.tests.push_back(std::move(d));
  }
  return s;
}

/// Unit-mode terminal data with deterministic coefficients; Z = 0.
inline DualSpace deterministic_dual_space(const BeamBasis& basis, const BackwardGenerator& gen, double T,
                                          std::size_t n_steps) {
  const double phase = basis.lambda().maxCoeff() * T / static_cast<double>(n_steps);
  // Past this the Cayley phases of the top modes approach pi per step and their
  // traces become nearly collinear, which ruins the Gramian conditioning.
  if (phase > 1000.0)
    log_warning("deterministic dual space: lambda_max dt = " + std::to_string(phase) +
                " aliases the top-mode phases; refine the time grid");
  DualSolve solve = [gen, T, n_steps](const Eigen::VectorXcd& c) {
    return broadcast(solve_backward_deterministic(gen, c, T, n_steps), 1);
  };
  return make_dual_space(basis, std::move(solve), basis.size(), "deterministic");
}

/// Terminal data e_k He_m(w(T)/sqrt(T)) / sqrt(m!) for m <= chaos_degree,
/// indexed j = m N + k, solved by regression on a shared path ensemble.
inline DualSpace chaos_dual_space(const BeamBasis& basis, const BackwardGenerator& gen,
                                  std::vector<BrownianPath> paths, int chaos_degree,
                                  RegressionOptions opt = {}) {
  require(!paths.empty(), "chaos_dual_space: empty path ensemble");
  require(chaos_degree >= 0 && chaos_degree <= opt.degree,
          "chaos_dual_space: chaos degree must lie in [0, regression degree]");
  const int N = basis.size();
  const int M = chaos_degree;
  DualSolve solve = [gen, paths = std::move(paths), N, M, opt](const Eigen::VectorXcd& c) {
    TerminalFunctional zT = [c, N, M](const BrownianPath& p) {
      const double xi = p.values().back() / std::sqrt(p.T);
      Eigen::VectorXcd v = Eigen::VectorXcd::Zero(N);
      double he_prev = 0.0, he = 1.0, fact = 1.0;
      for (int m = 0; m <= M; ++m) {
        if (m > 0) {
          const double next = xi * he - static_cast<double>(m - 1) * he_prev;
          he_prev = he;
          he = next;
          fact *= static_cast<double>(m);
        }
        v += c.segment(static_cast<Eigen::Index>(m) * N, N) * (he / std::sqrt(fact));
      }
      return v;
    };
    return solve_backward_regression(gen, zT, paths, opt);
  };
  return make_dual_space(basis, std::move(solve), N * (M + 1), "chaos");
}

/// Target pairings t_j = E<y1, zeta_j>; y1 has one row per path or a single row.
inline Eigen::VectorXcd target_pairings(const DualSpace& space, const Eigen::MatrixXcd& y1) {
  Eigen::VectorXcd t(space.dim());
  for (int j = 0; j < space.dim(); ++j) {
    const auto& zT = space.tests[static_cast<std::size_t>(j)].bwd.z.back();
    require(y1.cols() == zT.cols(), "target_pairings: y1 has wrong mode count");
    require(y1.rows() == 1 || y1.rows() == zT.rows(), "target_pairings: y1 rows must be 1 or the path count");
    const Eigen::MatrixXcd prod =
        y1.rows() == 1 ? Eigen::MatrixXcd(zT.conjugate() * y1.transpose()) : Eigen::MatrixXcd((y1.array() * zT.conjugate().array()).rowwise().sum());
    t(j) = prod.sum() / static_cast<double>(zT.rows());
  }
  return t;
}

/// <y(T), zeta_j> for every test datum.
inline Eigen::VectorXcd weak_terminal_state(const DualSpace& space, const ControlTriple& c,
                                            const ControlData& data = {}) {
  Eigen::VectorXcd v(space.dim());
  for (int j = 0; j < space.dim(); ++j) {
    const auto& t = space.tests[static_cast<std::size_t>(j)];
    v(j) = transposition_pairing(c, t.obs) + data_pairing(data, t);
  }
  return v;
}

/// Backward solve from sum_j c_j zeta_j, controls from its observation, then
/// the weak terminal state against every test datum (y0 = 0, f = 0).
inline Eigen::VectorXcd gramian_apply(const DualSpace& space, const Eigen::VectorXcd& c) {
  require(c.size() == space.dim(), "gramian_apply: coordinate length mismatch");
  if (c.squaredNorm() == 0.0) return Eigen::VectorXcd::Zero(space.dim());
  const auto bwd = space.solve(c);
  if (!bwd.residual_ok) log_warning("gramian_apply: backward identity residual above tolerance");
  return weak_terminal_state(space, observation_to_control(observe(*space.basis, bwd)));
}

/// G_jk = pairing(controls from zeta_k, observation of zeta_j), assembled from
/// the stored test observations.
inline Eigen::MatrixXcd dense_gramian(const DualSpace& space) {
  const int d = space.dim();
  Eigen::MatrixXcd G(d, d);
  for (int k = 0; k < d; ++k) {
    const auto ck = observation_to_control(space.tests[static_cast<std::size_t>(k)].obs);
    for (int j = 0; j < d; ++j) G(j, k) = transposition_pairing(ck, space.tests[static_cast<std::size_t>(j)].obs);
  }
  return G;
}

struct GramianSpectrum {
  Eigen::VectorXd eigenvalues;  // ascending
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double condition = 0.0;
  double hermitian_defect = 0.0;  // max |G - G^H| / max |G|
};

inline GramianSpectrum gramian_spectrum(const Eigen::MatrixXcd& G) {
  require(G.rows() == G.cols() && G.rows() > 0, "gramian_spectrum: matrix must be square");
  GramianSpectrum s;
  const double scale = std::max(G.cwiseAbs().maxCoeff(), 1e-300);
  s.hermitian_defect = (G - G.adjoint()).cwiseAbs().maxCoeff() / scale;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (G + G.adjoint()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("gramian_spectrum: eigen-solve failed");
  s.eigenvalues = es.eigenvalues();
  s.min_eigenvalue = s.eigenvalues(0);
  s.max_eigenvalue = s.eigenvalues(s.eigenvalues.size() - 1);
  s.condition = s.min_eigenvalue > 0.0 ? s.max_eigenvalue / s.min_eigenvalue
                                       : std::numeric_limits<double>::infinity();
  return s;
}

struct CgOptions {
  double tol = 1e-6;
  int max_iter = 0;  // 0 = dimension of the dual space
  bool jacobi = true;
  bool keep_history = false;
};

struct CgReport {
  int iterations = 0;
  double relative_residual = 0.0;  // recomputed ||G c - b|| / ||b||
  double recursive_residual = 0.0;
  bool converged = false;
  std::string status;  // "converged", "max_iter" or "breakdown"
  double min_ritz = 0.0;  // of the preconditioned Gramian
  double max_ritz = 0.0;
  double min_curvature = 0.0;  // smallest p^H G p / p^H p seen
  std::vector<Eigen::VectorXcd> iterates;  // c_0..c_k when keep_history
};

namespace detail {

/// Real part of p^H G p must be nonnegative and the imaginary part negligible.
inline double checked_curvature(const Eigen::VectorXcd& p, const Eigen::VectorXcd& Gp) {
  const cplx pq = p.dot(Gp);
  const double scale = p.norm() * Gp.norm();
  if (pq.real() < -1e-10 * scale || std::abs(pq.imag()) > 1e-8 * std::max(scale, 1e-300))
    throw NumericalError("hum: duality pairing is not a nonnegative form (p^H G p = " + std::to_string(pq.real()) +
                         " + " + std::to_string(pq.imag()) + "i)");
  return pq.real();
}

/// Ritz values from the Lanczos tridiagonal implied by CG coefficients.
inline std::pair<double, double> cg_ritz(const std::vector<double>& alpha, const std::vector<double>& beta) {
  const auto k = static_cast<Eigen::Index>(alpha.size());
  if (k == 0) return {0.0, 0.0};
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    T(j, j) = 1.0 / alpha[static_cast<std::size_t>(j)];
    if (j > 0) T(j, j) += beta[static_cast<std::size_t>(j - 1)] / alpha[static_cast<std::size_t>(j - 1)];
    if (j + 1 < k) {
      const double off = std::sqrt(beta[static_cast<std::size_t>(j)]) / alpha[static_cast<std::size_t>(j)];
      T(j, j + 1) = off;
      T(j + 1, j) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(k - 1)};
}

}  // namespace detail

/// Preconditioned CG on the Hermitian Gramian given as an operator.
inline Eigen::VectorXcd conjugate_gradient(const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& apply,
                                           const Eigen::VectorXcd& b, const Eigen::VectorXd& diag,
                                           const CgOptions& opt, CgReport& rep) {
  const Eigen::Index d = b.size();
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : static_cast<int>(d);
  Eigen::VectorXd minv = Eigen::VectorXd::Ones(d);
  if (opt.jacobi) {
    require(diag.size() == d, "conjugate_gradient: preconditioner size mismatch");
    for (Eigen::Index j = 0; j < d; ++j) minv(j) = diag(j) > 0.0 ? 1.0 / diag(j) : 1.0;
  }
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(d);
  rep = CgReport{};
  if (opt.keep_history) rep.iterates.push_back(x);
  const double bn = b.norm();
  if (bn == 0.0) {
    rep.converged = true;
    rep.status = "converged";
    return x;
  }
  Eigen::VectorXcd r = b;
  Eigen::VectorXcd z = minv.cast<cplx>().cwiseProduct(r);
  Eigen::VectorXcd p = z;
  double rz = r.dot(z).real();
  std::vector<double> alphas, betas;
  rep.min_curvature = std::numeric_limits<double>::infinity();
  rep.status = "max_iter";
  while (true) {
    rep.recursive_residual = r.norm() / bn;
    if (rep.recursive_residual <= opt.tol) {
      rep.status = "converged";
      break;
    }
    if (rep.iterations >= max_iter) break;
    const Eigen::VectorXcd q = apply(p);
    const double pq = detail::checked_curvature(p, q);
    rep.min_curvature = std::min(rep.min_curvature, pq / p.squaredNorm());
    if (!(pq > 0.0)) {
      rep.status = "breakdown";
      break;
    }
    const double alpha = rz / pq;
    x += alpha * p;
    r -= alpha * q;
    ++rep.iterations;
    if (opt.keep_history) rep.iterates.push_back(x);
    z = minv.cast<cplx>().cwiseProduct(r);
    const double rz_new = r.dot(z).real();
    const double beta = rz_new / rz;
    alphas.push_back(alpha);
    betas.push_back(beta);
    rz = rz_new;
    p = z + beta * p;
  }
  std::tie(rep.min_ritz, rep.max_ritz) = detail::cg_ritz(alphas, betas);
  rep.relative_residual = (apply(x) - b).norm() / bn;
  rep.converged = rep.status == "converged" && rep.relative_residual <= 10.0 * opt.tol;
  if (rep.status == "converged" && !rep.converged) rep.status = "max_iter";
  return x;
}

struct HumResult {
  Eigen::VectorXcd coords;  // minimizer z_T* in the test basis
  ControlTriple controls;
  Eigen::VectorXcd rhs;     // b
  double observation_energy = 0.0;  // <G c*, c*>, real and >= 0
  CgReport report;
};

/// b_j = E<y1, zeta_j> - <y0, z_j(0)> + i E sum dt <f, z_j>.
inline Eigen::VectorXcd hum_rhs(const DualSpace& space, const Eigen::VectorXcd& target, const ControlData& data) {
  require(target.size() == space.dim(), "hum_rhs: target pairing length mismatch");
  Eigen::VectorXcd b = target;
  for (int j = 0; j < space.dim(); ++j) b(j) -= data_pairing(data, space.tests[static_cast<std::size_t>(j)]);
  return b;
}

inline HumResult hum_solve(const DualSpace& space, const Eigen::VectorXcd& target, const ControlData& data = {},
                           const CgOptions& opt = {}) {
  HumResult h;
  h.rhs = hum_rhs(space, target, data);
  Eigen::VectorXd diag(space.dim());
  for (int j = 0; j < space.dim(); ++j) {
    const auto& o = space.tests[static_cast<std::size_t>(j)].obs;
    diag(j) = transposition_pairing(observation_to_control(o), o).real();
  }
  h.coords = conjugate_gradient([&space](const Eigen::VectorXcd& c) { return gramian_apply(space, c); }, h.rhs, diag,
                                opt, h.report);
  if (h.coords.squaredNorm() == 0.0) {
    h.controls = observation_to_control(space.tests.front().obs);
    h.controls.u1.setZero();
    h.controls.u2.setZero();
    for (auto& m : h.controls.g) m.setZero();
  } else {
    const auto obs = observe(*space.basis, space.solve(h.coords));
    h.controls = observation_to_control(obs);
    const cplx e = transposition_pairing(h.controls, obs);
    if (e.real() < 0.0 || std::abs(e.imag()) > 1e-8 * std::max(std::abs(e), 1e-300))
      throw NumericalError("hum_solve: observation energy is not real nonnegative");
    h.observation_energy = e.real();
  }
  return h;
}

struct VerifyReport {
  Eigen::VectorXd residuals;
  double max_residual = 0.0;
  double target_norm = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// |<y(T) - y1, zeta_j>| over the full test basis; PASS iff the maximum is
/// at most tol (1 + ||t||).
inline VerifyReport verify_target(const DualSpace& space, const ControlTriple& controls, const Eigen::VectorXcd& target,
                                  const ControlData& data = {}, double tol = 1e-5) {
  require(target.size() == space.dim(), "verify_target: target pairing length mismatch");
  VerifyReport v;
  v.residuals = (weak_terminal_state(space, controls, data) - target).cwiseAbs();
  v.max_residual = v.residuals.maxCoeff();
  v.target_norm = target.norm();
  v.threshold = tol * (1.0 + v.target_norm);
  v.pass = std::isfinite(v.max_residual) && v.max_residual <= v.threshold;
  return v;
}

}  // namespace clab
