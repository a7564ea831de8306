// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Galerkin solver for i dy + y_xxxx dt = (a y + f) dt + (b y + g) dw with
/// clamped boundary data.
///
/// In modal coordinates dc = (A c + u) dt + (B c + v) dw where
///   A_kj = -i[(a phi_j, phi_k) - lambda_j delta_kj],  B_kj = -i (b phi_j, phi_k),
///   u_k = -i (f, phi_k),  v_k = -i (g, phi_k).
/// The midpoint scheme applies the Cayley factor of the stiff i*lambda diagonal
/// after an explicit step of the remaining terms:
///   c_{n+1} = R ((I + A' dt)(c_n + u_n dt) + (B c_n + v_n) dW_n),
///   R = (1 + i lambda dt / 2) / (1 - i lambda dt / 2),  A' = A - i Lambda.
/// Free modes keep their modulus exactly, and the noise increment is not damped
/// by the implicit average, so E|c|^2 grows at the continuous rate.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "clab/errors.hpp"
#include "clab/noise.hpp"
#include "clab/parallel.hpp"
#include "clab/spectral_basis.hpp"

namespace clab {

using cplx = std::complex<double>;
inline constexpr cplx kI{0.0, 1.0};

/// A coefficient such as a(x) or b(x) sampled on the quadrature nodes.
inline Eigen::VectorXcd constant_field(const BeamBasis& basis, cplx v) {
  return Eigen::VectorXcd::Constant(static_cast<Eigen::Index>(basis.quadrature().size()), v);
}

/// Modal data with entry k a standard complex normal times (k+1)^{-decay},
/// drawn from the data stream so item j is the same vector for every n >= k.
inline Eigen::VectorXcd random_modal_vector(int n, std::uint64_t seed, std::uint64_t item, double decay) {
  require(n >= 1, "random_modal_vector: need at least one mode");
  const GaussianSource src(seed, NoiseStream::data, item);
  Eigen::VectorXcd c(n);
  for (int k = 0; k < n; ++k)
    c(k) = cplx(src.at(2 * static_cast<std::uint64_t>(k)), src.at(2 * static_cast<std::uint64_t>(k) + 1)) /
           std::pow(k + 1.0, decay);
  return c;
}

inline Eigen::VectorXcd field_from_function(const BeamBasis& basis,
                                            const std::function<cplx(double)>& f) {
  return sample_on_nodes(basis, f);
}

struct GeneratorMatrices {
  Eigen::MatrixXcd a;         // full drift matrix, i*Lambda included
  Eigen::MatrixXcd b;         // noise matrix
  Eigen::MatrixXcd a_nonstiff;  // a minus the i*Lambda diagonal
  Eigen::VectorXd lambda;

  [[nodiscard]] int size() const { return static_cast<int>(lambda.size()); }
};

inline GeneratorMatrices assemble_generator(const Eigen::VectorXcd& a_nodes,
                                            const Eigen::VectorXcd& b_nodes,
                                            const BeamBasis& basis) {
  const auto q = static_cast<Eigen::Index>(basis.quadrature().size());
  require(a_nodes.size() == q && b_nodes.size() == q,
          "assemble_generator: coefficients must be sampled on the " + std::to_string(q) +
              " quadrature nodes");
  GeneratorMatrices g;
  g.lambda = basis.lambda();
  g.a_nonstiff = -kI * basis.weighted_mass(a_nodes);
  g.a = g.a_nonstiff;
  g.a.diagonal() += kI * g.lambda.cast<cplx>();
  g.b = -kI * basis.weighted_mass(b_nodes);
  return g;
}

/// Modal projections (f(t_n), phi_k) and (g(t_n), phi_k) at the left point of
/// each step. Empty vectors mean zero forcing.
struct ForcingSeries {
  std::vector<Eigen::VectorXcd> f;
  std::vector<Eigen::VectorXcd> g;

  [[nodiscard]] bool has_f() const { return !f.empty(); }
  [[nodiscard]] bool has_g() const { return !g.empty(); }

  static ForcingSeries none() { return {}; }

  /// Time-independent modal forcing repeated over n_steps.
  static ForcingSeries constant(std::size_t n_steps, const Eigen::VectorXcd& f,
                                const Eigen::VectorXcd& g) {
    ForcingSeries s;
    if (f.size() > 0 && f.cwiseAbs().maxCoeff() > 0.0) s.f.assign(n_steps, f);
    if (g.size() > 0 && g.cwiseAbs().maxCoeff() > 0.0) s.g.assign(n_steps, g);
    return s;
  }

  /// Project f(x,t) and g(x,t) at t_n = n T / n_steps; null functions mean zero.
  static ForcingSeries from_functions(const BeamBasis& basis,
                                      const std::function<cplx(double, double)>& f,
                                      const std::function<cplx(double, double)>& g, double T,
                                      std::size_t n_steps) {
    ForcingSeries s;
    const double dt = T / static_cast<double>(n_steps);
    for (std::size_t n = 0; n < n_steps; ++n) {
      const double t = dt * static_cast<double>(n);
      if (f) s.f.push_back(project(basis, [&](double x) { return f(x, t); }).c);
      if (g) s.g.push_back(project(basis, [&](double x) { return g(x, t); }).c);
    }
    return s;
  }

  void check(std::size_t n_steps, int n_modes) const {
    require(f.empty() || f.size() == n_steps, "forcing: f series length must equal n_steps");
    require(g.empty() || g.size() == n_steps, "forcing: g series length must equal n_steps");
    for (const auto& v : f) require(v.size() == n_modes, "forcing: f has wrong mode count");
    for (const auto& v : g) require(v.size() == n_modes, "forcing: g has wrong mode count");
  }
};

enum class ForwardScheme { euler_maruyama, drift_implicit_midpoint };

struct ForwardOptions {
  ForwardScheme scheme = ForwardScheme::drift_implicit_midpoint;
  std::size_t record_stride = 1;
};

struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXcd coeffs;  // modes x recorded times
  std::size_t record_stride = 1;
  double dt = 0.0;
  std::uint64_t path_index = 0;

  [[nodiscard]] SpectralState state(std::size_t j) const {
    return {coeffs.col(static_cast<Eigen::Index>(j)), times.at(j)};
  }
  [[nodiscard]] Eigen::VectorXcd final_state() const { return coeffs.col(coeffs.cols() - 1); }
};

using TrajectoryEnsemble = std::vector<Trajectory>;

namespace detail {

inline Eigen::VectorXcd cayley_factor(const Eigen::VectorXd& lambda, double dt) {
  Eigen::VectorXcd r(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    const cplx den = 1.0 - kI * lambda(k) * dt / 2.0;
    if (std::abs(den) == 0.0) throw NumericalError("midpoint step: singular implicit solve");
    r(k) = (1.0 + kI * lambda(k) * dt / 2.0) / den;
  }
  return r;
}

template <typename GenAt>
Trajectory solve_forward_impl(GenAt&& gen_at, int n_modes, const Eigen::VectorXcd& y0,
                              const ForcingSeries& forcing, const BrownianPath& path,
                              const ForwardOptions& opt) {
  require(y0.size() == n_modes, "solve_forward: y0 has wrong mode count");
  require(opt.record_stride >= 1 && path.n_steps % opt.record_stride == 0,
          "solve_forward: record_stride must divide n_steps");
  forcing.check(path.n_steps, n_modes);
  if (!y0.allFinite()) throw NumericalError("solve_forward: non-finite initial state");

  const double dt = path.dt();
  Trajectory tr;
  tr.dt = dt;
  tr.record_stride = opt.record_stride;
  tr.path_index = path.index;
  const std::size_t n_rec = path.n_steps / opt.record_stride + 1;
  tr.coeffs.resize(n_modes, static_cast<Eigen::Index>(n_rec));
  tr.times.resize(n_rec);

  Eigen::VectorXcd c = y0;
  Eigen::VectorXcd k(n_modes);
  tr.coeffs.col(0) = c;
  tr.times[0] = 0.0;
  Eigen::VectorXcd R;
  const GeneratorMatrices* cached_for_r = nullptr;
  for (std::size_t n = 0; n < path.n_steps; ++n) {
    const GeneratorMatrices& g = gen_at(n);
    const double dw = path.increments[n];
    if (opt.scheme == ForwardScheme::euler_maruyama) {
      k.noalias() = g.a * c * dt;
      k.noalias() += g.b * c * dw;
      if (forcing.has_f()) k += -kI * forcing.f[n] * dt;
    } else {
      // f enters ahead of the drift factor, which makes the step exactly
      // adjoint to the backward step under the left-point f quadrature
      k.noalias() = g.b * c * dw;
      if (forcing.has_f()) c += -kI * forcing.f[n] * dt;
      k.noalias() += g.a_nonstiff * c * dt;
    }
    if (forcing.has_g()) k += -kI * forcing.g[n] * dw;
    if (opt.scheme == ForwardScheme::euler_maruyama) {
      c += k;
    } else {
      if (cached_for_r != &g) {
        R = cayley_factor(g.lambda, dt);
        cached_for_r = &g;
      }
      c = R.cwiseProduct(c + k);
    }
    if (!c.allFinite())
      throw NumericalError("solve_forward: non-finite state at step " + std::to_string(n + 1));
    if ((n + 1) % opt.record_stride == 0) {
      const std::size_t j = (n + 1) / opt.record_stride;
      tr.coeffs.col(static_cast<Eigen::Index>(j)) = c;
      tr.times[j] = dt * static_cast<double>(n + 1);
    }
  }
  return tr;
}

}  // namespace detail

/// One path with frozen coefficients.
inline Trajectory solve_forward(const GeneratorMatrices& gen, const Eigen::VectorXcd& y0,
                                const ForcingSeries& forcing, const BrownianPath& path,
                                const ForwardOptions& opt = {}) {
  return detail::solve_forward_impl([&](std::size_t) -> const GeneratorMatrices& { return gen; },
                                    gen.size(), y0, forcing, path, opt);
}

/// One path with coefficients reassembled per step (one generator per step).
inline Trajectory solve_forward(const std::vector<GeneratorMatrices>& gens,
                                const Eigen::VectorXcd& y0, const ForcingSeries& forcing,
                                const BrownianPath& path, const ForwardOptions& opt = {}) {
  require(gens.size() == path.n_steps, "solve_forward: need one generator per step");
  return detail::solve_forward_impl(
      [&](std::size_t n) -> const GeneratorMatrices& { return gens[n]; }, gens.front().size(), y0,
      forcing, path, opt);
}

inline TrajectoryEnsemble solve_forward_ensemble(const GeneratorMatrices& gen,
                                                 const Eigen::VectorXcd& y0,
                                                 const ForcingSeries& forcing,
                                                 const std::vector<BrownianPath>& paths,
                                                 const ForwardOptions& opt = {}) {
  TrajectoryEnsemble out(paths.size());
  parallel_for(paths.size(), [&](std::size_t p) {
    out[p] = solve_forward(gen, y0, forcing, paths[p], opt);
  });
  return out;
}

/// Per-time E||y(t)||^2_{X_s} and the smallest C with
/// E||y(t)||^2 <= C [E||y(tau)||^2 + E int_t^tau (||f||^2 + ||g||^2)] over recorded t <= tau.
struct EnergyReport {
  double s = 0.0;
  std::vector<double> times;
  std::vector<double> mean_norm2;
  double empirical_c = 1.0;
  bool unbounded = false;  // nonzero energy against a zero right-hand side
};

inline EnergyReport energy_report(const TrajectoryEnsemble& ens, const BeamBasis& basis, double s,
                                  const ForcingSeries& forcing = {}) {
  require(!ens.empty(), "energy_report: empty ensemble");
  const auto& t0 = ens.front();
  const std::size_t n_rec = t0.times.size();
  EnergyReport rep;
  rep.s = s;
  rep.times = t0.times;
  rep.mean_norm2.assign(n_rec, 0.0);
  for (const auto& tr : ens) {
    require(tr.times.size() == n_rec, "energy_report: trajectories on different grids");
    for (std::size_t j = 0; j < n_rec; ++j) {
      const double v = xs_norm(basis, tr.coeffs.col(static_cast<Eigen::Index>(j)), s);
      rep.mean_norm2[j] += v * v;
    }
  }
  for (double& v : rep.mean_norm2) v /= static_cast<double>(ens.size());

  // Cumulative data integral at each recorded time.
  const std::size_t stride = t0.record_stride;
  std::vector<double> data(n_rec, 0.0);
  double acc = 0.0;
  const std::size_t n_steps = (n_rec - 1) * stride;
  for (std::size_t n = 0; n < n_steps; ++n) {
    double d = 0.0;
    if (forcing.has_f()) d += std::pow(xs_norm(basis, forcing.f[n], s), 2);
    if (forcing.has_g()) d += std::pow(xs_norm(basis, forcing.g[n], s), 2);
    acc += d * t0.dt;
    if ((n + 1) % stride == 0) data[(n + 1) / stride] = acc;
  }
  double c = 1.0;
  for (std::size_t i = 0; i < n_rec; ++i) {
    for (std::size_t j = i; j < n_rec; ++j) {
      const double rhs = rep.mean_norm2[j] + (data[j] - data[i]);
      if (rhs > 0.0) {
        c = std::max(c, rep.mean_norm2[i] / rhs);
      } else if (rep.mean_norm2[i] > 0.0) {
        rep.unbounded = true;
      }
    }
  }
  rep.empirical_c = rep.unbounded ? std::numeric_limits<double>::infinity() : c;
  return rep;
}

/// L2_F(0,T) norms of the four boundary traces and the smallest constant C in
/// sum of trace norms <= C (||y0||_{X3} + ||f||_{L2(X3)} + ||g||_{L2(X3)}).
struct HiddenRegularityReport {
  double yxx0 = 0.0, yxx1 = 0.0, yxxx0 = 0.0, yxxx1 = 0.0;
  double data_norm = 0.0;
  double empirical_c = 0.0;
  bool unbounded = false;
};

inline HiddenRegularityReport hidden_regularity_report(const TrajectoryEnsemble& ens,
                                                       const BeamBasis& basis,
                                                       const ForcingSeries& forcing = {}) {
  require(!ens.empty(), "hidden_regularity_report: empty ensemble");
  const auto& t0 = ens.front();
  const std::size_t n_rec = t0.times.size();
  const double h = t0.dt * static_cast<double>(t0.record_stride);
  HiddenRegularityReport rep;
  const auto& r20 = basis.boundary_row(0, 2);
  const auto& r21 = basis.boundary_row(1, 2);
  const auto& r30 = basis.boundary_row(0, 3);
  const auto& r31 = basis.boundary_row(1, 3);
  double y0n = 0.0;
  for (const auto& tr : ens) {
    require(tr.times.size() == n_rec, "hidden_regularity_report: trajectories on different grids");
    for (std::size_t j = 0; j + 1 < n_rec; ++j) {
      const auto c = tr.coeffs.col(static_cast<Eigen::Index>(j));
      rep.yxx0 += std::norm((r20.cast<cplx>() * c)(0)) * h;
      rep.yxx1 += std::norm((r21.cast<cplx>() * c)(0)) * h;
      rep.yxxx0 += std::norm((r30.cast<cplx>() * c)(0)) * h;
      rep.yxxx1 += std::norm((r31.cast<cplx>() * c)(0)) * h;
    }
    y0n += std::pow(xs_norm(basis, tr.coeffs.col(0), 3.0), 2);
  }
  const double np = static_cast<double>(ens.size());
  rep.yxx0 = std::sqrt(rep.yxx0 / np);
  rep.yxx1 = std::sqrt(rep.yxx1 / np);
  rep.yxxx0 = std::sqrt(rep.yxxx0 / np);
  rep.yxxx1 = std::sqrt(rep.yxxx1 / np);
  double fn = 0.0;
  double gn = 0.0;
  for (const auto& v : forcing.f) fn += std::pow(xs_norm(basis, v, 3.0), 2) * t0.dt;
  for (const auto& v : forcing.g) gn += std::pow(xs_norm(basis, v, 3.0), 2) * t0.dt;
  rep.data_norm = std::sqrt(y0n / np) + std::sqrt(fn) + std::sqrt(gn);
  const double lhs = rep.yxx0 + rep.yxx1 + rep.yxxx0 + rep.yxxx1;
  if (rep.data_norm > 0.0) {
    rep.empirical_c = lhs / rep.data_norm;
  } else if (lhs > 0.0) {
    rep.unbounded = true;
    rep.empirical_c = std::numeric_limits<double>::infinity();
  }
  return rep;
}

}  // namespace clab
