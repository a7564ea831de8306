// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Monte-Carlo harnesses for the weighted estimates and the observability
/// inequalities.
///
/// The weighted functionals are accumulated in log space: each quadrature term
/// is log(w_q h) + 2 l + k log(lambda phi) + log|v|^2 and the sums are
/// log-sum-exp. Terms far below the running maximum vanish in double precision,
/// which is the relative form of the exp underflow floor. The ratio is
/// exp(log LHS - log RHS); its log10 is reported as well because it can leave
/// the double range. The share of the LHS carried by its largest single term
/// shows how well the space-time quadrature resolves the weight: a share near 1
/// means the sum is effectively one node.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "clab/backward_solver.hpp"
#include "clab/carleman_identity.hpp"
#include "clab/carleman_weight.hpp"
#include "clab/errors.hpp"
#include "clab/forward_solver.hpp"
#include "clab/parallel.hpp"
#include "clab/spectral_basis.hpp"

namespace clab {

/// Running log of a sum of positive terms.
class LogSum {
 public:
  void add(double log_term) {
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (log_term > m_) {
      s_ = s_ * std::exp(m_ - log_term) + 1.0;
      m_ = log_term;
    } else {
      s_ += std::exp(log_term - m_);
    }
  }
  void add(const LogSum& o) {
    if (o.s_ == 0.0) return;
    if (o.m_ > m_) {
      s_ = s_ * std::exp(m_ - o.m_) + o.s_;
      m_ = o.m_;
    } else {
      s_ += o.s_ * std::exp(o.m_ - m_);
    }
  }
  [[nodiscard]] double log() const {
    return s_ == 0.0 ? -std::numeric_limits<double>::infinity() : m_ + std::log(s_);
  }
  [[nodiscard]] bool empty() const { return s_ == 0.0; }

 private:
  double m_ = -std::numeric_limits<double>::infinity();
  double s_ = 0.0;
};

enum class Observation { interior, boundary };

struct CarlemanResult {
  double lambda = 0.0;
  double mu = 0.0;
  double log_lhs = 0.0;  // natural logs of the ensemble means
  double log_rhs = 0.0;
  double lhs = 0.0;      // may underflow to 0 or overflow to inf; use the logs
  double rhs = 0.0;
  double ratio = 0.0;
  double log10_ratio = 0.0;
  double lhs_rel_se = 0.0;  // Monte-Carlo relative standard errors
  double rhs_rel_se = 0.0;
  double peak_share = 0.0;  // mean over paths of (largest LHS term / path LHS)
  bool zero = false;  // both sides vanish; ratio is 0 by convention
};

/// A space-time field ensemble sampled on a time grid with trapezoid weights.
/// `state`, `noise` and `drift` return modal vectors for (path, time index);
/// an empty vector stands for zero.
struct SpaceTimeSample {
  std::size_t n_paths = 0;
  std::vector<double> times;
  std::vector<double> time_weights;
  std::function<Eigen::VectorXcd(std::size_t, std::size_t)> state;
  std::function<Eigen::VectorXcd(std::size_t, std::size_t)> noise;
  std::function<Eigen::VectorXcd(std::size_t, std::size_t)> drift;
};

/// Forward trajectories with data (f, g) held at the left step of each record.
/// The sample refers to `ens` and `forcing`, which must outlive it.
inline SpaceTimeSample forward_sample(const TrajectoryEnsemble& ens, const ForcingSeries& forcing) {
  require(!ens.empty(), "carleman: empty ensemble");
  const auto& t0 = ens.front();
  const std::size_t n_rec = t0.times.size();
  const std::size_t stride = t0.record_stride;
  forcing.check((n_rec - 1) * stride, static_cast<int>(t0.coeffs.rows()));
  SpaceTimeSample s;
  s.n_paths = ens.size();
  s.times = t0.times;
  const double h = t0.dt * static_cast<double>(stride);
  s.time_weights.assign(n_rec, h);
  s.time_weights.front() = s.time_weights.back() = 0.5 * h;
  s.state = [&ens](std::size_t p, std::size_t j) {
    return Eigen::VectorXcd(ens[p].coeffs.col(static_cast<Eigen::Index>(j)));
  };
  s.noise = [&forcing, stride, n_rec](std::size_t, std::size_t j) {
    if (!forcing.has_g() || j + 1 >= n_rec) return Eigen::VectorXcd();
    return forcing.g[j * stride];
  };
  s.drift = [&forcing, stride, n_rec](std::size_t, std::size_t j) {
    if (!forcing.has_f() || j + 1 >= n_rec) return Eigen::VectorXcd();
    return forcing.f[j * stride];
  };
  return s;
}

/// Backward pairs (z, Z) with drift data h.
inline SpaceTimeSample backward_sample(const BackwardEnsemble& bwd,
                                       const std::vector<Eigen::VectorXcd>& h = {}) {
  require(bwd.n_paths() > 0, "carleman: empty backward ensemble");
  const std::size_t n_steps = bwd.n_steps();
  require(h.empty() || h.size() == n_steps, "carleman: h series length must equal n_steps");
  SpaceTimeSample s;
  s.n_paths = bwd.n_paths();
  s.times = bwd.times;
  s.time_weights.assign(n_steps + 1, bwd.dt);
  s.time_weights.front() = s.time_weights.back() = 0.5 * bwd.dt;
  s.state = [&bwd](std::size_t p, std::size_t j) {
    return Eigen::VectorXcd(bwd.z[j].row(static_cast<Eigen::Index>(p)).transpose());
  };
  s.noise = [&bwd, n_steps](std::size_t p, std::size_t j) {
    if (j >= n_steps) return Eigen::VectorXcd();
    return Eigen::VectorXcd(bwd.Z[j].row(static_cast<Eigen::Index>(p)).transpose());
  };
  s.drift = [h, n_steps](std::size_t, std::size_t j) {
    if (h.empty() || j >= n_steps) return Eigen::VectorXcd();
    return h[j];
  };
  return s;
}

namespace detail {
inline double log_abs2(std::complex<double> v) {
  const double a = std::norm(v);
  return a > 0.0 ? std::log(a) : -std::numeric_limits<double>::infinity();
}

// Per-path (log LHS, log RHS) into a mean with a relative standard error.
inline void log_mean_and_rel_se(const std::vector<double>& logs, double& log_mean, double& rel_se) {
  LogSum s1, s2;
  for (double v : logs) {
    s1.add(v);
    s2.add(2.0 * v);
  }
  const double P = static_cast<double>(logs.size());
  if (s1.empty()) {
    log_mean = -std::numeric_limits<double>::infinity();
    rel_se = 0.0;
    return;
  }
  log_mean = s1.log() - std::log(P);
  // E[X^2] / E[X]^2 - 1, computed from the logs
  const double m2 = std::exp(s2.log() - std::log(P) - 2.0 * log_mean);
  const double var_rel = std::max(0.0, m2 - 1.0) * P / std::max(1.0, P - 1.0);
  rel_se = std::sqrt(var_rel / P);
}
}  // namespace detail

/// LHS and RHS of the weighted estimate for the sample under `spec`.
/// LHS = E int_Q (lp |v_xxx|^2 + lp^3 |v_xx|^2 + lp^5 |v_x|^2 + lp^7 |v|^2) theta^2,
/// lp = lambda phi. The RHS is either the interior part (lp |v_xxx|^2 + lp^7 |v|^2
/// over the window) or the traces lp |v_xxx(0)|^2 + lp^3 |v_xx(0)|^2, plus
/// E int_Q theta^2 (lp^4 |g|^2 + lp^2 |g_x|^2 + |g_xx|^2 + |f|^2).
inline CarlemanResult carleman_ratio(const BeamBasis& basis, const SpaceTimeSample& sample,
                                     const WeightSpec& spec, Observation obs) {
  const CarlemanWeight weight(spec);
  require(sample.times.size() == sample.time_weights.size(), "carleman: time weights mismatch");
  require(std::abs(sample.times.back() - spec.T) <= 1e-12 * spec.T,
          "carleman: weight horizon differs from the sample horizon");
  const auto& quad = basis.quadrature();
  const std::size_t Q = quad.size();
  const std::size_t nt = sample.times.size();

  // log(w_q h_j) + 2 l and log(lambda phi) on the node grid; -inf at t = 0, T.
  Eigen::MatrixXd base(static_cast<Eigen::Index>(Q), static_cast<Eigen::Index>(nt));
  Eigen::MatrixXd lp(static_cast<Eigen::Index>(Q), static_cast<Eigen::Index>(nt));
  std::vector<double> base0(nt), lp0(nt);
  const double ninf = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < nt; ++j) {
    const double t = sample.times[j];
    const bool inside = t > 0.0 && t < spec.T && sample.time_weights[j] > 0.0;
    for (std::size_t q = 0; q < Q; ++q) {
      const double x = quad.nodes[q];
      base(q, j) = inside ? std::log(quad.weights[q] * sample.time_weights[j]) + 2.0 * weight.log_theta(x, t)
                          : ninf;
      lp(q, j) = inside ? weight.log_lambda_phi(x, t) : 0.0;
    }
    base0[j] = inside ? std::log(sample.time_weights[j]) + 2.0 * weight.log_theta(0.0, t) : ninf;
    lp0[j] = inside ? weight.log_lambda_phi(0.0, t) : 0.0;
  }
  // Work relative to the largest weight so O(1) factors are not lost against
  // |log theta^2|, which is often 1e10 or more.
  double shift = ninf;
  for (std::size_t j = 0; j < nt; ++j) {
    shift = std::max(shift, base0[j]);
    for (std::size_t q = 0; q < Q; ++q) shift = std::max(shift, base(static_cast<Eigen::Index>(q), j));
  }
  if (shift == ninf) shift = 0.0;
  for (std::size_t j = 0; j < nt; ++j) {
    base0[j] -= shift;
    for (std::size_t q = 0; q < Q; ++q) base(static_cast<Eigen::Index>(q), j) -= shift;
  }
  std::vector<char> in_window(Q, 0);
  for (std::size_t q = 0; q < Q; ++q)
    in_window[q] = quad.nodes[q] > spec.alpha && quad.nodes[q] < spec.beta;

  const std::size_t P = sample.n_paths;
  std::vector<double> logL(P), logR(P), peak(P, ninf);
  std::vector<LogSum> totL(P);
  const Eigen::MatrixXcd T0 = basis.table(0).cast<cplx>();
  const Eigen::MatrixXcd T1 = basis.table(1).cast<cplx>();
  const Eigen::MatrixXcd T2 = basis.table(2).cast<cplx>();
  const Eigen::MatrixXcd T3 = basis.table(3).cast<cplx>();
  const Eigen::RowVectorXcd b2 = basis.boundary_row(0, 2).cast<cplx>();
  const Eigen::RowVectorXcd b3 = basis.boundary_row(0, 3).cast<cplx>();

  parallel_for(P, [&](std::size_t p) {
    LogSum L, R;
    double pk = ninf;
    for (std::size_t j = 0; j < nt; ++j) {
      if (base(0, j) == ninf && base0[j] == ninf) continue;
      const Eigen::VectorXcd c = sample.state(p, j);
      if (c.size() > 0) {
        const Eigen::VectorXcd v0 = T0 * c, v1 = T1 * c, v2 = T2 * c, v3 = T3 * c;
        for (std::size_t q = 0; q < Q; ++q) {
          const auto i = static_cast<Eigen::Index>(q);
          const double b = base(i, j);
          const double l = lp(i, j);
          const double t3 = b + l + detail::log_abs2(v3(i));
          const double t2 = b + 3.0 * l + detail::log_abs2(v2(i));
          const double t1 = b + 5.0 * l + detail::log_abs2(v1(i));
          const double t0 = b + 7.0 * l + detail::log_abs2(v0(i));
          L.add(t3);
          L.add(t2);
          L.add(t1);
          L.add(t0);
          pk = std::max({pk, t3, t2, t1, t0});
          if (obs == Observation::interior && in_window[q]) {
            R.add(t3);
            R.add(t0);
          }
        }
        if (obs == Observation::boundary) {
          R.add(base0[j] + lp0[j] + detail::log_abs2((b3 * c)(0)));
          R.add(base0[j] + 3.0 * lp0[j] + detail::log_abs2((b2 * c)(0)));
        }
      }
      const Eigen::VectorXcd g = sample.noise(p, j);
      if (g.size() > 0) {
        const Eigen::VectorXcd g0 = T0 * g, g1 = T1 * g, g2 = T2 * g;
        for (std::size_t q = 0; q < Q; ++q) {
          const auto i = static_cast<Eigen::Index>(q);
          R.add(base(i, j) + 4.0 * lp(i, j) + detail::log_abs2(g0(i)));
          R.add(base(i, j) + 2.0 * lp(i, j) + detail::log_abs2(g1(i)));
          R.add(base(i, j) + detail::log_abs2(g2(i)));
        }
      }
      const Eigen::VectorXcd f = sample.drift(p, j);
      if (f.size() > 0) {
        const Eigen::VectorXcd f0 = T0 * f;
        for (std::size_t q = 0; q < Q; ++q) {
          const auto i = static_cast<Eigen::Index>(q);
          R.add(base(i, j) + detail::log_abs2(f0(i)));
        }
      }
    }
    logL[p] = L.log();
    logR[p] = R.log();
    peak[p] = pk;
    totL[p] = L;
  });

  CarlemanResult r;
  r.lambda = spec.lambda;
  r.mu = spec.mu;
  detail::log_mean_and_rel_se(logL, r.log_lhs, r.lhs_rel_se);
  detail::log_mean_and_rel_se(logR, r.log_rhs, r.rhs_rel_se);
  const double d = r.log_lhs - r.log_rhs;
  r.log_lhs += shift;
  r.log_rhs += shift;
  r.lhs = std::exp(r.log_lhs);
  r.rhs = std::exp(r.log_rhs);
  if (r.log_lhs == ninf && r.log_rhs == ninf) {
    r.zero = true;
    r.ratio = 0.0;
    r.log10_ratio = ninf;
    return r;
  }
  if (r.log_rhs == ninf) {
    r.ratio = std::numeric_limits<double>::infinity();
    r.log10_ratio = r.ratio;
  } else {
    r.ratio = std::exp(d);
    r.log10_ratio = d / std::log(10.0);
  }
  double share = 0.0;
  std::size_t live = 0;
  for (std::size_t p = 0; p < P; ++p) {
    if (totL[p].empty()) continue;
    share += std::exp(peak[p] - totL[p].log());
    ++live;
  }
  r.peak_share = live > 0 ? share / static_cast<double>(live) : 0.0;
  return r;
}

inline CarlemanResult carleman_ratio(const BeamBasis& basis, const TrajectoryEnsemble& ens,
                                     const ForcingSeries& forcing, const WeightSpec& spec,
                                     Observation obs) {
  return carleman_ratio(basis, forward_sample(ens, forcing), spec, obs);
}

/// The same functionals over a backward ensemble, (z, Z, h) in place of (y, g, f).
inline CarlemanResult carleman_ratio_backward(const BeamBasis& basis, const BackwardEnsemble& bwd,
                                              const std::vector<Eigen::VectorXcd>& h,
                                              const WeightSpec& spec, Observation obs) {
  return carleman_ratio(basis, backward_sample(bwd, h), spec, obs);
}

/// Run the estimate for each lambda in `lambdas` with the rest of `spec` fixed.
/// `stable` holds when no ratio exceeds its predecessor by more than `growth`.
struct CarlemanSweep {
  std::vector<CarlemanResult> points;
  bool finite = true;
  bool stable = true;
};

inline CarlemanSweep carleman_sweep(const BeamBasis& basis, const SpaceTimeSample& sample, WeightSpec spec,
                                    Observation obs, const std::vector<double>& lambdas,
                                    double growth = 1.10) {
  CarlemanSweep sw;
  for (double lam : lambdas) {
    spec.lambda = lam;
    sw.points.push_back(carleman_ratio(basis, sample, spec, obs));
    const auto& r = sw.points.back();
    if (!r.zero && !std::isfinite(r.log10_ratio)) sw.finite = false;
  }
  for (std::size_t k = 1; k < sw.points.size(); ++k) {
    const auto& a = sw.points[k - 1];
    const auto& b = sw.points[k];
    if (a.zero && b.zero) continue;
    // compare in logs so underflowed ratios still compare
    if (b.log_lhs - b.log_rhs > a.log_lhs - a.log_rhs + std::log(growth)) sw.stable = false;
  }
  return sw;
}

// ---------------------------------------------------------------------------
// Observability

enum class ObservabilityMode { interior, boundary, dual };

/// One experiment: ||initial or terminal state|| against observation + data.
struct ObservabilitySample {
  double lhs = 0.0;
  double observation = 0.0;
  double data = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  bool violation = false;  // rhs = 0 with lhs > 0
};

struct ObservabilityReport {
  ObservabilityMode mode = ObservabilityMode::interior;
  std::vector<ObservabilitySample> experiments;
  double empirical_c = 0.0;
  bool violation = false;
  double min_unit_observation = std::numeric_limits<double>::infinity();
};

namespace detail {
inline void finish_sample(ObservabilitySample& s) {
  s.rhs = s.observation + s.data;
  if (s.rhs > 0.0) {
    s.ratio = s.lhs / s.rhs;
  } else if (s.lhs > 0.0) {
    s.violation = true;
    s.ratio = std::numeric_limits<double>::infinity();
  }
}

// Pathwise squared observation sums over recorded times j < last.
struct PathObservation {
  double window = 0.0;       // int int_{I0} |y|^2
  double window_xxx = 0.0;   // int int_{I0} |y_xxx|^2
  double trace_xx = 0.0;     // int |y_xx(0)|^2
  double trace_xxx = 0.0;    // int |y_xxx(0)|^2
};

inline PathObservation path_observation(const BeamBasis& basis, const Eigen::MatrixXcd& coeffs,
                                        double h, double alpha, double beta) {
  const auto& quad = basis.quadrature();
  PathObservation o;
  const Eigen::MatrixXcd V0 = basis.table(0).cast<cplx>() * coeffs.leftCols(coeffs.cols() - 1);
  const Eigen::MatrixXcd V3 = basis.table(3).cast<cplx>() * coeffs.leftCols(coeffs.cols() - 1);
  for (std::size_t q = 0; q < quad.size(); ++q) {
    if (!(quad.nodes[q] > alpha && quad.nodes[q] < beta)) continue;
    const auto i = static_cast<Eigen::Index>(q);
    o.window += quad.weights[q] * V0.row(i).squaredNorm() * h;
    o.window_xxx += quad.weights[q] * V3.row(i).squaredNorm() * h;
  }
  const Eigen::RowVectorXcd b2 = basis.boundary_row(0, 2).cast<cplx>();
  const Eigen::RowVectorXcd b3 = basis.boundary_row(0, 3).cast<cplx>();
  o.trace_xx = (b2 * coeffs.leftCols(coeffs.cols() - 1)).squaredNorm() * h;
  o.trace_xxx = (b3 * coeffs.leftCols(coeffs.cols() - 1)).squaredNorm() * h;
  return o;
}

inline double data_norm_x3(const BeamBasis& basis, const std::vector<Eigen::VectorXcd>& v, double dt) {
  double acc = 0.0;
  for (const auto& c : v) acc += std::pow(xs_norm(basis, c, 3.0), 2) * dt;
  return std::sqrt(acc);
}
}  // namespace detail

/// Interior:  sqrt(E||y0||^2_X3) against ||y||_{L2(I0)} + ||y_xxx||_{L2(I0)} + ||f|| + ||g||.
/// Boundary:  the same with ||y_xx(0)|| + ||y_xxx(0)|| as observation.
/// Norms of f, g are L2(0,T; X3); the observation norms are L2 over Omega x (0,T).
inline ObservabilitySample observability_forward(const BeamBasis& basis, const TrajectoryEnsemble& ens,
                                                 const ForcingSeries& forcing, ObservabilityMode mode,
                                                 double alpha = 0.3, double beta = 0.7) {
  require(!ens.empty(), "observability: empty ensemble");
  require(mode != ObservabilityMode::dual, "observability: dual mode needs a backward ensemble");
  const auto& t0 = ens.front();
  const double h = t0.dt * static_cast<double>(t0.record_stride);
  const std::size_t P = ens.size();
  std::vector<detail::PathObservation> obs(P);
  std::vector<double> y0(P);
  parallel_for(P, [&](std::size_t p) {
    obs[p] = detail::path_observation(basis, ens[p].coeffs, h, alpha, beta);
    y0[p] = std::pow(xs_norm(basis, ens[p].coeffs.col(0), 3.0), 2);
  });
  detail::PathObservation m;
  double e0 = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    m.window += obs[p].window;
    m.window_xxx += obs[p].window_xxx;
    m.trace_xx += obs[p].trace_xx;
    m.trace_xxx += obs[p].trace_xxx;
    e0 += y0[p];
  }
  const double np = static_cast<double>(P);
  ObservabilitySample s;
  s.lhs = std::sqrt(e0 / np);
  s.observation = mode == ObservabilityMode::interior
                      ? std::sqrt(m.window / np) + std::sqrt(m.window_xxx / np)
                      : std::sqrt(m.trace_xx / np) + std::sqrt(m.trace_xxx / np);
  s.data = detail::data_norm_x3(basis, forcing.f, t0.dt) + detail::data_norm_x3(basis, forcing.g, t0.dt);
  detail::finish_sample(s);
  return s;
}

/// Dual: sqrt(E||z_T||^2_X3) against ||z_xx(0)|| + ||z_xxx(0)|| + ||Z||_{L2(0,T;X3)}.
inline ObservabilitySample observability_dual(const BeamBasis& basis, const BackwardEnsemble& bwd) {
  const std::size_t P = bwd.n_paths();
  require(P > 0, "observability: empty backward ensemble");
  const std::size_t n = bwd.n_steps();
  const Eigen::VectorXcd b2 = basis.boundary_row(0, 2).transpose().cast<cplx>();
  const Eigen::VectorXcd b3 = basis.boundary_row(0, 3).transpose().cast<cplx>();
  Eigen::VectorXd w3(basis.size());
  for (int k = 0; k < basis.size(); ++k) w3(k) = std::pow(1.0 + basis.lambda()(k), 1.5);
  double txx = 0.0, txxx = 0.0, zz = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    txx += (bwd.z[j] * b2).squaredNorm() * bwd.dt;
    txxx += (bwd.z[j] * b3).squaredNorm() * bwd.dt;
    zz += (bwd.Z[j].cwiseAbs2() * w3).sum() * bwd.dt;
  }
  const double zt = (bwd.z[n].cwiseAbs2() * w3).sum();
  const double np = static_cast<double>(P);
  ObservabilitySample s;
  s.lhs = std::sqrt(zt / np);
  s.observation = std::sqrt(txx / np) + std::sqrt(txxx / np);
  s.data = std::sqrt(zz / np);
  detail::finish_sample(s);
  return s;
}

/// Smallest pathwise observation over members with unit initial X3 norm
/// (each member is rescaled; the equation is linear). Forward modes only and
/// homogeneous data are assumed.
inline double min_unit_observation(const BeamBasis& basis, const TrajectoryEnsemble& ens,
                                   ObservabilityMode mode, double alpha = 0.3, double beta = 0.7) {
  require(mode != ObservabilityMode::dual, "min_unit_observation: forward modes only");
  double mn = std::numeric_limits<double>::infinity();
  for (const auto& tr : ens) {
    const double n0 = xs_norm(basis, tr.coeffs.col(0), 3.0);
    if (n0 == 0.0) continue;
    const auto o = detail::path_observation(basis, tr.coeffs, tr.dt * static_cast<double>(tr.record_stride),
                                            alpha, beta);
    const double v = mode == ObservabilityMode::interior ? std::sqrt(o.window) + std::sqrt(o.window_xxx)
                                                         : std::sqrt(o.trace_xx) + std::sqrt(o.trace_xxx);
    mn = std::min(mn, v / n0);
  }
  return mn;
}

/// Pathwise dual observation over members with unit terminal X3 norm.
inline double min_unit_observation(const BeamBasis& basis, const BackwardEnsemble& bwd) {
  double mn = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < bwd.n_paths(); ++p) {
    const BackwardSolution s = bwd.path_solution(p);
    const double n0 = xs_norm(basis, s.zT, 3.0);
    if (n0 == 0.0) continue;
    const Eigen::RowVectorXcd b2 = basis.boundary_row(0, 2).cast<cplx>();
    const Eigen::RowVectorXcd b3 = basis.boundary_row(0, 3).cast<cplx>();
    const auto cols = s.z.leftCols(s.z.cols() - 1);
    double zz = 0.0;
    for (Eigen::Index j = 0; j < s.Z.cols(); ++j) zz += std::pow(xs_norm(basis, s.Z.col(j), 3.0), 2) * s.dt;
    const double v = std::sqrt((b2 * cols).squaredNorm() * s.dt) + std::sqrt((b3 * cols).squaredNorm() * s.dt) +
                     std::sqrt(zz);
    mn = std::min(mn, v / n0);
  }
  return mn;
}

inline ObservabilityReport summarize_observability(ObservabilityMode mode,
                                                   std::vector<ObservabilitySample> experiments,
                                                   double min_unit = std::numeric_limits<double>::infinity()) {
  ObservabilityReport r;
  r.mode = mode;
  r.experiments = std::move(experiments);
  r.min_unit_observation = min_unit;
  for (const auto& s : r.experiments) {
    r.violation = r.violation || s.violation;
    r.empirical_c = std::max(r.empirical_c, s.ratio);
  }
  return r;
}

}  // namespace clab
