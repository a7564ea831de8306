// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Clamped-beam eigenbasis on (0,1).
///
/// The modes solve phi'''' = lambda phi with phi = phi' = 0 at both ends.
/// With lambda = mu^4 the frequencies are the roots of cos(mu) cosh(mu) = 1
/// and the eigenfunctions are
///
///   phi(x) = C [cosh(mu x) - cos(mu x) - sigma (sinh(mu x) - sin(mu x))],
///   sigma  = (cosh mu - cos mu) / (sinh mu - sin mu).
///
/// The hyperbolic part is evaluated as (1-sigma)/2 e^{mu x} + (1+sigma)/2 e^{-mu x}
/// with 1-sigma computed from a cancellation-free expression, so high modes
/// stay accurate near x = 1.

#include <Eigen/Dense>
#include <boost/math/constants/constants.hpp>
#include <boost/math/special_functions/legendre.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "clab/errors.hpp"

namespace clab {

// 120 digits: at mu_64 ~ 203, cosh(mu) ~ 1e88, so one ulp of the root must be
// far below 1e-98 for the characteristic residual to reach 1e-10.
using hp_float = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<120>>;

inline constexpr int kMaxModes = 64;

/// Nodes and weights of a composite quadrature rule.
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
  double a = 0.0;
  double b = 1.0;
  int cells = 0;
  int nodes_per_cell = 0;

  [[nodiscard]] std::size_t size() const { return nodes.size(); }

  /// Gauss-Legendre with `n` nodes in each of `cells` equal cells of (a,b).
  static Quadrature gauss_legendre(double a, double b, int cells, int n) {
    require(b > a, "quadrature: empty interval");
    require(cells >= 1 && n >= 1 && n <= 64, "quadrature: bad cell or node count");
    // Boost returns the non-negative Legendre roots; mirror them.
    std::vector<double> ref_x;
    std::vector<double> ref_w;
    const auto zeros = boost::math::legendre_p_zeros<double>(n);
    for (double z : zeros) {
      const double dp = boost::math::legendre_p_prime(n, z);
      const double w = 2.0 / ((1.0 - z * z) * dp * dp);
      if (z == 0.0) {
        ref_x.push_back(0.0);
        ref_w.push_back(w);
      } else {
        ref_x.push_back(-z);
        ref_w.push_back(w);
        ref_x.push_back(z);
        ref_w.push_back(w);
      }
    }
    Quadrature q;
    q.a = a;
    q.b = b;
    q.cells = cells;
    q.nodes_per_cell = n;
    const double h = (b - a) / cells;
    for (int c = 0; c < cells; ++c) {
      const double mid = a + (c + 0.5) * h;
      for (std::size_t i = 0; i < ref_x.size(); ++i) {
        q.nodes.push_back(mid + 0.5 * h * ref_x[i]);
        q.weights.push_back(0.5 * h * ref_w[i]);
      }
    }
    return q;
  }

  static Quadrature standard() { return gauss_legendre(0.0, 1.0, 32, 16); }
};

struct BeamMode {
  int index = 0;                // 1-based
  double mu = 0.0;
  double lambda = 0.0;          // mu^4
  double sigma = 0.0;
  double log_abs_one_minus_sigma = 0.0;
  int sign_one_minus_sigma = 1;
  double norm = 1.0;            // C
  hp_float mu_hp;               // 120-digit root
};

namespace detail {

inline double bisect_beam_root(double lo, double hi) {
  auto f = [](double m) { return std::cos(m) - 1.0 / std::cosh(m); };
  double flo = f(lo);
  const double fhi = f(hi);
  if (!(flo * fhi < 0.0))
    throw NumericalError("beam_spectrum: root bracket [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "] has no sign change");
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline hp_float refine_beam_root(double mu0) {
  using boost::multiprecision::cos;
  using boost::multiprecision::cosh;
  using boost::multiprecision::sin;
  using boost::multiprecision::sinh;
  hp_float m = mu0;
  for (int it = 0; it < 12; ++it) {
    const hp_float fv = cos(m) * cosh(m) - 1;
    const hp_float dv = cos(m) * sinh(m) - sin(m) * cosh(m);
    const hp_float step = fv / dv;
    m -= step;
    if (boost::multiprecision::abs(step) < hp_float("1e-115")) break;
  }
  return m;
}

}  // namespace detail

/// |cos(mu) cosh(mu) - 1| evaluated at the stored high-precision root.
inline double characteristic_residual(const BeamMode& m) {
  using boost::multiprecision::cos;
  using boost::multiprecision::cosh;
  return static_cast<double>(boost::multiprecision::abs(cos(m.mu_hp) * cosh(m.mu_hp) - 1));
}

namespace detail {

/// Unnormalised r-th derivative of the mode shape.
inline double mode_shape(const BeamMode& m, double x, int r) {
  const double z = m.mu * x;
  const double ep = 0.5 * m.sign_one_minus_sigma *
                    std::exp(z + m.log_abs_one_minus_sigma);
  const double em = 0.5 * (1.0 + m.sigma) * std::exp(-z) * ((r % 2 == 0) ? 1.0 : -1.0);
  const double c = std::cos(z);
  const double s = std::sin(z);
  double cr = 0.0;
  double sr = 0.0;
  switch (r % 4) {
    case 0: cr = c; sr = s; break;
    case 1: cr = -s; sr = c; break;
    case 2: cr = -c; sr = -s; break;
    default: cr = s; sr = -c; break;
  }
  return std::pow(m.mu, r) * (ep + em - cr + m.sigma * sr);
}

}  // namespace detail

/// r-th x-derivative (0 <= r <= 4) of the normalised eigenfunction.
inline double eigenfunction_eval(const BeamMode& m, double x, int r) {
  require(r >= 0 && r <= 4, "eigenfunction_eval: derivative order must be in [0,4]");
  require(x >= 0.0 && x <= 1.0, "eigenfunction_eval: x outside [0,1]");
  return m.norm * detail::mode_shape(m, x, r);
}

/// First `n_modes` clamped-beam modes, ordered by frequency.
inline std::vector<BeamMode> beam_spectrum(int n_modes) {
  require(n_modes >= 1 && n_modes <= kMaxModes,
          "beam_spectrum: n_modes must be in [1, " + std::to_string(kMaxModes) + "]");
  using boost::multiprecision::cos;
  using boost::multiprecision::cosh;
  using boost::multiprecision::exp;
  using boost::multiprecision::log;
  using boost::multiprecision::sin;
  using boost::multiprecision::sinh;
  const double pi = boost::math::constants::pi<double>();
  const Quadrature fine = Quadrature::gauss_legendre(0.0, 1.0, 64, 16);
  std::vector<BeamMode> out;
  out.reserve(static_cast<std::size_t>(n_modes));
  for (int k = 1; k <= n_modes; ++k) {
    const double centre = (k + 0.5) * pi;
    const double mu0 = detail::bisect_beam_root(centre - 0.5, centre + 0.5);
    BeamMode m;
    m.index = k;
    m.mu_hp = detail::refine_beam_root(mu0);
    m.mu = static_cast<double>(m.mu_hp);
    m.lambda = std::pow(m.mu, 4);
    const hp_float& M = m.mu_hp;
    const hp_float denom = sinh(M) - sin(M);
    m.sigma = static_cast<double>((cosh(M) - cos(M)) / denom);
    // 1 - sigma = (cos mu - sin mu - e^{-mu}) / (sinh mu - sin mu)
    const hp_float oms = (cos(M) - sin(M) - exp(-M)) / denom;
    m.sign_one_minus_sigma = oms < 0 ? -1 : 1;
    m.log_abs_one_minus_sigma = static_cast<double>(log(boost::multiprecision::abs(oms)));
    m.norm = 1.0;
    double nrm2 = 0.0;
    for (std::size_t q = 0; q < fine.size(); ++q) {
      const double v = detail::mode_shape(m, fine.nodes[q], 0);
      nrm2 += fine.weights[q] * v * v;
    }
    if (!(nrm2 > 0.0) || !std::isfinite(nrm2))
      throw NumericalError("beam_spectrum: degenerate normalisation for mode " + std::to_string(k));
    m.norm = 1.0 / std::sqrt(nrm2);
    out.push_back(m);
  }
  return out;
}

/// Modal coefficients c_k(t), optionally tagged with a time.
struct SpectralState {
  Eigen::VectorXcd c;
  double t = 0.0;
};

/// Truncated basis with precomputed tables on the quadrature nodes.
class BeamBasis {
 public:
  explicit BeamBasis(int n_modes, Quadrature quad = Quadrature::standard())
      : modes_(beam_spectrum(n_modes)), quad_(std::move(quad)) {
    require(quad_.a == 0.0 && quad_.b == 1.0, "BeamBasis: quadrature must cover (0,1)");
    lambda_.resize(n_modes);
    for (int k = 0; k < n_modes; ++k) lambda_(k) = modes_[k].lambda;
    for (int r = 0; r <= 4; ++r) tables_[r] = table_at(quad_.nodes, r);
    for (int r = 0; r <= 4; ++r) {
      boundary_[0][r] = table_at({0.0}, r).row(0);
      boundary_[1][r] = table_at({1.0}, r).row(0);
    }
    weights_ = Eigen::Map<const Eigen::VectorXd>(quad_.weights.data(),
                                                 static_cast<Eigen::Index>(quad_.size()));
  }

  [[nodiscard]] int size() const { return static_cast<int>(modes_.size()); }
  [[nodiscard]] const std::vector<BeamMode>& modes() const { return modes_; }
  [[nodiscard]] const Quadrature& quadrature() const { return quad_; }
  [[nodiscard]] const Eigen::VectorXd& lambda() const { return lambda_; }
  [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }

  /// phi_k^{(r)}(x_q) as a (nodes x modes) matrix.
  [[nodiscard]] const Eigen::MatrixXd& table(int r) const {
    require(r >= 0 && r <= 4, "BeamBasis::table: order must be in [0,4]");
    return tables_[r];
  }

  [[nodiscard]] Eigen::MatrixXd table_at(const std::vector<double>& x, int r) const {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(x.size()), size());
    for (std::size_t i = 0; i < x.size(); ++i)
      for (int k = 0; k < size(); ++k)
        t(static_cast<Eigen::Index>(i), k) = eigenfunction_eval(modes_[k], x[i], r);
    return t;
  }

  /// phi_k^{(r)} at x = 0 (endpoint 0) or x = 1 (endpoint 1).
  [[nodiscard]] const Eigen::RowVectorXd& boundary_row(int endpoint, int r) const {
    require(endpoint == 0 || endpoint == 1, "boundary_row: endpoint must be 0 or 1");
    require(r >= 0 && r <= 4, "boundary_row: order must be in [0,4]");
    return boundary_[endpoint][r];
  }

  /// (phi_j, phi_k) under the module quadrature.
  [[nodiscard]] Eigen::MatrixXd gram() const {
    return tables_[0].transpose() * weights_.asDiagonal() * tables_[0];
  }

  /// (c phi_j, phi_k) for a coefficient sampled on the quadrature nodes; entry (k, j).
  [[nodiscard]] Eigen::MatrixXcd weighted_mass(const Eigen::VectorXcd& c_nodes) const {
    require(c_nodes.size() == static_cast<Eigen::Index>(quad_.size()),
            "weighted_mass: coefficient must be sampled on the quadrature nodes");
    const Eigen::VectorXcd wc = weights_.cast<std::complex<double>>().cwiseProduct(c_nodes);
    return tables_[0].transpose().cast<std::complex<double>>() * wc.asDiagonal() *
           tables_[0].cast<std::complex<double>>();
  }

 private:
  std::vector<BeamMode> modes_;
  Quadrature quad_;
  Eigen::VectorXd lambda_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd tables_[5];
  Eigen::RowVectorXd boundary_[2][5];
};

/// Sample a function on the quadrature nodes.
inline Eigen::VectorXcd sample_on_nodes(const BeamBasis& basis,
                                        const std::function<std::complex<double>(double)>& f) {
  const auto& q = basis.quadrature();
  Eigen::VectorXcd v(static_cast<Eigen::Index>(q.size()));
  for (std::size_t i = 0; i < q.size(); ++i) v(static_cast<Eigen::Index>(i)) = f(q.nodes[i]);
  return v;
}

/// L2 projection of nodal values onto the basis.
inline SpectralState project(const BeamBasis& basis, const Eigen::VectorXcd& nodal) {
  require(nodal.size() == static_cast<Eigen::Index>(basis.quadrature().size()),
          "project: field must be sampled on the quadrature nodes");
  if (!nodal.allFinite()) throw NumericalError("project: non-finite field values");
  SpectralState s;
  s.c = basis.table(0).transpose().cast<std::complex<double>>() *
        basis.weights().cast<std::complex<double>>().cwiseProduct(nodal);
  return s;
}

inline SpectralState project(const BeamBasis& basis,
                             const std::function<std::complex<double>(double)>& f) {
  return project(basis, sample_on_nodes(basis, f));
}

/// r-th derivative of the truncated expansion at points x.
inline Eigen::VectorXcd synthesize(const BeamBasis& basis, const Eigen::VectorXcd& c,
                                   const std::vector<double>& x, int r) {
  require(c.size() == basis.size(), "synthesize: coefficient length mismatch");
  return basis.table_at(x, r).cast<std::complex<double>>() * c;
}

inline std::complex<double> synthesize(const BeamBasis& basis, const Eigen::VectorXcd& c,
                                       double x, int r) {
  return synthesize(basis, c, std::vector<double>{x}, r)(0);
}

/// Spectral norm (sum_k (1 + lambda_k)^{s/2} |c_k|^2)^{1/2}; s = 3 and s = -3
/// are the state and dual norms used throughout.
inline double xs_norm(const BeamBasis& basis, const Eigen::VectorXcd& c, double s) {
  require(c.size() == basis.size(), "xs_norm: coefficient length mismatch");
  require(s >= -4.0 && s <= 4.0, "xs_norm: s must lie in [-4, 4]");
  double acc = 0.0;
  for (int k = 0; k < basis.size(); ++k)
    acc += std::pow(1.0 + basis.lambda()(k), 0.5 * s) * std::norm(c(k));
  return std::sqrt(acc);
}

/// d^r/dx^r of the expansion at x = 0 or x = 1.
inline std::complex<double> boundary_trace(const BeamBasis& basis, const Eigen::VectorXcd& c,
                                           int endpoint, int r) {
  require(c.size() == basis.size(), "boundary_trace: coefficient length mismatch");
  return basis.boundary_row(endpoint, r).cast<std::complex<double>>() * c;
}

}  // namespace clab
