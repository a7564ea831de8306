// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "clab/spectral_basis.hpp"

namespace {

// Independent root oracle: plain bisection on cos(mu) cosh(mu) - 1.
double bisect(double lo, double hi) {
  auto f = [](double m) { return std::cos(m) * std::cosh(m) - 1.0; };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((f(mid) < 0) == (f(lo) < 0)) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

const clab::BeamBasis& basis24() {
  static const clab::BeamBasis b(24);
  return b;
}

}  // namespace

TEST(BeamSpectrum, FirstRootsMatchBisection) {
  const auto modes = clab::beam_spectrum(2);
  const double pi = std::numbers::pi;
  // mu_k sits within 0.02 of (k + 1/2) pi, on either side.
  EXPECT_NEAR(modes[0].mu, bisect(1.5 * pi - 0.25, 1.5 * pi + 0.25), 1e-10);
  EXPECT_NEAR(modes[1].mu, bisect(2.5 * pi - 0.25, 2.5 * pi + 0.25), 1e-10);
  EXPECT_NEAR(modes[0].mu, 4.7300407449, 1e-9);
  EXPECT_NEAR(modes[1].mu, 7.8532046241, 1e-9);
}

TEST(BeamSpectrum, ModeInvariants) {
  const auto& b = basis24();
  double prev = 0.0;
  for (const auto& m : b.modes()) {
    EXPECT_LE(clab::characteristic_residual(m), 1e-10) << "mode " << m.index;
    EXPECT_GT(m.mu, prev);
    prev = m.mu;
    EXPECT_NEAR(m.lambda, std::pow(m.mu, 4), 1e-9 * m.lambda);
    for (double x : {0.0, 1.0}) {
      EXPECT_NEAR(clab::eigenfunction_eval(m, x, 0), 0.0, 1e-9);
      EXPECT_NEAR(clab::eigenfunction_eval(m, x, 1), 0.0, 1e-9 * m.mu);
    }
  }
}

TEST(BeamSpectrum, CharacteristicResidualUpToTheCap) {
  const auto modes = clab::beam_spectrum(clab::kMaxModes);
  for (const auto& m : modes) EXPECT_LE(clab::characteristic_residual(m), 1e-10) << "mode " << m.index;
  EXPECT_NEAR(modes.back().mu, (clab::kMaxModes + 0.5) * std::numbers::pi, 1e-12);
}

TEST(BeamSpectrum, RejectsBadCounts) {
  EXPECT_THROW(clab::beam_spectrum(0), clab::InvalidInput);
  EXPECT_THROW(clab::beam_spectrum(clab::kMaxModes + 1), clab::InvalidInput);
}

TEST(Quadrature, WeightsAndExactness) {
  const auto q = clab::Quadrature::standard();
  double s = 0.0;
  for (double w : q.weights) {
    EXPECT_GT(w, 0.0);
    s += w;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
  // Degree 31 per cell: integrate x^31 exactly.
  double m = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) m += q.weights[i] * std::pow(q.nodes[i], 31);
  EXPECT_NEAR(m, 1.0 / 32.0, 1e-12);
}

TEST(Eigenfunction, SecondDerivativeMatchesCentralDifferences) {
  const auto& m = basis24().modes()[0];
  const double h = 1e-5;
  for (double x : {0.1, 0.37, 0.8}) {
    const double fd = (clab::eigenfunction_eval(m, x + h, 0) - 2 * clab::eigenfunction_eval(m, x, 0) +
                       clab::eigenfunction_eval(m, x - h, 0)) / (h * h);
    const double an = clab::eigenfunction_eval(m, x, 2);
    EXPECT_NEAR(fd, an, 1e-6 * std::abs(an) + 1e-4);
  }
  // At the clamped end use a one-sided difference of phi'.
  const double d1 = (clab::eigenfunction_eval(m, h, 1) - clab::eigenfunction_eval(m, 0.0, 1)) / h;
  EXPECT_NEAR(d1, clab::eigenfunction_eval(m, 0.0, 2), 1e-3 * std::abs(d1));
  EXPECT_NE(clab::eigenfunction_eval(m, 0.0, 2), 0.0);
}

TEST(Eigenfunction, FourthDerivativeIsEigenrelation) {
  const auto& b = basis24();
  double worst = 0.0;
  for (const auto& m : b.modes()) {
    for (int i = 0; i < 512; ++i) {
      const double x = (i + 0.5) / 512.0;
      const double r = std::abs(clab::eigenfunction_eval(m, x, 4) - m.lambda * clab::eigenfunction_eval(m, x, 0));
      worst = std::max(worst, r / m.lambda);
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Basis, GramIsIdentity) {
  const auto G = basis24().gram();
  const Eigen::MatrixXd E = G - Eigen::MatrixXd::Identity(24, 24);
  EXPECT_LE(E.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Basis, ProjectionExamples) {
  const auto& b = basis24();
  const auto& m1 = b.modes()[0];
  const auto& m2 = b.modes()[1];
  auto c = clab::project(b, [&](double x) { return std::complex<double>(clab::eigenfunction_eval(m1, x, 0)); }).c;
  EXPECT_NEAR(std::abs(c(0) - 1.0), 0.0, 1e-8);
  EXPECT_LE(c.tail(23).cwiseAbs().maxCoeff(), 1e-8);
  c = clab::project(b, [&](double x) {
        return 2.0 * clab::eigenfunction_eval(m1, x, 0) +
               std::complex<double>(0, 3) * clab::eigenfunction_eval(m2, x, 0);
      }).c;
  EXPECT_NEAR(std::abs(c(0) - 2.0), 0.0, 1e-8);
  EXPECT_NEAR(std::abs(c(1) - std::complex<double>(0, 3)), 0.0, 1e-8);
  c = clab::project(b, [](double) { return std::complex<double>(0); }).c;
  EXPECT_EQ(c.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(clab::project(b, Eigen::VectorXcd::Zero(7)), clab::InvalidInput);
}

TEST(Basis, RoundTripAndParseval) {
  const clab::BeamBasis b(12);
  Eigen::VectorXcd c(12);
  for (int k = 0; k < 12; ++k) c(k) = std::complex<double>(1.0 / (k + 1), 0.5 * std::sin(k + 1.0));
  auto f = [&](double x) {
    std::complex<double> v = 0;
    for (int k = 0; k < 12; ++k) v += c(k) * clab::eigenfunction_eval(b.modes()[k], x, 0);
    return v;
  };
  const auto back = clab::project(b, f).c;
  std::vector<double> xs;
  for (int i = 0; i <= 200; ++i) xs.push_back(i / 200.0);
  const Eigen::VectorXcd syn = clab::synthesize(b, back, xs, 0);
  double err = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) err = std::max(err, std::abs(syn(static_cast<Eigen::Index>(i)) - f(xs[i])));
  EXPECT_LE(err, 1e-7);
  const Eigen::VectorXcd nodal = b.table(0).cast<std::complex<double>>() * c;
  double l2 = 0.0;
  for (std::size_t q = 0; q < b.quadrature().size(); ++q) l2 += b.quadrature().weights[q] * std::norm(nodal(static_cast<Eigen::Index>(q)));
  EXPECT_NEAR(std::sqrt(l2), clab::xs_norm(b, c, 0.0), 1e-7);
}

TEST(Basis, XsNorm) {
  const clab::BeamBasis b(6);
  Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(6);
  e1(0) = 1.0;
  EXPECT_NEAR(clab::xs_norm(b, e1, 0.0), 1.0, 1e-15);
  const double mu = b.modes()[0].mu;
  EXPECT_NEAR(clab::xs_norm(b, e1, 4.0), 1.0 + std::pow(mu, 4), 1e-9);
  Eigen::VectorXcd c = Eigen::VectorXcd::Constant(6, std::complex<double>(0.3, -0.2));
  double prev = 0.0;
  for (double s = -4.0; s <= 4.0; s += 0.5) {
    const double v = clab::xs_norm(b, c, s);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_THROW(clab::xs_norm(b, c, 4.5), clab::InvalidInput);
}

TEST(Basis, BoundaryTraces) {
  const clab::BeamBasis b(6);
  Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(6);
  EXPECT_EQ(std::abs(clab::boundary_trace(b, e1, 0, 2)), 0.0);
  e1(0) = 1.0;
  const double expected = clab::eigenfunction_eval(b.modes()[0], 0.0, 2);
  EXPECT_NEAR(std::abs(clab::boundary_trace(b, e1, 0, 2) - expected), 0.0, 1e-12);
  // phi'' at 0 is 2 mu^2 C by the formula.
  EXPECT_NEAR(expected, 2.0 * std::pow(b.modes()[0].mu, 2) * b.modes()[0].norm, 1e-9);
}
