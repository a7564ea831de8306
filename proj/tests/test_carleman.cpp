// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "clab/carleman.hpp"

using clab::cplx;

namespace {

clab::WeightSpec hat_spec(double T = 1.0) {
  clab::WeightSpec s;
  s.variant = clab::WeightVariant::hat;
  s.T = T;
  s.lambda = clab::WeightSpec::default_lambda(T);
  return s;
}

clab::WeightSpec tilde_spec(double T = 1.0) {
  clab::WeightSpec s = hat_spec(T);
  s.variant = clab::WeightVariant::tilde;
  return s;
}

double rel(double a, double b, double scale) { return std::abs(a - b) / std::max(scale, 1e-300); }

clab::GeneratorMatrices zero_gen(const clab::BeamBasis& b) {
  return clab::assemble_generator(clab::constant_field(b, 0.0), clab::constant_field(b, 0.0), b);
}

Eigen::VectorXcd random_modes(int n, std::uint64_t item, double decay) {
  const clab::GaussianSource src(99, clab::NoiseStream::test, item);
  Eigen::VectorXcd c(n);
  for (int k = 0; k < n; ++k) c(k) = cplx(src.at(2 * k), src.at(2 * k + 1)) / std::pow(k + 1.0, decay);
  return c;
}

}  // namespace

TEST(Weight, TildeDeltaThreshold) {
  // need 0.25 + d >= 3/4 (2.25 + d), i.e. d >= 5.75
  auto s = tilde_spec();
  s.delta0 = 5.75;
  EXPECT_NO_THROW(clab::CarlemanWeight{s});
  s.delta0 = 5.7;
  EXPECT_THROW(clab::CarlemanWeight{s}, clab::InvalidInput);
  s.delta0 = 6.0;
  const clab::CarlemanWeight w(s);
  EXPECT_NEAR(w.psi(0.0), 2.25 + 6.0, 1e-14);
  EXPECT_NEAR(w.psi(1.0), 0.25 + 6.0, 1e-14);
  s.x0 = 0.9;
  EXPECT_THROW(clab::CarlemanWeight{s}, clab::InvalidInput);
}

TEST(Weight, HatProfileConditions) {
  const clab::CarlemanWeight w(hat_spec());
  EXPECT_EQ(w.psi(0.0), 0.0);
  EXPECT_NEAR(w.psi(1.0), 0.0, 1e-15);
  EXPECT_NEAR(w.psi(0.5), 1.0, 1e-14);
  EXPECT_GT(w.psi_jet(0.0, 1).derivative(1), 0.0);
  EXPECT_LT(w.psi_jet(1.0, 1).derivative(1), 0.0);
  auto s = hat_spec();
  s.alpha = 0.7;
  s.beta = 0.3;
  EXPECT_THROW(clab::CarlemanWeight{s}, clab::InvalidInput);
  s = hat_spec();
  s.alpha = 0.1;
  s.beta = 0.3;  // off-centre window: kappa != 0
  const clab::CarlemanWeight w2(s);
  EXPECT_NEAR(w2.psi(0.2), 1.0, 1e-14);
}

TEST(Weight, HatValueAtZeroProfile) {
  auto s = hat_spec();
  s.mu = 1.0;
  s.lambda = 3.0;
  const clab::CarlemanWeight w(s);
  const auto e = w.eval(0.0, 0.5);
  const double expect = 4.0 * (std::exp(3.0) - std::exp(5.0));
  EXPECT_NEAR(e.a, expect, 1e-12 * std::abs(expect));
  EXPECT_NEAR(e.l, 3.0 * expect, 1e-12 * std::abs(expect));
}

TEST(Weight, ThetaBelowOneAndEndpoints) {
  for (const auto& s : {hat_spec(), tilde_spec()}) {
    const clab::CarlemanWeight w(s);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      const double x = U(rng);
      const double t = 0.01 + 0.98 * U(rng);
      const auto e = w.eval(x, t);
      EXPECT_LT(e.a, 0.0);
      EXPECT_LE(e.theta(), 1.0);
      EXPECT_DOUBLE_EQ(e.l, s.lambda * e.a);
    }
    EXPECT_TRUE(w.eval(0.3, 0.0).time_endpoint);
    EXPECT_TRUE(w.eval(0.3, s.T).time_endpoint);
    EXPECT_EQ(w.eval(0.3, s.T).theta(), 0.0);
  }
}

TEST(Weight, ThetaPeaksAtMidTime) {
  auto s = hat_spec(2.0);
  s.lambda = 1.0;
  s.mu = 0.5;
  const clab::CarlemanWeight w(s);
  for (double x : {0.05, 0.3, 0.5, 0.9}) {
    int best = -1;
    double bv = -1e300;
    for (int j = 1; j < 64; ++j) {
      const double v = w.log_theta(x, s.T * j / 64.0);
      if (v > bv) {
        bv = v;
        best = j;
      }
    }
    EXPECT_EQ(best, 32);
  }
}

TEST(Coefficients, RecombinationOnRandomPoints) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    auto s = (i % 2 == 0) ? hat_spec() : tilde_spec();
    s.lambda = 1.0 + 200.0 * U(rng);
    s.mu = 0.5 + 3.0 * U(rng);
    const clab::CarlemanWeight w(s);
    const double x = U(rng);
    const double t = 0.01 + 0.98 * U(rng);
    const auto jets = w.jets(x, t, 8);
    const auto c = clab::conjugated_coefficients(jets);
    auto check = [&](double lhs, double rhs, double scale) { worst = std::max(worst, rel(lhs, rhs, scale)); };
    const double a3 = c.A3.value(), c3 = c.C3.value();
    check(a3, c3, std::abs(a3));
    check(c.A2.value(), c.B2.value() + c.C2.value(), std::abs(c.B2.value()) + std::abs(c.C2.value()));
    check(c.A1.value(), c.B1.value() + c.C1.value(), std::abs(c.B1.value()) + std::abs(c.C1.value()));
    const cplx a0 = c.A0.value();
    const cplx sum = c.B0.value() + c.C0.value() + c.D0.value();
    const double s0 = std::abs(c.B0.value()) + std::abs(c.C0.value()) + std::abs(c.D0.value());
    worst = std::max(worst, std::abs(a0 - sum) / s0);
    const double b0 = 0.5 * c.C1.dx().value() - 0.5 * c.B2.dx(2).value() + 0.5 * c.C3.dx(3).value();
    check(c.B0.value(), b0,
          std::abs(0.5 * c.C1.dx().value()) + std::abs(0.5 * c.B2.dx(2).value()) +
              std::abs(0.5 * c.C3.dx(3).value()));
    // the scalar path agrees with the jet path
    const auto e = w.eval(x, t);
    const auto cs = clab::conjugated_coefficients(e);
    check(cs.C1, c.C1.value(), std::abs(cs.C1));
    check(cs.B0, c.B0.value(), std::abs(cs.B0) + std::abs(c.B0.value()));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Coefficients, ConstantInSpace) {
  const clab::PolynomialWeight w({{0.3}, {1.2}, {-0.4}});
  const auto c = clab::conjugated_coefficients(w.jets(0.4, 0.7, 6));
  const double lt = 1.2 - 0.8 * 0.7;
  EXPECT_NEAR(std::abs(c.A0.value() - cplx(0.0, -lt)), 0.0, 1e-15);
  EXPECT_EQ(c.A1.value(), 0.0);
  EXPECT_EQ(c.A2.value(), 0.0);
  EXPECT_EQ(c.A3.value(), 0.0);
  EXPECT_EQ(c.C0.value(), 0.0);
  EXPECT_EQ(c.C1.value(), 0.0);
  EXPECT_EQ(c.B1.value(), 0.0);
  EXPECT_EQ(c.B2.value(), 0.0);
}

TEST(Coefficients, C3MatchesWeightSlope) {
  auto s = hat_spec();
  s.alpha = 0.2;
  s.beta = 0.5;
  const clab::CarlemanWeight w(s);
  const double c = 0.35;
  const double kappa = (2 * c - 1) / (c * (1 - c));
  for (double x : {0.1, 0.35, 0.6, 0.9}) {
    const double t = 0.4;
    const double psi = x * (1 - x) * std::exp(kappa * (x - c)) / (c * (1 - c));
    const double psix = std::exp(kappa * (x - c)) * ((1 - 2 * x) + kappa * x * (1 - x)) / (c * (1 - c));
    const double ax = s.mu * psix * std::exp(s.mu * (psi + 3.0)) / (t * (1 - t));
    const auto cf = clab::conjugated_coefficients(w.eval(x, t));
    EXPECT_LE(rel(cf.C3, -4.0 * s.lambda * ax, std::abs(cf.C3)), 1e-12);
  }
}

TEST(Identity, ZeroFieldZeroResidual) {
  const clab::TestField zero{[](double, double, int k) { return clab::ComplexJet::constant(0.0, k); }, nullptr};
  const auto w = clab::synthetic_weight().jet_fn();
  const auto r = clab::identity_point(zero, w, 0.3, 0.4, 0.0, 1e-3);
  EXPECT_EQ(std::abs(r.dt), 0.0);
  EXPECT_EQ(std::abs(r.dw), 0.0);
  const auto m = clab::multiplier_point(zero, clab::Multiplier::standard(), 1, 0.3, 0.4, 0.0, 1e-3);
  EXPECT_EQ(std::abs(m.dt), 0.0);
}

TEST(Identity, FirstOrderInTimeForDeterministicFields) {
  const auto w = clab::synthetic_weight().jet_fn();
  for (const auto& field : {clab::trig_field(), clab::poly_exp_field()}) {
    const auto st = clab::identity_convergence(
        [&](double x, double t, double wv, double h) { return clab::identity_point(field, w, x, t, wv, h); },
        1.0, {128, 256, 512}, 9);
    EXPECT_GE(st.slope, 0.9);
    EXPECT_GE(st.min_pair_slope, 0.85);
    EXPECT_GT(st.levels[0].max_dt_residual, 0.0);
    EXPECT_LE(st.levels.back().max_dt_residual, 0.05 * st.levels.back().max_scale);
  }
}

TEST(Identity, ItoTermsExactForNoiseField) {
  const auto w = clab::synthetic_weight().jet_fn();
  const auto field = clab::noise_field();
  const auto path = clab::brownian_path(1.0, 512, 11, 0);
  const auto st = clab::identity_convergence(
      [&](double x, double t, double wv, double h) { return clab::identity_point(field, w, x, t, wv, h); }, 1.0,
      {128, 256, 512}, 9, &path);
  EXPECT_GE(st.slope, 0.9);
  EXPECT_FALSE(st.exact);
  EXPECT_LE(st.max_relative_dw, 1e-10);
}

TEST(Multiplier, UnitModulusFieldIsExact) {
  // e^{it} s(x) with a time-independent multiplier: every product that gets
  // differenced has constant modulus factor, so the discrete identity is exact
  const auto st = clab::identity_convergence(
      [](double x, double t, double wv, double h) {
        return clab::multiplier_point(clab::trig_field(), clab::Multiplier::standard(), 1, x, t, wv, h);
      },
      1.0, {128, 256, 512}, 9);
  EXPECT_TRUE(st.exact);
  EXPECT_TRUE(st.converging);
}

TEST(Identity, ItoCorrectionIsExactAtOnePoint) {
  // With y = w n and theta = 1, d(u conj(u_x) - u_x conj(u)) picks up
  // (n conj(n_x) - n_x conj(n)) dt from the quadratic covariation only.
  const clab::TestField f = clab::noise_field();
  const double x = 0.37, w = 0.8, h = 1e-3;
  const auto P = f.at(x, 0.2, w, h, 4);
  const clab::Proc M = P * clab::conj(P).dx() - P.dx() * clab::conj(P);
  const auto d = clab::ito(M, h);
  const auto n = f.n(x, 0.2, 4);
  const cplx expect = n.value() * std::conj(n.dx().value()) - n.dx().value() * std::conj(n.value());
  EXPECT_LE(std::abs(d.dt.value() - expect), 1e-12);
}

TEST(Multiplier, StandardSigns) {
  const auto A = clab::Multiplier::standard();
  EXPECT_DOUBLE_EQ(A.value(0.0, 0.0, 0).value(), -1.0);
  EXPECT_DOUBLE_EQ(A.value(1.0, 0.0, 0).value(), 1.0);
}

TEST(Multiplier, BothIdentitiesFirstOrder) {
  const auto path = clab::brownian_path(1.0, 512, 12, 0);
  const std::vector<clab::Multiplier> mults = {clab::Multiplier::standard(), clab::Multiplier::polynomial({2.0})};
  for (const auto& A : mults) {
    for (int which : {1, 2}) {
      for (const auto& field : {clab::trig_field(), clab::poly_exp_field(), clab::noise_field()}) {
        const auto st = clab::identity_convergence(
            [&](double x, double t, double wv, double h) {
              return clab::multiplier_point(field, A, which, x, t, wv, h);
            },
            1.0, {128, 256, 512}, 9, &path);
        EXPECT_TRUE(st.converging) << "which=" << which << " slope=" << st.slope;
        EXPECT_LE(st.max_relative_dw, 1e-10);
      }
    }
  }
}

TEST(CarlemanRatio, ZeroEnsemble) {
  const clab::BeamBasis b(8);
  const auto paths = clab::brownian_ensemble(1.0, 64, 3, 4);
  const auto ens = clab::solve_forward_ensemble(zero_gen(b), Eigen::VectorXcd::Zero(8), {}, paths);
  for (auto obs : {clab::Observation::interior, clab::Observation::boundary}) {
    const auto r = clab::carleman_ratio(b, ens, {}, hat_spec(), obs);
    EXPECT_TRUE(r.zero);
    EXPECT_EQ(r.ratio, 0.0);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_EQ(r.rhs, 0.0);
  }
}

TEST(CarlemanRatio, ScaleInvariant) {
  const clab::BeamBasis b(8);
  const auto paths = clab::brownian_ensemble(1.0, 64, 4, 8);
  const Eigen::VectorXcd y0 = random_modes(8, 1, 2.0);
  const auto forcing = clab::ForcingSeries::constant(64, random_modes(8, 2, 2.0), random_modes(8, 3, 2.0));
  const auto forcing2 = clab::ForcingSeries::constant(64, 2.0 * random_modes(8, 2, 2.0), 2.0 * random_modes(8, 3, 2.0));
  const auto e1 = clab::solve_forward_ensemble(zero_gen(b), y0, forcing, paths);
  const auto e2 = clab::solve_forward_ensemble(zero_gen(b), 2.0 * y0, forcing2, paths);
  for (const auto& spec : {hat_spec(), tilde_spec()}) {
    for (auto obs : {clab::Observation::interior, clab::Observation::boundary}) {
      const auto r1 = clab::carleman_ratio(b, e1, forcing, spec, obs);
      const auto r2 = clab::carleman_ratio(b, e2, forcing2, spec, obs);
      EXPECT_FALSE(r1.zero);
      EXPECT_NEAR(r2.log_lhs - r1.log_lhs, std::log(4.0), 1e-9 * std::abs(r1.log_lhs));
      if (r1.ratio > 1e-300) {
        EXPECT_LE(std::abs(r2.ratio / r1.ratio - 1.0), 1e-10);
      } else {
        // both underflow; compare the logs relative to their size
        EXPECT_EQ(r2.ratio, r1.ratio);
        EXPECT_LE(std::abs(r2.log10_ratio - r1.log10_ratio), 1e-12 * std::abs(r1.log10_ratio));
      }
    }
  }
}

TEST(CarlemanRatio, MildWeightIsResolvedAndFinite) {
  // lambda, mu small enough that theta^2 varies gently across the grid
  const clab::BeamBasis b(8);
  const auto paths = clab::brownian_ensemble(1.0, 128, 5, 16);
  const auto forcing = clab::ForcingSeries::constant(128, random_modes(8, 4, 2.0), random_modes(8, 5, 2.0));
  const auto ens = clab::solve_forward_ensemble(zero_gen(b), random_modes(8, 6, 2.0), forcing, paths);
  auto s = hat_spec();
  s.lambda = 0.01;
  s.mu = 0.2;
  const auto r = clab::carleman_ratio(b, ens, forcing, s, clab::Observation::interior);
  EXPECT_TRUE(std::isfinite(r.ratio));
  EXPECT_GT(r.ratio, 0.0);
  EXPECT_LT(r.peak_share, 0.1);
  EXPECT_LT(r.lhs_rel_se, 1.0);
}

TEST(CarlemanRatio, BackwardMatchesForwardHarnessOnDeterministicReduction) {
  const clab::BeamBasis b(8);
  const auto gen = clab::assemble_backward_generator(clab::constant_field(b, 0.0), clab::constant_field(b, 0.0), b);
  const auto sol = clab::solve_backward_deterministic(gen, random_modes(8, 7, 2.0), 1.0, 64);
  const auto bwd = clab::broadcast(sol, 3);
  // The same states fed through a forward-shaped sample.
  clab::TrajectoryEnsemble fake(3);
  for (auto& tr : fake) {
    tr.times = sol.times;
    tr.coeffs = sol.z;
    tr.dt = sol.dt;
  }
  for (auto obs : {clab::Observation::interior, clab::Observation::boundary}) {
    const auto rb = clab::carleman_ratio_backward(b, bwd, {}, tilde_spec(), obs);
    const auto rf = clab::carleman_ratio(b, fake, {}, tilde_spec(), obs);
    EXPECT_DOUBLE_EQ(rb.log_lhs, rf.log_lhs);
    EXPECT_DOUBLE_EQ(rb.log_rhs, rf.log_rhs);
  }
}

TEST(Observability, ZeroDataBothSidesZero) {
  const clab::BeamBasis b(8);
  const auto paths = clab::brownian_ensemble(1.0, 64, 6, 4);
  const auto ens = clab::solve_forward_ensemble(zero_gen(b), Eigen::VectorXcd::Zero(8), {}, paths);
  for (auto m : {clab::ObservabilityMode::interior, clab::ObservabilityMode::boundary}) {
    const auto s = clab::observability_forward(b, ens, {}, m);
    EXPECT_EQ(s.lhs, 0.0);
    EXPECT_EQ(s.rhs, 0.0);
    EXPECT_FALSE(s.violation);
  }
}

TEST(Observability, UniqueContinuationSpotCheck) {
  const clab::BeamBasis b(8);
  const auto paths = clab::brownian_ensemble(1.0, 256, 7, 32);
  clab::TrajectoryEnsemble ens;
  for (std::size_t p = 0; p < paths.size(); ++p)
    ens.push_back(clab::solve_forward(zero_gen(b), random_modes(8, 100 + p, 1.0), {}, paths[p]));
  for (auto m : {clab::ObservabilityMode::interior, clab::ObservabilityMode::boundary}) {
    const double mn = clab::min_unit_observation(b, ens, m);
    EXPECT_GT(mn, 1e-8);
    const auto s = clab::observability_forward(b, ens, {}, m);
    EXPECT_TRUE(std::isfinite(s.ratio));
    EXPECT_GT(s.ratio, 0.0);
  }
}

TEST(Observability, DualFreeFlow) {
  const clab::BeamBasis b(8);
  const auto gen = clab::assemble_backward_generator(clab::constant_field(b, 0.0), clab::constant_field(b, 0.0), b);
  const auto sol = clab::solve_backward_deterministic(gen, random_modes(8, 8, 1.0), 1.0, 256);
  const auto bwd = clab::broadcast(sol, 2);
  const auto s = clab::observability_dual(b, bwd);
  EXPECT_GT(s.lhs, 0.0);
  EXPECT_GT(s.observation, 0.0);
  EXPECT_EQ(s.data, 0.0);
  EXPECT_GT(clab::min_unit_observation(b, bwd), 1e-8);
}
