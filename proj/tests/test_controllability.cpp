// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "clab/controllability.hpp"

using clab::cplx;

namespace {

constexpr double kT = 1.0;
constexpr std::size_t kSteps = 4096;

Eigen::VectorXcd random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::VectorXcd v(n);
  for (int k = 0; k < n; ++k) v(k) = cplx(nd(rng), nd(rng));
  return v;
}

clab::BackwardGenerator potential_generator(const clab::BeamBasis& b) {
  const auto a = clab::field_from_function(b, [](double x) { return cplx(0.5 + 0.3 * std::cos(3.0 * x), 0.0); });
  return clab::assemble_backward_generator(a, clab::constant_field(b, 0.0), b, clab::BackwardDrift::adjoint);
}

struct Fixture {
  clab::BeamBasis basis{8};
  clab::DualSpace space = clab::deterministic_dual_space(basis, potential_generator(basis), kT, kSteps);
  Eigen::MatrixXcd G = clab::dense_gramian(space);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

// Observation form evaluated directly from the backward traces.
double observation_form(const clab::ObservationTriple& o) {
  double s = o.zxx0.squaredNorm() + o.zxxx0.squaredNorm();
  for (const auto& m : o.Z) s += m.squaredNorm();
  return s * o.dt / static_cast<double>(o.n_paths());
}

}  // namespace

TEST(ObservationToControl, ZeroAndLinearity) {
  const auto& f = fixture();
  const auto zero = clab::observe(f.basis, f.space.solve(Eigen::VectorXcd::Zero(8)));
  const auto c0 = clab::observation_to_control(zero);
  EXPECT_EQ(c0.norm(), 0.0);
  auto obs = f.space.tests[2].obs;
  const auto c1 = clab::observation_to_control(obs);
  obs.zxx0 *= cplx(2.0, -1.0);
  obs.zxxx0 *= cplx(2.0, -1.0);
  const auto c2 = clab::observation_to_control(obs);
  EXPECT_LE((c2.u1 - cplx(2.0, -1.0) * c1.u1).norm(), 1e-12 * c2.u1.norm());
  EXPECT_LE((c2.u2 - cplx(2.0, -1.0) * c1.u2).norm(), 1e-12 * c2.u2.norm());
  EXPECT_NEAR(c1.u1(0, 3).real(), f.space.tests[2].obs.zxxx0(0, 3).imag(), 1e-14);
}

TEST(Gramian, PairingIsTheObservationForm) {
  const auto& f = fixture();
  std::mt19937_64 rng(11);
  for (int r = 0; r < 100; ++r) {
    const auto c = random_vector(8, rng);
    const auto obs = clab::observe(f.basis, f.space.solve(c));
    const cplx e = clab::transposition_pairing(clab::observation_to_control(obs), obs);
    const double oracle = observation_form(obs);
    EXPECT_GE(e.real(), 0.0);
    EXPECT_LE(std::abs(e.imag()), 1e-12 * oracle);
    EXPECT_NEAR(e.real(), oracle, 1e-12 * oracle);
    const cplx viaG = c.dot(clab::gramian_apply(f.space, c));
    EXPECT_NEAR(viaG.real(), oracle, 1e-10 * oracle);
  }
}

TEST(Gramian, ZeroApplyAndDenseColumns) {
  const auto& f = fixture();
  EXPECT_EQ(clab::gramian_apply(f.space, Eigen::VectorXcd::Zero(8)).norm(), 0.0);
  for (int k = 0; k < 8; ++k) {
    const auto col = clab::gramian_apply(f.space, Eigen::VectorXcd::Unit(8, k));
    EXPECT_LE((col - f.G.col(k)).norm(), 1e-12 * f.G.col(k).norm()) << k;
  }
}

TEST(Gramian, HermitianOnRandomPairs) {
  const auto& f = fixture();
  std::mt19937_64 rng(12);
  for (int r = 0; r < 20; ++r) {
    const auto z = random_vector(8, rng);
    const auto w = random_vector(8, rng);
    const cplx lhs = w.dot(clab::gramian_apply(f.space, z));
    const cplx rhs = std::conj(z.dot(clab::gramian_apply(f.space, w)));
    EXPECT_LE(std::abs(lhs - rhs), 1e-6 * std::abs(lhs));
  }
  EXPECT_LE(clab::gramian_spectrum(f.G).hermitian_defect, 1e-12);
}

TEST(Gramian, PositiveDefiniteAtN8) {
  const auto s = clab::gramian_spectrum(fixture().G);
  EXPECT_GE(s.min_eigenvalue, -1e-8);
  EXPECT_GT(s.min_eigenvalue, 0.0);
  EXPECT_TRUE(std::isfinite(s.condition));
}

TEST(Hum, ZeroTargetTakesNoIterations) {
  const auto& f = fixture();
  const auto h = clab::hum_solve(f.space, Eigen::VectorXcd::Zero(8));
  EXPECT_EQ(h.report.iterations, 0);
  EXPECT_TRUE(h.report.converged);
  EXPECT_EQ(h.coords.norm(), 0.0);
  EXPECT_EQ(h.controls.norm(), 0.0);
  const auto v = clab::verify_target(f.space, h.controls, Eigen::VectorXcd::Zero(8));
  EXPECT_TRUE(v.pass);
  EXPECT_EQ(v.max_residual, 0.0);
}

TEST(Hum, RecoversBasisDatum) {
  const auto& f = fixture();
  const Eigen::VectorXcd y1 = f.G.col(0);
  const auto h = clab::hum_solve(f.space, y1);
  EXPECT_TRUE(h.report.converged) << h.report.status;
  EXPECT_LE(h.report.iterations, 8);
  EXPECT_LE(h.report.relative_residual, 1e-6);
  EXPECT_LE((h.coords - Eigen::VectorXcd::Unit(8, 0)).norm(), 1e-5);
}

TEST(Hum, RandomLowModeTargetAgainstDenseSolve) {
  const auto& f = fixture();
  std::mt19937_64 rng(13);
  Eigen::VectorXcd y1 = Eigen::VectorXcd::Zero(8);
  y1.head(4) = random_vector(4, rng);
  const auto h = clab::hum_solve(f.space, y1);
  EXPECT_TRUE(h.report.converged);
  EXPECT_LE(h.report.iterations, 8);
  const Eigen::VectorXcd dense = f.G.ldlt().solve(y1);
  EXPECT_LE((h.coords - dense).norm(), 1e-4 * dense.norm());
  const auto v = clab::verify_target(f.space, h.controls, y1, {}, 1e-5);
  EXPECT_TRUE(v.pass) << v.max_residual;
  EXPECT_GT(h.observation_energy, 0.0);
  EXPECT_GT(h.report.min_ritz, 0.0);
}

TEST(Hum, ZeroedControlsFail) {
  const auto& f = fixture();
  std::mt19937_64 rng(14);
  const Eigen::VectorXcd y1 = random_vector(8, rng);
  auto c = clab::hum_solve(f.space, y1).controls;
  c.u1.setZero();
  c.u2.setZero();
  const auto v = clab::verify_target(f.space, c, y1);
  EXPECT_FALSE(v.pass);
  for (int j = 0; j < 8; ++j) EXPECT_NEAR(v.residuals(j), std::abs(y1(j)), 1e-14);
}

TEST(Hum, EnergyErrorIsMonotone) {
  const auto& f = fixture();
  std::mt19937_64 rng(15);
  const Eigen::VectorXcd y1 = random_vector(8, rng);
  const Eigen::VectorXcd exact = f.G.ldlt().solve(y1);
  clab::CgOptions opt;
  opt.keep_history = true;
  opt.tol = 1e-10;
  opt.max_iter = 24;
  const auto h = clab::hum_solve(f.space, y1, {}, opt);
  ASSERT_GE(h.report.iterates.size(), 2u);
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& x : h.report.iterates) {
    const Eigen::VectorXcd e = x - exact;
    const double en = e.dot(f.G * e).real();
    EXPECT_LE(en, prev * (1.0 + 1e-9) + 1e-20);
    prev = en;
  }
}

TEST(Hum, ControlsAreLinearInTargetAndForcing) {
  const auto& f = fixture();
  std::mt19937_64 rng(16);
  const Eigen::VectorXcd ya = random_vector(8, rng), yb = random_vector(8, rng);
  clab::ControlData fa, fb, fab;
  for (std::size_t n = 0; n < kSteps; ++n) {
    fa.f.push_back(random_vector(8, rng) * 0.1);
    fb.f.push_back(Eigen::VectorXcd::Zero(8));
    fab.f.push_back(fa.f.back());
  }
  clab::CgOptions opt;
  opt.tol = 1e-13;
  opt.max_iter = 40;
  const auto ha = clab::hum_solve(f.space, ya, fa, opt);
  const auto hb = clab::hum_solve(f.space, yb, fb, opt);
  const auto hab = clab::hum_solve(f.space, ya + yb, fab, opt);
  const Eigen::MatrixXcd du1 = hab.controls.u1 - ha.controls.u1 - hb.controls.u1;
  const Eigen::MatrixXcd du2 = hab.controls.u2 - ha.controls.u2 - hb.controls.u2;
  EXPECT_LE(du1.norm(), 1e-8 * hab.controls.u1.norm());
  EXPECT_LE(du2.norm(), 1e-8 * hab.controls.u2.norm());
}

TEST(Hum, InitialStateAndForcingAreSteered) {
  const auto& f = fixture();
  std::mt19937_64 rng(17);
  clab::ControlData data;
  data.y0 = random_vector(8, rng);
  for (std::size_t n = 0; n < kSteps; ++n) data.f.push_back(Eigen::VectorXcd::Constant(8, cplx(0.2, -0.1)));
  Eigen::VectorXcd y1 = Eigen::VectorXcd::Zero(8);
  y1.head(3) = random_vector(3, rng);
  const auto h = clab::hum_solve(f.space, y1, data);
  EXPECT_TRUE(h.report.converged);
  EXPECT_TRUE(clab::verify_target(f.space, h.controls, y1, data, 1e-5).pass);
  // Without the data terms the same controls miss the target.
  EXPECT_FALSE(clab::verify_target(f.space, h.controls, y1, {}, 1e-5).pass);
}

TEST(Hum, NegativeCurvatureIsRejected) {
  clab::CgReport rep;
  const auto neg = [](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(-v); };
  EXPECT_THROW(clab::conjugate_gradient(neg, Eigen::VectorXcd::Ones(3), Eigen::VectorXd::Ones(3), {}, rep),
               clab::NumericalError);
}

TEST(Hum, SingularGramianReportsRitzValue) {
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(3, 3);
  G(0, 0) = 1.0;
  G(1, 1) = 1e-3;
  clab::CgReport rep;
  clab::CgOptions opt;
  opt.jacobi = false;
  const auto apply = [&G](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(G * v); };
  clab::conjugate_gradient(apply, Eigen::VectorXcd::Ones(3), Eigen::VectorXd::Ones(3), opt, rep);
  EXPECT_FALSE(rep.converged);
  EXPECT_NE(rep.status, "converged");
  // b has a null-space component, so the Krylov space reaches the zero eigenvalue.
  EXPECT_LE(rep.min_ritz, 1e-12);
}

TEST(HumStochastic, ChaosTestBasis) {
  const clab::BeamBasis b(3);
  const auto gen = clab::assemble_backward_generator(clab::constant_field(b, 0.0), clab::constant_field(b, 0.0), b,
                                                     clab::BackwardDrift::adjoint);
  const std::size_t P = 4000;
  const auto paths = clab::sample_paths(21, P, 64, kT);
  const auto space = clab::chaos_dual_space(b, gen, paths, 1);
  ASSERT_EQ(space.dim(), 6);
  const auto G = clab::dense_gramian(space);
  const auto s = clab::gramian_spectrum(G);
  EXPECT_LE(s.hermitian_defect, 1e-10);
  EXPECT_GT(s.min_eigenvalue, 0.0);
  // The first-chaos block carries Z, so its diagonal exceeds the deterministic one.
  for (int k = 0; k < 3; ++k) EXPECT_GT(G(3 + k, 3 + k).real(), 0.0);
  EXPECT_FALSE(space.tests[3].obs.Z.empty());
  // Random terminal target y1 = v0 + v1 w(T) / sqrt(T).
  Eigen::MatrixXcd y1(static_cast<Eigen::Index>(P), 3);
  for (std::size_t p = 0; p < P; ++p) {
    const double xi = paths[p].values().back() / std::sqrt(kT);
    for (int k = 0; k < 3; ++k) y1(static_cast<Eigen::Index>(p), k) = cplx(1.0 + k, 0.5) + cplx(0.3, -0.2 * k) * xi;
  }
  const Eigen::VectorXcd t = clab::target_pairings(space, y1);
  const auto h = clab::hum_solve(space, t);
  EXPECT_TRUE(h.report.converged);
  EXPECT_LE(h.report.iterations, 6);
  EXPECT_FALSE(h.controls.g.empty());
  EXPECT_TRUE(clab::verify_target(space, h.controls, t, {}, 1e-5).pass);
}
