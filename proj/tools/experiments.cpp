// SPDX-License-Identifier: Apache-2.0
#include "experiments.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "clab/backward_solver.hpp"
#include "clab/carleman.hpp"
#include "clab/carleman_identity.hpp"
#include "clab/controllability.hpp"
#include "clab/forward_solver.hpp"
#include "clab/spectral_basis.hpp"
#include "clab/version.hpp"

namespace clab::cli {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

template <typename I>
std::string fmt_int(I v) {
  return std::to_string(v);
}

// JSON cannot hold inf/nan; they are written as strings so the report keeps them.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

struct Common {
  std::uint64_t seed = 1;
};

int modes_key(Section& s, long fallback) { return static_cast<int>(s.integer("modes", fallback, 1, kMaxModes)); }

std::size_t steps_key(Section& s, long fallback) {
  return static_cast<std::size_t>(s.integer("steps", fallback, 1, 1L << 22));
}

Eigen::VectorXcd unit_mode(int n, int k, cplx amp) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
  v(k) = amp;
  return v;
}

/// Forcing that is constant in time on one mode (mode 0 = none).
Eigen::VectorXcd mode_forcing(Section& s, const std::string& prefix, int N) {
  const long m = s.integer(prefix + "_mode", 0, 0, N);
  const cplx amp = s.complex(prefix, cplx(1.0, 0.0));
  if (m == 0) return {};
  return unit_mode(N, static_cast<int>(m - 1), amp);
}

ForwardScheme scheme_key(Section& s) {
  const auto v = s.choice("scheme", "midpoint", {"midpoint", "euler_maruyama"});
  return v == "midpoint" ? ForwardScheme::drift_implicit_midpoint : ForwardScheme::euler_maruyama;
}

// ---------------------------------------------------------------------------

ExperimentOutput run_eigs(Section& s, const Common&) {
  const int N = modes_key(s, 16);
  const double tol_char = s.positive("max_char_residual", 1e-10);
  const double tol_gram = s.positive("max_gram_deviation", 1e-8);
  const double tol_eig = s.positive("max_eigen_residual", 1e-6);
  s.finish();
  const BeamBasis b(N);
  ExperimentOutput out;
  out.schema = "eigs/1";
  out.table.header = {"k", "mu", "lambda", "char_residual", "eigen_residual"};
  double max_char = 0.0, max_eig = 0.0;
  const Eigen::MatrixXd& T0 = b.table(0);
  const Eigen::MatrixXd& T4 = b.table(4);
  for (int k = 0; k < N; ++k) {
    const auto& m = b.modes()[static_cast<std::size_t>(k)];
    const double cr = characteristic_residual(m);
    const double er = (T4.col(k) - m.lambda * T0.col(k)).cwiseAbs().maxCoeff() / (m.lambda * T0.col(k).cwiseAbs().maxCoeff());
    max_char = std::max(max_char, cr);
    max_eig = std::max(max_eig, er);
    out.table.rows.push_back({fmt_int(k + 1), fmt(m.mu), fmt(m.lambda), fmt(cr), fmt(er)});
  }
  const double gram_dev = (b.gram() - Eigen::MatrixXd::Identity(N, N)).cwiseAbs().maxCoeff();
  const double mu1_oracle = detail::bisect_beam_root(4.5, 5.0);
  out.results = {{"modes", N},
                 {"max_char_residual", num(max_char)},
                 {"gram_deviation", num(gram_dev)},
                 {"max_eigen_residual", num(max_eig)},
                 {"mu1", num(b.modes()[0].mu)},
                 {"mu1_bisection", num(mu1_oracle)},
                 {"mu1_difference", num(std::abs(b.modes()[0].mu - mu1_oracle))}};
  out.pass = max_char <= tol_char && gram_dev <= tol_gram && max_eig <= tol_eig &&
             std::abs(b.modes()[0].mu - mu1_oracle) <= 1e-9;
  return out;
}

// ---------------------------------------------------------------------------

ExperimentOutput run_simulate(Section& s, const Common& c) {
  const int N = modes_key(s, 8);
  const double T = s.positive("T", 1.0);
  const std::size_t steps = steps_key(s, 512);
  const auto paths_n = static_cast<std::size_t>(s.integer("paths", 100, 1, 1000000));
  ForwardOptions opt;
  opt.scheme = scheme_key(s);
  opt.record_stride = static_cast<std::size_t>(s.integer("stride", 1, 1, static_cast<long>(steps)));
  if (steps % opt.record_stride != 0) s.fail("stride", "must divide steps");
  const cplx a = s.complex("a", 0.0);
  const cplx bcoef = s.complex("b", 0.0);
  const auto initial = s.choice("initial", "mode", {"mode", "random", "zero"});
  const long init_mode = s.integer("initial_mode", 1, 1, N);
  const double decay = s.number("decay", 3.0);
  const cplx init_amp = s.complex("initial_amplitude", 1.0);
  const auto f = mode_forcing(s, "f", N);
  const auto g = mode_forcing(s, "g", N);
  const auto check = s.choice("check", "none", {"none", "free_flow", "ito", "hidden_regularity"});
  const double tol = s.positive("tol", check == "ito" ? 0.05 : 1e-10);
  s.finish();
  const bool free = a == 0.0 && bcoef == 0.0 && f.size() == 0 && g.size() == 0;
  if (check == "free_flow" && !free) s.fail("check", "free_flow needs a = b = 0 and no forcing");
  if (check == "ito" && (a != 0.0 || bcoef != 0.0 || f.size() > 0 || g.size() == 0))
    s.fail("check", "ito needs a = b = 0, no f and a g mode");
  if (check == "hidden_regularity" && (!free || initial != "mode"))
    s.fail("check", "hidden_regularity needs free flow from a single mode");

  const BeamBasis basis(N);
  const auto gen = assemble_generator(constant_field(basis, a), constant_field(basis, bcoef), basis);
  Eigen::VectorXcd y0 = Eigen::VectorXcd::Zero(N);
  if (initial == "mode") y0 = unit_mode(N, static_cast<int>(init_mode - 1), init_amp);
  if (initial == "random") y0 = random_modal_vector(N, c.seed, 0, decay) * init_amp;
  const auto forcing = ForcingSeries::constant(steps, f, g);
  const auto paths = brownian_ensemble(T, steps, c.seed, paths_n);
  const auto ens = solve_forward_ensemble(gen, y0, forcing, paths, opt);

  ExperimentOutput out;
  out.schema = "simulate/1";
  out.table.header = {"t", "k", "mean_re", "mean_im", "mean_abs2"};
  const std::size_t n_rec = ens.front().times.size();
  const double np = static_cast<double>(paths_n);
  for (std::size_t j = 0; j < n_rec; ++j) {
    for (int k = 0; k < N; ++k) {
      cplx m{0.0, 0.0};
      double a2 = 0.0;
      for (const auto& tr : ens) {
        const cplx v = tr.coeffs(k, static_cast<Eigen::Index>(j));
        m += v;
        a2 += std::norm(v);
      }
      out.table.rows.push_back({fmt(ens.front().times[j]), fmt_int(k + 1), fmt(m.real() / np), fmt(m.imag() / np), fmt(a2 / np)});
    }
  }
  const auto energy = energy_report(ens, basis, 0.0, forcing);
  out.results = {{"modes", N}, {"paths", paths_n}, {"steps", steps},
                 {"final_mean_energy", num(energy.mean_norm2.back())},
                 {"energy_constant", num(energy.empirical_c)}};
  out.results["check"] = check;
  if (check == "free_flow") {
    double dev = 0.0;
    for (const auto& tr : ens)
      for (Eigen::Index j = 0; j < tr.coeffs.cols(); ++j)
        dev = std::max(dev, (tr.coeffs.col(j).cwiseAbs() - y0.cwiseAbs()).cwiseAbs().maxCoeff());
    out.results["max_modulus_deviation"] = num(dev);
    out.pass = dev <= tol;
  } else if (check == "ito") {
    int m = 0;
    g.cwiseAbs().maxCoeff(&m);
    double inc = 0.0;
    for (const auto& tr : ens) inc += std::norm(tr.final_state()(m)) - std::norm(y0(m));
    inc /= np;
    const double oracle = T * std::norm(g(m));
    out.results["mean_increment"] = num(inc);
    out.results["oracle"] = num(oracle);
    out.results["relative_error"] = num(std::abs(inc - oracle) / oracle);
    out.pass = std::abs(inc - oracle) <= tol * oracle;
  } else if (check == "hidden_regularity") {
    const auto hr = hidden_regularity_report(ens, basis, forcing);
    const double oracle = std::sqrt(T) * std::abs(init_amp) *
                          std::abs(eigenfunction_eval(basis.modes()[static_cast<std::size_t>(init_mode - 1)], 0.0, 2));
    out.results["trace_yxx0"] = num(hr.yxx0);
    out.results["oracle"] = num(oracle);
    out.results["empirical_c"] = num(hr.empirical_c);
    out.pass = std::abs(hr.yxx0 - oracle) <= std::max(tol, 1e-6) && std::isfinite(hr.empirical_c);
  }
  return out;
}

// ---------------------------------------------------------------------------

TestField field_named(const std::string& n) {
  if (n == "trig") return trig_field();
  if (n == "poly_exp") return poly_exp_field();
  return noise_field();
}

ExperimentOutput run_identity(Section& s, const Common& c) {
  const double T = s.positive("T", 1.0);
  const auto levels = s.integers("levels", {7, 8, 9}, 2, 20);
  const int nx = static_cast<int>(s.integer("nx", 16, 1, 4096));
  const auto fields = s.choices("fields", {"trig", "poly_exp", "noise"}, {"trig", "poly_exp", "noise"});
  const auto identities =
      s.choices("identities", {"weighted", "multiplier1", "multiplier2"}, {"weighted", "multiplier1", "multiplier2"});
  const auto weight_kind = s.choice("weight", "synthetic", {"synthetic", "hat", "tilde"});
  WeightSpec spec;
  spec.T = T;
  spec.lambda = s.positive("lambda", 1.0);
  spec.mu = s.positive("mu", 1.0);
  const double min_slope = s.number("min_slope", 0.9);
  const double max_dw = s.positive("max_relative_dw", 1e-10);
  s.finish();
  if (levels.size() < 2) s.fail("levels", "need two or more levels");

  WeightJetFn wf;
  if (weight_kind == "synthetic") {
    wf = synthetic_weight().jet_fn();
  } else {
    spec.variant = weight_kind == "hat" ? WeightVariant::hat : WeightVariant::tilde;
    wf = CarlemanWeight(spec).jet_fn();
  }
  std::vector<std::size_t> steps;
  for (long l : levels) steps.push_back(std::size_t{1} << l);
  const std::size_t finest = *std::max_element(steps.begin(), steps.end());
  const BrownianPath path = brownian_path(T, finest, c.seed, 0);
  const Multiplier A = Multiplier::standard();

  ExperimentOutput out;
  out.schema = "identity/1";
  out.table.header = {"identity", "field", "n_steps", "dt", "max_dt_residual", "max_dw_residual", "max_scale"};
  json studies = json::array();
  for (const auto& id : identities) {
    for (const auto& fname : fields) {
      const TestField field = field_named(fname);
      PointCheck check;
      if (id == "weighted") {
        check = [&field, &wf](double x, double t, double w, double h) { return identity_point(field, wf, x, t, w, h); };
      } else {
        const int which = id == "multiplier1" ? 1 : 2;
        check = [&field, &A, which](double x, double t, double w, double h) {
          return multiplier_point(field, A, which, x, t, w, h);
        };
      }
      const auto st = identity_convergence(check, T, steps, nx, &path);
      for (const auto& lv : st.levels)
        out.table.rows.push_back({id, fname, fmt_int(lv.n_steps), fmt(lv.dt), fmt(lv.max_dt_residual),
                                  fmt(lv.max_dw_residual), fmt(lv.max_scale)});
      const bool ok = (st.slope >= min_slope || st.exact) && st.max_relative_dw <= max_dw;
      studies.push_back({{"identity", id}, {"field", fname}, {"slope", num(st.slope)},
                         {"min_pair_slope", num(st.min_pair_slope)}, {"max_relative_dw", num(st.max_relative_dw)},
                         {"exact", st.exact}, {"pass", ok}});
      out.pass = out.pass && ok;
    }
  }
  out.results = {{"weight", weight_kind}, {"studies", studies}};
  return out;
}

// ---------------------------------------------------------------------------

WeightSpec weight_key(Section& s, double T) {
  WeightSpec spec;
  spec.T = T;
  spec.variant = s.choice("weight", "hat", {"hat", "tilde"}) == "hat" ? WeightVariant::hat : WeightVariant::tilde;
  spec.mu = s.positive("mu", 2.0);
  spec.alpha = s.number("alpha", 0.3);
  spec.beta = s.number("beta", 0.7);
  spec.x0 = s.number("x0", 1.5);
  spec.delta0 = s.positive("delta0", 6.0);
  if (!(spec.alpha > 0.0 && spec.alpha < spec.beta && spec.beta < 1.0)) s.fail("alpha", "need 0 < alpha < beta < 1");
  return spec;
}

ExperimentOutput run_carleman(Section& s, const Common& c) {
  const int N = modes_key(s, 12);
  const double T = s.positive("T", 1.0);
  const std::size_t steps = steps_key(s, 256);
  const auto stride = static_cast<std::size_t>(s.integer("stride", 2, 1, static_cast<long>(steps)));
  if (steps % stride != 0) s.fail("stride", "must divide steps");
  const auto P = static_cast<std::size_t>(s.integer("paths", 100, 1, 100000));
  WeightSpec spec = weight_key(s, T);
  const bool boundary = s.choice("observation", "interior", {"interior", "boundary"}) == "boundary";
  const bool backward = s.choice("direction", "forward", {"forward", "backward"}) == "backward";
  const double lambda0 = s.positive("lambda0", WeightSpec::default_lambda(T));
  std::vector<double> lambdas;
  if (s.has("lambdas")) {
    lambdas = s.numbers("lambdas", {});
    for (double l : lambdas)
      if (!(l > 0.0)) s.fail("lambdas", "entries must be > 0");
  } else {
    for (double f : s.numbers("factors", {1.0, 2.0, 4.0})) lambdas.push_back(lambda0 * f);
  }
  const double growth = s.positive("growth", 1.10);
  const double decay = s.number("decay", 3.0);
  const double scale = s.number("data_scale", 1.0);
  const cplx a = s.complex("a", 0.0);
  const cplx bcoef = s.complex("b", 0.0);
  s.finish();

  const BeamBasis basis(N);
  const Observation obs = boundary ? Observation::boundary : Observation::interior;
  CarlemanSweep sw;
  if (!backward) {
    const auto gen = assemble_generator(constant_field(basis, a), constant_field(basis, bcoef), basis);
    const auto paths = brownian_ensemble(T, steps, c.seed, P);
    const auto forcing = ForcingSeries::constant(steps, random_modal_vector(N, c.seed, 1, decay) * scale,
                                                 random_modal_vector(N, c.seed, 2, decay) * scale);
    TrajectoryEnsemble ens(P);
    parallel_for(P, [&](std::size_t p) {
      ens[p] = solve_forward(gen, random_modal_vector(N, c.seed, 10 + p, decay), forcing, paths[p],
                             {ForwardScheme::drift_implicit_midpoint, stride});
    });
    sw = carleman_sweep(basis, forward_sample(ens, forcing), spec, obs, lambdas, growth);
  } else {
    const auto gen = assemble_backward_generator(constant_field(basis, a), constant_field(basis, bcoef), basis,
                                                 BackwardDrift::adjoint);
    const auto sol = solve_backward_deterministic(gen, random_modal_vector(N, c.seed, 3, decay), T, steps);
    sw = carleman_sweep(basis, backward_sample(broadcast(sol, P)), spec, obs, lambdas, growth);
  }
  ExperimentOutput out;
  out.schema = "carleman/1";
  out.table.header = {"lambda", "mu", "log_lhs", "log_rhs", "ratio", "log10_ratio", "lhs_rel_se", "rhs_rel_se",
                      "peak_share"};
  json pts = json::array();
  for (const auto& r : sw.points) {
    out.table.rows.push_back({fmt(r.lambda), fmt(r.mu), fmt(r.log_lhs), fmt(r.log_rhs), fmt(r.ratio),
                              fmt(r.log10_ratio), fmt(r.lhs_rel_se), fmt(r.rhs_rel_se), fmt(r.peak_share)});
    pts.push_back({{"lambda", num(r.lambda)}, {"log_lhs", num(r.log_lhs)}, {"log_rhs", num(r.log_rhs)},
                   {"ratio", num(r.ratio)}, {"log10_ratio", num(r.log10_ratio)}, {"peak_share", num(r.peak_share)},
                   {"zero", r.zero}});
  }
  out.results = {{"direction", backward ? "backward" : "forward"},
                 {"weight", spec.variant == WeightVariant::hat ? "hat" : "tilde"},
                 {"observation", boundary ? "boundary" : "interior"},
                 {"finite", sw.finite},
                 {"stable", sw.stable},
                 {"points", pts}};
  const auto& last = sw.points.back();
  out.report = {{"lambda", num(last.lambda)}, {"mu", num(last.mu)},       {"log_lhs", num(last.log_lhs)},
                {"log_rhs", num(last.log_rhs)}, {"ratio", num(last.ratio)}, {"log10_ratio", num(last.log10_ratio)},
                {"stderr", num(last.lhs_rel_se)}};
  out.pass = sw.finite && sw.stable;
  return out;
}

// ---------------------------------------------------------------------------

ExperimentOutput run_observability(Section& s, const Common& c) {
  const int N = modes_key(s, 8);
  const double T = s.positive("T", 1.0);
  const std::size_t steps = steps_key(s, 256);
  const auto P = static_cast<std::size_t>(s.integer("paths", 50, 1, 100000));
  const auto E = static_cast<std::size_t>(s.integer("experiments", 8, 1, 10000));
  const auto mode_s = s.choice("mode", "interior", {"interior", "boundary", "dual"});
  const double alpha = s.number("alpha", 0.3);
  const double beta = s.number("beta", 0.7);
  const double decay = s.number("decay", 3.0);
  const double scale = s.number("data_scale", 0.5);
  const cplx a = s.complex("a", 0.0);
  const cplx bcoef = s.complex("b", 0.0);
  const double unit_threshold = s.positive("unit_threshold", 1e-8);
  s.finish();
  if (!(alpha > 0.0 && alpha < beta && beta < 1.0)) s.fail("alpha", "need 0 < alpha < beta < 1");
  const ObservabilityMode mode = mode_s == "interior"   ? ObservabilityMode::interior
                                 : mode_s == "boundary" ? ObservabilityMode::boundary
                                                        : ObservabilityMode::dual;
  const BeamBasis basis(N);
  std::vector<ObservabilitySample> samples;
  double min_unit = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < E; ++e) {
    const std::uint64_t base = (e + 1) * 1000000ULL;
    const auto paths = brownian_ensemble(T, steps, c.seed, P, e * P);
    if (mode == ObservabilityMode::dual) {
      const auto gen = assemble_backward_generator(constant_field(basis, a), constant_field(basis, bcoef), basis,
                                                   BackwardDrift::adjoint);
      const Eigen::VectorXcd v0 = random_modal_vector(N, c.seed, base, decay);
      const Eigen::VectorXcd v1 = random_modal_vector(N, c.seed, base + 1, decay) * scale;
      const auto bwd = solve_backward_regression(
          gen, [&](const BrownianPath& p) { return Eigen::VectorXcd(v0 + v1 * (p.values().back() / std::sqrt(T))); },
          paths);
      samples.push_back(observability_dual(basis, bwd));
      min_unit = std::min(min_unit, min_unit_observation(basis, bwd));
    } else {
      const auto gen = assemble_generator(constant_field(basis, a), constant_field(basis, bcoef), basis);
      const auto forcing = ForcingSeries::constant(steps, random_modal_vector(N, c.seed, base + 1, decay) * scale,
                                                   random_modal_vector(N, c.seed, base + 2, decay) * scale);
      TrajectoryEnsemble ens(P), homog(P);
      parallel_for(P, [&](std::size_t p) {
        const auto y0 = random_modal_vector(N, c.seed, base + 10 + p, decay);
        ens[p] = solve_forward(gen, y0, forcing, paths[p]);
        homog[p] = solve_forward(gen, y0, {}, paths[p]);
      });
      samples.push_back(observability_forward(basis, ens, forcing, mode, alpha, beta));
      min_unit = std::min(min_unit, min_unit_observation(basis, homog, mode, alpha, beta));
    }
  }
  const auto rep = summarize_observability(mode, samples, min_unit);
  ExperimentOutput out;
  out.schema = "observability/1";
  out.table.header = {"experiment", "lhs", "observation", "data", "rhs", "ratio"};
  for (std::size_t e = 0; e < samples.size(); ++e) {
    const auto& x = samples[e];
    out.table.rows.push_back({fmt_int(e), fmt(x.lhs), fmt(x.observation), fmt(x.data), fmt(x.rhs), fmt(x.ratio)});
  }
  out.results = {{"mode", mode_s},
                 {"empirical_c", num(rep.empirical_c)},
                 {"violation", rep.violation},
                 {"min_unit_observation", num(rep.min_unit_observation)}};
  out.report = {{"ratio", num(rep.empirical_c)}};
  out.pass = std::isfinite(rep.empirical_c) && !rep.violation && rep.min_unit_observation >= unit_threshold;
  return out;
}

// ---------------------------------------------------------------------------

ExperimentOutput run_hum(Section& s, const Common& c) {
  const int N = modes_key(s, 8);
  const double T = s.positive("T", 1.0);
  const std::size_t steps = steps_key(s, 4096);
  CgOptions opt;
  opt.tol = s.positive("tol", 1e-6);
  opt.max_iter = static_cast<int>(s.integer("max_iter", 0, 0, 100000));
  opt.jacobi = s.boolean("jacobi", true);
  const double verify_tol = s.positive("verify_tol", 1e-5);
  const cplx a = s.complex("a", 0.0);
  const cplx bcoef = s.complex("b", 0.0);
  const bool dense = s.boolean("dense", true);
  const bool stochastic = s.boolean("stochastic", false);
  const auto chaos = static_cast<int>(s.integer("chaos_degree", 1, 0, 3));
  const auto P = static_cast<std::size_t>(s.integer("paths", 2000, 2, 1000000));
  const auto target_modes = static_cast<int>(s.integer("target_modes", std::min(4, N), 1, N));
  auto target = s.complexes("target");
  auto target_noise = s.complexes("target_noise");
  s.finish();
  if (static_cast<int>(target.size()) > N) s.fail("target", "more entries than modes");
  if (static_cast<int>(target_noise.size()) > N) s.fail("target_noise", "more entries than modes");
  if (!stochastic && bcoef != 0.0)
    s.fail("b", "a noise coefficient needs stochastic = true (deterministic test data only see E y(T))");
  if (!stochastic && !target_noise.empty()) s.fail("target_noise", "needs stochastic = true");
  if (dense && N * (stochastic ? chaos + 1 : 1) > 64) s.fail("dense", "dense assembly is limited to 64 unknowns");

  const BeamBasis basis(N);
  const auto gen = assemble_backward_generator(constant_field(basis, a), constant_field(basis, bcoef), basis,
                                               BackwardDrift::adjoint);
  Eigen::VectorXcd y1 = Eigen::VectorXcd::Zero(N);
  if (!target.empty()) {
    for (std::size_t k = 0; k < target.size(); ++k) y1(static_cast<Eigen::Index>(k)) = target[k];
  } else {
    y1.head(target_modes) = random_modal_vector(target_modes, c.seed, 7, 0.0);
  }
  DualSpace space;
  Eigen::VectorXcd t;
  std::vector<BrownianPath> paths;
  if (stochastic) {
    paths = brownian_ensemble(T, steps, c.seed, P);
    space = chaos_dual_space(basis, gen, paths, chaos);
    Eigen::MatrixXcd Y(static_cast<Eigen::Index>(P), N);
    for (std::size_t p = 0; p < P; ++p) {
      const double xi = paths[p].values().back() / std::sqrt(T);
      Y.row(static_cast<Eigen::Index>(p)) = y1.transpose();
      for (std::size_t k = 0; k < target_noise.size(); ++k)
        Y(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) += target_noise[k] * xi;
    }
    t = target_pairings(space, Y);
  } else {
    space = deterministic_dual_space(basis, gen, T, steps);
    t = y1;
  }
  const auto h = hum_solve(space, t, {}, opt);
  const auto v = verify_target(space, h.controls, t, {}, verify_tol);

  ExperimentOutput out;
  out.schema = "hum/1";
  out.table.header = {"step", "t", "u1_re", "u1_im", "u2_re", "u2_im"};
  for (std::size_t n = 0; n < h.controls.n_steps(); ++n) {
    const auto j = static_cast<Eigen::Index>(n);
    const cplx u1 = h.controls.u1(0, j), u2 = h.controls.u2(0, j);
    out.table.rows.push_back({fmt_int(n), fmt(h.controls.dt * static_cast<double>(n)), fmt(u1.real()), fmt(u1.imag()),
                              fmt(u2.real()), fmt(u2.imag())});
  }
  json coords = json::array();
  for (Eigen::Index j = 0; j < h.coords.size(); ++j) coords.push_back({num(h.coords(j).real()), num(h.coords(j).imag())});
  out.results = {{"label", "truncated exact controllability at level N = " + std::to_string(N)},
                 {"test_space", space.label},
                 {"dimension", space.dim()},
                 {"iterations", h.report.iterations},
                 {"status", h.report.status},
                 {"converged", h.report.converged},
                 {"relative_residual", num(h.report.relative_residual)},
                 {"min_ritz", num(h.report.min_ritz)},
                 {"max_ritz", num(h.report.max_ritz)},
                 {"observation_energy", num(h.observation_energy)},
                 {"control_norm", num(h.controls.norm())},
                 {"minimizer", coords},
                 {"verify",
                  {{"max_residual", num(v.max_residual)},
                   {"threshold", num(v.threshold)},
                   {"target_norm", num(v.target_norm)},
                   {"pass", v.pass}}}};
  out.pass = h.report.converged && v.pass;
  if (dense) {
    const auto sp = gramian_spectrum(dense_gramian(space));
    json eig = json::array();
    for (Eigen::Index k = 0; k < sp.eigenvalues.size(); ++k) eig.push_back(num(sp.eigenvalues(k)));
    out.results["gramian"] = {{"min_eigenvalue", num(sp.min_eigenvalue)},
                              {"max_eigenvalue", num(sp.max_eigenvalue)},
                              {"condition", num(sp.condition)},
                              {"hermitian_defect", num(sp.hermitian_defect)},
                              {"eigenvalues", eig}};
    out.pass = out.pass && sp.min_eigenvalue > 0.0;
  }
  out.report = {{"ratio", num(h.report.relative_residual)}, {"stderr", num(v.max_residual)}};
  return out;
}

// ---------------------------------------------------------------------------

std::string compiler_id() {
#if defined(__clang__)
  return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  return std::string("gcc ") + __VERSION__;
#else
  return "unknown";
#endif
}

std::string csv_escape(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char ch : v) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw NumericalError("cannot write " + p.string());
  os << text;
  if (!os) throw NumericalError("write failed for " + p.string());
}

}  // namespace

ExperimentOutput run_experiment(const Config& cfg, const std::string& kind) {
  Section s(cfg, cfg.tree, "");
  std::vector<std::string> kinds = experiment_kinds();
  if (kind.empty() && !s.has("experiment")) s.fail("experiment", "missing; name the experiment to run");
  const std::string named = s.choice("experiment", kind, kinds);
  if (!kind.empty() && named != kind) s.fail("experiment", "config is for '" + named + "', not '" + kind + "'");
  Common c;
  c.seed = static_cast<std::uint64_t>(s.integer("seed", 1, 0, std::numeric_limits<long>::max()));
  s.text("output", "");
  ExperimentOutput out;
  if (named == "eigs") out = run_eigs(s, c);
  if (named == "simulate") out = run_simulate(s, c);
  if (named == "identity-check") out = run_identity(s, c);
  if (named == "carleman") out = run_carleman(s, c);
  if (named == "observability") out = run_observability(s, c);
  if (named == "hum") out = run_hum(s, c);
  out.kind = named;
  return out;
}

RunRecord run_and_write(const Config& cfg, const std::string& kind, const std::string& out_dir) {
  RunRecord rec;
  rec.output = run_experiment(cfg, kind);
  const std::uint64_t hash = config_hash(cfg.tree);
  std::string dir = out_dir;
  if (dir.empty() && cfg.tree.contains("output")) dir = cfg.tree["output"].get<std::string>();
  if (dir.empty()) {
    const char* root = std::getenv("CLAB_OUTPUT_ROOT");
    dir = (fs::path(root != nullptr && *root != '\0' ? root : "clab-runs") / (rec.output.kind + "-" + hex64(hash))).string();
  }
  fs::create_directories(dir);
  rec.dir = dir;
  const auto seed = cfg.tree.contains("seed") ? cfg.tree["seed"] : json(1);
  rec.summary = {{"experiment", rec.output.kind},
                 {"status", rec.output.pass ? "PASS" : "FAIL"},
                 {"config", cfg.tree},
                 {"provenance",
                  {{"config_hash", hex64(hash)},
                   {"seed", seed},
                   {"version", kVersion},
                   {"csv_schema", rec.output.schema},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", compiler_id()}}},
                 {"results", rec.output.results},
                 {"report", rec.output.report}};
  write_text(fs::path(dir) / "results.csv", render_csv(rec.output.table));
  write_text(fs::path(dir) / "summary.json", rec.summary.dump(2) + "\n");
  return rec;
}

std::string render_csv(const Table& t) {
  std::ostringstream os;
  auto line = [&os](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(row[i]);
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return os.str();
}

Report build_report(const std::string& dir) {
  Report rep;
  rep.table.header = {"run", "experiment", "status", "lambda", "mu", "log_lhs", "log_rhs", "ratio", "log10_ratio",
                      "stderr"};
  if (!fs::exists(dir)) return rep;
  std::vector<fs::path> runs;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name == "summary.json" || name == "results.csv") runs.push_back(e.path().parent_path());
  }
  std::sort(runs.begin(), runs.end());
  runs.erase(std::unique(runs.begin(), runs.end()), runs.end());
  for (const auto& r : runs) {
    std::string rel = fs::relative(r, dir).generic_string();
    if (rel.empty()) rel = ".";
    json sm;
    try {
      std::ifstream in(r / "summary.json");
      if (!in) throw std::runtime_error("missing");
      sm = json::parse(in);
      if (!sm.is_object() || !sm.contains("experiment") || !sm.contains("report")) throw std::runtime_error("partial");
    } catch (const std::exception&) {
      rep.incomplete.push_back(rel);
      continue;
    }
    std::vector<std::string> row{rel, sm["experiment"].get<std::string>(), sm.value("status", "")};
    for (const char* k : {"lambda", "mu", "log_lhs", "log_rhs", "ratio", "log10_ratio", "stderr"}) {
      const auto& rp = sm["report"];
      if (!rp.contains(k)) {
        row.emplace_back();
      } else if (rp[k].is_string()) {
        row.push_back(rp[k].get<std::string>());
      } else {
        row.push_back(rp[k].dump());
      }
    }
    rep.table.rows.push_back(std::move(row));
  }
  return rep;
}

std::string render_markdown(const Report& r) {
  std::ostringstream os;
  auto line = [&os](const std::vector<std::string>& row) {
    os << '|';
    for (const auto& c : row) os << ' ' << c << " |";
    os << '\n';
  };
  line(r.table.header);
  os << '|';
  for (std::size_t i = 0; i < r.table.header.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& row : r.table.rows) line(row);
  if (!r.incomplete.empty()) {
    os << "\nIncomplete runs:\n";
    for (const auto& d : r.incomplete) os << "- " << d << '\n';
  }
  return os.str();
}

}  // namespace clab::cli
