#pragma once

#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "orbsus/finite_lattice.hpp"
#include "orbsus/model_file.hpp"
#include "orbsus/residue.hpp"

namespace orbsus {

struct ValidateCheck {
  std::string name;
  std::function<std::optional<std::string>()> run;  // failure detail, or nullopt
};

namespace checks {

struct CheckFailure {
  std::string msg;
};

inline void expect(bool cond, const std::string& msg) {
  if (!cond) throw CheckFailure{msg};
}

inline void expect_finite(double v, const std::string& what) {
  expect(std::isfinite(v), what + " is not finite");
}

inline void expect_le(double value, double bound, const std::string& what) {
  expect_finite(value, what);
  if (!(value <= bound)) {
    std::ostringstream os;
    os << what << " = " << value << " exceeds " << bound;
    throw CheckFailure{os.str()};
  }
}

inline Vec2 random_k(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng)};
}

// -- lattice -------------------------------------------------------------------

inline void duality_residual() {
  for (const LatticeModel& m :
       {honeycomb(1.0, 0.6), honeycomb(0.7, 0.0, 2.0)}) {
    auto [b1, b2] = dual_vectors(m.a1, m.a2);
    constexpr double two_pi = 6.283185307179586476925286766559;
    double r = std::max({std::abs(dot(m.a1, b1) - two_pi), std::abs(dot(m.a1, b2)),
                         std::abs(dot(m.a2, b1)), std::abs(dot(m.a2, b2) - two_pi)});
    expect_le(r, 1e-12, "duality residual");
  }
}

inline void trapezoid_spectral_accuracy() {
  LatticeModel m = honeycomb(1.0, 0.6);
  auto integral = [&](int n) {
    ReciprocalCell rc = reciprocal(m, n);
    std::vector<double> terms;
    terms.reserve(rc.grid.size());
    for (const auto& node : rc.grid)
      terms.push_back(node.w * std::exp(std::sin(dot(node.k, m.a1)) +
                                        std::cos(dot(node.k, m.a2))));
    return tree_sum(std::move(terms));
  };
  expect_le(std::abs(integral(48) - integral(24)), 1e-10, "trapezoid doubling change");
}

inline void closure_idempotent() {
  LatticeModel m = honeycomb(1.0, 0.6);
  LatticeModel m2 = build_model(m);
  expect(m.hops.size() == m2.hops.size(), "closure changed the hop count");
  for (std::size_t i = 0; i < m.hops.size(); ++i) {
    expect(m.hops[i].i == m2.hops[i].i && m.hops[i].j == m2.hops[i].j &&
               m.hops[i].cell == m2.hops[i].cell && m.hops[i].t == m2.hops[i].t,
           "closure is not idempotent");
  }
}

// -- bloch ---------------------------------------------------------------------

inline void fiber_invariants(unsigned seed) {
  std::mt19937_64 rng(seed);
  LatticeModel m = honeycomb(1.0, 0.6);
  for (int trial = 0; trial < 20; ++trial) {
    BlochFiber f = fiber(m, random_k(rng, 4.0));
    expect_le((f.H - f.H.adjoint()).norm(), 1e-13, "H hermiticity");
    for (const auto& d : f.dH) expect_le((d - d.adjoint()).norm(), 1e-13, "dH hermiticity");
    for (const auto& d : f.ddH) expect_le((d - d.adjoint()).norm(), 1e-13, "ddH hermiticity");
    expect_le((f.U.adjoint() * f.U - MatC::Identity(2, 2)).norm(), 1e-12, "U unitarity");
    MatC diag = f.U.adjoint() * f.H * f.U;
    diag(0, 0) -= f.E(0);
    diag(1, 1) -= f.E(1);
    expect_le(diag.norm(), 1e-10 * f.spectral_scale(), "diagonalisation residual");
  }
}

inline void fiber_periodicity() {
  LatticeModel m = honeycomb(1.0, 0.0);
  auto [b1, b2] = dual_vectors(m.a1, m.a2);
  Vec2 k{0.37, -1.21};
  BlochFiber f0 = fiber(m, k);
  BlochFiber f1 = fiber(m, k + b1);
  BlochFiber f2 = fiber(m, k + b2);
  expect_le((f0.E - f1.E).norm(), 1e-10, "periodicity along b1");
  expect_le((f0.E - f2.E).norm(), 1e-10, "periodicity along b2");
}

inline void resolvent_derivative_identity(unsigned seed) {
  std::mt19937_64 rng(seed + 1);
  LatticeModel m = honeycomb(1.0, 0.6);
  const cd xi(0.3, 0.9);
  const double h = 1e-5;
  for (int trial = 0; trial < 5; ++trial) {
    Vec2 k = random_k(rng, 3.0);
    for (int axis = 0; axis < 2; ++axis) {
      Vec2 dk = axis == 0 ? Vec2{h, 0.0} : Vec2{0.0, h};
      MatC rp = resolvent(fiber(m, k + dk), xi);
      MatC rm = resolvent(fiber(m, k - dk), xi);
      MatC fd = (rp - rm) / (2.0 * h);
      BlochFiber f = fiber(m, k);
      MatC R = resolvent(f, xi);
      expect_le((fd + R * f.dH[axis] * R).norm(), 1e-6, "dR identity");
    }
  }
}

inline void resolvent_second_identity() {
  LatticeModel m = honeycomb(1.0, 0.6);
  const cd xi(0.1, 1.1);
  const double h = 1e-5;
  Vec2 k{0.4, 0.9};
  for (auto [a, g] : {std::pair{0, 0}, std::pair{0, 1}, std::pair{1, 1}}) {
    Vec2 da = a == 0 ? Vec2{h, 0} : Vec2{0, h};
    Vec2 dg = g == 0 ? Vec2{h, 0} : Vec2{0, h};
    MatC rpp = resolvent(fiber(m, k + da + dg), xi);
    MatC rpm = resolvent(fiber(m, k + da - dg), xi);
    MatC rmp = resolvent(fiber(m, k - da + dg), xi);
    MatC rmm = resolvent(fiber(m, k - da - dg), xi);
    MatC fd = (rpp - rpm - rmp + rmm) / (4.0 * h * h);
    BlochFiber f = fiber(m, k);
    MatC R = resolvent(f, xi);
    MatC expected = R * f.dH[g] * R * f.dH[a] * R - R * f.ddH_at(a, g) * R +
                    R * f.dH[a] * R * f.dH[g] * R;
    expect_le((fd - expected).norm(), 1e-4, "ddR identity");
  }
}

inline void eigenvalue_continuity() {
  LatticeModel m = honeycomb(1.0, 0.6);
  Vec2 k0{0.0, 0.0}, k1{2.0, 1.3};
  const int steps = 400;
  double lip = 0.0;
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    BlochFiber f = fiber(m, k0 + t * (k1 - k0));
    lip = std::max(lip, f.dH[0].operatorNorm() + f.dH[1].operatorNorm());
  }
  double dk = norm(k1 - k0) / steps;
  VecR prev;
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    VecR e = fiber(m, k0 + t * (k1 - k0)).E;
    if (i > 0)
      expect_le((e - prev).cwiseAbs().maxCoeff(), 1.5 * lip * dk + 1e-12,
                "eigenvalue jump along path");
    prev = e;
  }
}

// -- thermo ----------------------------------------------------------------------

inline void pressure_positive() {
  Model m(honeycomb(1.0, 0.6));
  for (double beta : {0.5, 2.0, 8.0})
    for (double z : {0.2, 1.0, 5.0}) {
      double p = pressure_bulk(m, 24, ThermoState{beta, std::log(z) / beta, 0.5});
      expect(p > 0.0, "pressure not positive");
      expect_finite(p, "pressure");
    }
}

inline void density_monotone() {
  Model m(honeycomb(1.0, 0.6));
  double prev = -1.0;
  for (double mu : {-4.0, -2.0, -0.5, 0.0, 0.5, 2.0, 4.0}) {
    double rho = density_bulk(m, 24, 2.0, mu);
    expect(rho > prev, "density not strictly increasing in mu");
    expect(rho > 0.0 && rho < 1.0, "density out of (0,1)");
    prev = rho;
  }
}

inline void contour_deformation_invariance() {
  Model m(dirac_gapped(1.0, {ZoneSpec::Shape::disk, 5.0}));
  FiberTable t = make_fiber_table(m, 16);
  double mu0 = detail::invert_density_from_table(t, 5.0, 0.5);
  ContourSpec c0 = build_contour(5.0, t.emin, t.emax, 4);
  ContourSpec c1 = build_contour(5.0, t.emin, t.emax + 1.0, 4);
  cd v0 = detail::chi_contour_value(t, c0, mu0, 1.0);
  cd v1 = detail::chi_contour_value(t, c1, mu0, 1.0);
  expect_le(std::abs(v0 - v1), 1e-10, "contour deformation change");
}

inline void cauchy_sanity() {
  const double beta = 3.0, mu = 0.2, E = 0.7;
  ContourSpec c = build_contour(beta, E - 0.5, E + 0.5, 5);
  cd acc(0, 0);
  for (const auto& [xi, w] : c.nodes)
    acc += w * fermi_ln(beta, mu, xi) / (cd(E, 0) - xi);
  cd val = cd(0, 1) / (2.0 * std::numbers::pi) * acc;
  double expected = fermi_dirac_derivs(beta, mu, E, 0)[0];
  expect_le(std::abs(val - cd(expected, 0)), 1e-11, "cauchy identity error");
}

inline void chi_real() {
  Model m(honeycomb(1.0, 0.6));
  ChiResult r = chi_contour(m, 16, 2.0, 0.5);
  expect_le(r.imag_residual, 1e-10 * (std::abs(r.chi) + 1.0), "imaginary residual");
  expect_finite(r.chi, "chi");
}

// -- residue ---------------------------------------------------------------------

inline void engine_vs_closed_form(unsigned seed) {
  std::mt19937_64 rng(seed + 2);
  Model ml(dirac_gapped(1.0));
  Model mh(honeycomb(1.0, 0.6));
  for (int trial = 0; trial < 200; ++trial) {
    const Model& m = trial % 2 == 0 ? ml : mh;
    BlochFiber f = m.fiber_at(random_k(rng, 3.0));
    auto w = residue_weights(f);
    if (!w) continue;
    MatrixElements me = matrix_elements(f);
    for (int j = 0; j < 2; ++j) {
      auto closed = two_band_closed_weights(me, f.E, j);
      for (int l = 0; l < 4; ++l)
        expect_le(std::abs(w->d[j][l] - closed[l].real()),
                  1e-10 * (1.0 + std::abs(closed[l])), "engine vs closed-form weight");
    }
  }
}

inline void path_equivalence() {
  std::vector<Model> models;
  models.push_back(Model(dirac_gapped(1.0)));
  models.push_back(Model(dirac_diagonal(1.0)));
  models.push_back(Model(honeycomb(1.0, 0.6)));
  for (const Model& m : models)
    for (double beta : {1.0, 5.0, 10.0}) {
      ChiResult a = chi_contour(m, 32, beta, 0.5);
      ChiResult b = chi_residue(m, 32, beta, 0.5);
      expect_le(std::abs(a.chi - b.chi), 1e-7 * std::abs(a.chi), "path difference");
    }
}

inline void beta_independent_weights() {
  Model m(honeycomb(1.0, 0.6));
  FiberTable t = make_fiber_table(m, 24);
  std::vector<BandWeights> table;
  table.reserve(t.fibers.size());
  for (const auto& f : t.fibers) {
    auto w = residue_weights(f);
    expect(w.has_value(), "unexpected degeneracy in gapped model");
    table.push_back(*w);
  }
  for (double beta : {2.0, 7.0}) {
    double mu0 = detail::invert_density_from_table(t, beta, 0.5);
    std::vector<double> terms(t.fibers.size());
    for (std::size_t i = 0; i < t.fibers.size(); ++i) {
      double v = 0.0;
      for (int j = 0; j < 2; ++j) {
        auto df = fermi_dirac_derivs(beta, mu0, t.fibers[i].E(j), 3);
        for (int l = 0; l <= 3; ++l) v -= df[l] * table[i].d[j][l];
      }
      terms[i] = t.grid.nodes[i].w * v;
    }
    double chi = 0.25 / (2 * t.grid.area * beta) * tree_sum(std::move(terms));
    ChiResult ref = chi_contour(m, 24, beta, 0.5);
    expect_le(std::abs(chi - ref.chi), 1e-7 * std::abs(ref.chi),
              "weight table reuse across beta");
  }
}

inline void zero_t_consistency() {
  Model m(honeycomb(1.0, 0.6));
  ChiResult inf = chi_zero_temperature(m, 32, 0.5);
  double beta = 15.0;
  ChiResult fin = chi_residue(m, 32, beta, 0.5);
  expect_le(std::abs(fin.chi - inf.chi),
            std::exp(-beta * 0.6 / 4.0) * std::abs(inf.chi) + 1e-9,
            "zero-temperature approach");
}

inline void phase_invariance(unsigned seed) {
  std::mt19937_64 rng(seed + 3);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  Model m(honeycomb(1.0, 0.6));
  BlochFiber f = m.fiber_at({0.31, -0.77});
  BlochFiber g = f;
  for (int c = 0; c < g.U.cols(); ++c) g.U.col(c) *= std::exp(cd(0, u(rng)));
  MatrixElements a = matrix_elements(f), b = matrix_elements(g);
  int idx[2] = {0, 1};
  for (int j1 : idx)
    for (int j2 : idx) {
      expect_le(std::abs(coeff_C2(a, j1, j2) - coeff_C2(b, j1, j2)), 1e-12, "C2 phase drift");
      for (int j3 : idx) {
        expect_le(std::abs(coeff_C3(a, j1, j2, j3) - coeff_C3(b, j1, j2, j3)), 1e-12,
                  "C3 phase drift");
        for (int j4 : idx)
          expect_le(std::abs(coeff_C4(a, j1, j2, j3, j4) - coeff_C4(b, j1, j2, j3, j4)),
                    1e-12, "C4 phase drift");
      }
    }
}

inline void remark3_identities(unsigned seed) {
  std::mt19937_64 rng(seed + 4);
  Model m(dirac_gapped(0.8));
  for (int trial = 0; trial < 50; ++trial) {
    BlochFiber f = m.fiber_at(random_k(rng, 3.0));
    auto w = residue_weights(f);
    expect(w.has_value(), "unexpected degeneracy");
    MatrixElements me = matrix_elements(f);
    for (int j = 0; j < 2; ++j) {
      auto u = two_band_u(me, j);
      auto v = two_band_v(me, j);
      expect_le(std::abs(v[0]), 1e-14, "v_{j,0}");
      double dE = f.E(1 - j) - f.E(j);
      cd d1(0, 0), d0(0, 0);
      double pw = dE;
      for (int l = 0; l <= 2; ++l) {
        d1 += u[l] / pw;
        d0 += v[l] / (pw * dE);
        pw *= dE;
      }
      expect_le(std::abs(d1.real() - w->d[j][1]), 1e-10 * (1.0 + std::abs(d1)),
                "d_{j,1} via u");
      expect_le(std::abs(d0.real() - w->d[j][0]), 1e-10 * (1.0 + std::abs(d0)),
                "d_{j,0} via v");
    }
  }
}

// -- finite lattice ---------------------------------------------------------------

inline void harper_norm_bound() {
  LatticeModel m = honeycomb(1.0, 0.6);
  double schur = 0.0;
  MagneticOperator op0 = build_harper(m, 4, 0.0);
  for (int r = 0; r < op0.dim(); ++r) {
    double row = 0.0;
    for (int c = 0; c < op0.dim(); ++c) row += std::abs(op0.Hmat(r, c));
    schur = std::max(schur, row);
  }
  for (double b : {0.0, 0.3, 0.7, 1.5, 3.0}) {
    VecR e = spectrum_N(build_harper(m, 4, b));
    double nrm = std::max(std::abs(e(0)), std::abs(e(e.size() - 1)));
    expect_le(nrm, schur + 1e-12, "Harper norm vs Schur bound");
  }
}

inline void resolvent_kernel_decay() {
  LatticeModel m = honeycomb(1.0, 0.0);
  MagneticOperator op = build_harper(m, 6, 0.4);
  MatC R = resolvent_N(op, cd(0.0, 1.0));
  int x = op.lat.index(0, 0, 0);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (int n1 = -4; n1 <= 4; ++n1)
    for (int n2 = -4; n2 <= 4; ++n2) {
      int y = op.lat.index(n1, n2, 1);
      double dist = norm(op.lat.sites[y] - op.lat.sites[x]);
      double mag = std::abs(R(x, y));
      if (dist < 1e-9 || mag < 1e-280) continue;
      double lx = dist, ly = std::log(mag);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++count;
    }
  double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  expect(slope < -0.05, "resolvent kernel does not decay (slope " + std::to_string(slope) + ")");
}

inline void pressure_N_convergence() {
  for (double gap : {0.0, 0.6}) {
    LatticeModel m = honeycomb(1.0, gap);
    double prev_diff = std::numeric_limits<double>::infinity();
    double p_prev = 0.0;
    bool have_prev = false;
    for (int N : {3, 5, 7, 9}) {
      double p = pressure_N(build_harper(m, N, 0.0), 2.0, 1.0);
      if (have_prev) {
        double diff = std::abs(p - p_prev);
        expect(diff < prev_diff, "|P_{N+2} - P_N| not decreasing");
        prev_diff = diff;
      }
      p_prev = p;
      have_prev = true;
    }
  }
}

// -- models ------------------------------------------------------------------------

inline void delta_sweep_slope() {
  std::vector<double> deltas, chis;
  for (int i = 0; i < 5; ++i) {
    double d = std::pow(10.0, -3.0 + i * 0.5);
    Model m(dirac_gapped(d, {ZoneSpec::Shape::disk, 5.0}));
    ChiResult r = chi_zero_temperature(m, 48, 0.5);
    deltas.push_back(std::log(d));
    chis.push_back(std::log(std::abs(r.chi)));
    expect(r.chi < 0.0, "zero-T chi should be diamagnetic");
  }
  double n = deltas.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    sx += deltas[i];
    sy += chis[i];
    sxx += deltas[i] * deltas[i];
    sxy += deltas[i] * chis[i];
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  expect_le(std::abs(slope + 1.0), 0.02, "log-log slope deviation from -1");
}

inline void diagonal_model_zero_chi() {
  for (double d : {0.01, 0.1, 1.0}) {
    Model m(dirac_diagonal(d, {ZoneSpec::Shape::disk, 5.0}));
    ChiResult r = chi_zero_temperature(m, 32, 0.5);
    expect_le(std::abs(r.chi), 1e-9, "diagonal-model zero-T chi");
  }
}

inline void linear_model_d10_zero(unsigned seed) {
  std::mt19937_64 rng(seed + 5);
  Model m(dirac_gapped(1.0));
  for (int trial = 0; trial < 50; ++trial) {
    BlochFiber f = m.fiber_at(random_k(rng, 4.0));
    auto w = residue_weights(f);
    expect(w.has_value(), "unexpected degeneracy");
    expect_le(std::abs(w->d[0][0]), 1e-10, "d_{1,0} for the linear model");
  }
}

// -- cli ---------------------------------------------------------------------------

std::optional<std::string> run_csv_determinism();  // defined in run.hpp

}  // namespace checks

inline std::vector<ValidateCheck> make_validate_suite(unsigned seed) {
  using checks::CheckFailure;
  auto wrap = [](std::function<void()> fn) {
    return [fn = std::move(fn)]() -> std::optional<std::string> {
      try {
        fn();
      } catch (const CheckFailure& f) {
        return f.msg;
      } catch (const Error& e) {
        return std::string(e.what());
      }
      return std::nullopt;
    };
  };
  std::vector<ValidateCheck> suite;
  auto add = [&](const std::string& name, std::function<void()> fn) {
    suite.push_back({name, wrap(std::move(fn))});
  };
  add("lattice.duality-residual", [] { checks::duality_residual(); });
  add("lattice.trapezoid-spectral", [] { checks::trapezoid_spectral_accuracy(); });
  add("lattice.closure-idempotent", [] { checks::closure_idempotent(); });
  add("bloch.fiber-invariants", [seed] { checks::fiber_invariants(seed); });
  add("bloch.periodicity", [] { checks::fiber_periodicity(); });
  add("bloch.resolvent-derivative", [seed] { checks::resolvent_derivative_identity(seed); });
  add("bloch.resolvent-second-derivative", [] { checks::resolvent_second_identity(); });
  add("bloch.eigenvalue-continuity", [] { checks::eigenvalue_continuity(); });
  add("thermo.pressure-positive", [] { checks::pressure_positive(); });
  add("thermo.density-monotone", [] { checks::density_monotone(); });
  add("thermo.contour-deformation", [] { checks::contour_deformation_invariance(); });
  add("thermo.cauchy-sanity", [] { checks::cauchy_sanity(); });
  add("thermo.chi-real", [] { checks::chi_real(); });
  add("residue.engine-vs-closed-form", [seed] { checks::engine_vs_closed_form(seed); });
  add("residue.path-equivalence", [] { checks::path_equivalence(); });
  add("residue.beta-independent-weights", [] { checks::beta_independent_weights(); });
  add("residue.zero-t-consistency", [] { checks::zero_t_consistency(); });
  add("residue.phase-invariance", [seed] { checks::phase_invariance(seed); });
  add("residue.remark3-identities", [seed] { checks::remark3_identities(seed); });
  add("finite.harper-norm-bound", [] { checks::harper_norm_bound(); });
  add("finite.kernel-decay", [] { checks::resolvent_kernel_decay(); });
  add("finite.pressure-convergence", [] { checks::pressure_N_convergence(); });
  add("models.delta-sweep-slope", [] { checks::delta_sweep_slope(); });
  add("models.diagonal-zero-chi", [] { checks::diagonal_model_zero_chi(); });
  add("models.linear-model-d10", [seed] { checks::linear_model_d10_zero(seed); });
  suite.push_back({"cli.csv-determinism", [] { return checks::run_csv_determinism(); }});
  return suite;
}

}  // namespace orbsus
