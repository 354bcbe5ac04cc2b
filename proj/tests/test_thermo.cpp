#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "orbsus/thermo.hpp"

using namespace orbsus;

namespace {

AnalyticFiber single_flat_band() {
  AnalyticFiber a;
  a.name = "flat-1";
  a.bands = 1;
  a.zone = {ZoneSpec::Shape::square, 1.0};
  auto zero = [](Vec2) { return MatC::Zero(1, 1).eval(); };
  a.H = zero;
  a.dH1 = zero;
  a.dH2 = zero;
  a.ddH11 = zero;
  a.ddH12 = zero;
  a.ddH22 = zero;
  return a;
}

}  // namespace

TEST_CASE("fermi_ln at the chemical potential") {
  REQUIRE(std::abs(fermi_ln(2.0, 0.7, cd(0.7, 0.0)) - std::log(2.0)) < 1e-15);
}

TEST_CASE("fermi_ln on the imaginary axis") {
  constexpr double pi = 3.14159265358979323846;
  cd v = fermi_ln(1.0, 0.0, cd(0.0, pi / 2));
  REQUIRE(std::abs(v - (0.5 * std::log(2.0) - cd(0, pi / 4))) < 1e-14);
}

TEST_CASE("fermi_ln decays along the real axis") {
  const double beta = 2.0, mu = 0.3;
  const double c = 2.0 * std::exp(beta * mu);
  for (double re : {5.0, 10.0, 20.0, 200.0}) {
    cd v = fermi_ln(beta, mu, cd(re, 0.4));
    REQUIRE(std::abs(v) <= c * std::exp(-beta * re));
  }
}

TEST_CASE("fermi_ln rejects points outside the strip") {
  try {
    fermi_ln(1.0, 0.0, cd(0.0, 4.0));
    FAIL("expected OutsideStrip");
  } catch (const Error& e) {
    REQUIRE(e.code() == errc::outside_strip);
  }
}

TEST_CASE("fermi derivatives at the chemical potential") {
  const double beta = 3.0;
  auto d = fermi_dirac_derivs(beta, 1.0, 1.0, 3);
  REQUIRE(std::abs(d[0] - std::log(2.0)) < 1e-15);
  REQUIRE(std::abs(d[1] + beta / 2.0) < 1e-15);
  REQUIRE(std::abs(d[2] - beta * beta / 4.0) < 1e-15);
  REQUIRE(std::abs(d[3]) < 1e-15);
}

TEST_CASE("fermi derivatives in the filled-band limit") {
  const double beta = 1.0, mu = 0.0, E = -50.0;
  auto d = fermi_dirac_derivs(beta, mu, E, 3);
  REQUIRE(std::abs(d[0] - beta * (mu - E)) < 1e-15 * std::abs(d[0]) + 1e-12);
  REQUIRE(std::abs(d[1] + beta) < 1e-15);
  REQUIRE(std::abs(d[2]) < 1e-12);
  REQUIRE(std::abs(d[3]) < 1e-12);
}

TEST_CASE("fermi derivative ladder matches finite differences") {
  const double beta = 2.5, mu = 0.4, h = 1e-6;
  for (double E : {-1.0, 0.2, 0.4, 1.7}) {
    for (int l = 1; l <= 3; ++l) {
      double fd = (fermi_dirac_derivs(beta, mu, E + h, 3)[l - 1] -
                   fermi_dirac_derivs(beta, mu, E - h, 3)[l - 1]) /
                  (2 * h);
      double an = fermi_dirac_derivs(beta, mu, E, 3)[l];
      REQUIRE(std::abs(an - fd) < 1e-6 * (std::abs(an) + 1.0));
    }
  }
}

TEST_CASE("pressure of a single flat band") {
  Model m(single_flat_band());
  for (double beta : {0.7, 3.0})
    for (double z : {0.5, 2.0}) {
      double p = pressure_bulk(m, 12, ThermoState{beta, std::log(z) / beta, 0.5});
      REQUIRE(std::abs(p - std::log(1.0 + z) / beta) < 1e-12);
    }
}

TEST_CASE("pressure of two flat bands") {
  Model m(oracle::flat_two_band(0.8));
  const double beta = 1.7, z = 1.3, delta = 0.8;
  double p = pressure_bulk(m, 8, ThermoState{beta, std::log(z) / beta, 0.5});
  double expected =
      (std::log(1.0 + z * std::exp(beta * delta)) + std::log(1.0 + z * std::exp(-beta * delta))) /
      (2.0 * beta);
  REQUIRE(std::abs(p - expected) < 1e-12);
}

TEST_CASE("density saturates at 0 and 1") {
  Model m(honeycomb(1.0, 0.6));
  REQUIRE(density_bulk(m, 16, 2.0, -60.0) < 1e-10);
  REQUIRE(density_bulk(m, 16, 2.0, 60.0) > 1.0 - 1e-10);
}

TEST_CASE("half filling of a symmetric spectrum") {
  Model m(honeycomb(1.0, 0.6));
  REQUIRE(std::abs(density_bulk(m, 24, 3.0, 0.0) - 0.5) < 1e-12);
}

TEST_CASE("density equals beta z dP/dz") {
  Model m(honeycomb(1.0, 0.6));
  const double beta = 2.0, mu = 0.4, z = std::exp(beta * mu);
  const double hz = 1e-6 * z;
  auto p = [&](double zz) {
    return pressure_bulk(m, 24, ThermoState{beta, std::log(zz) / beta, 0.5});
  };
  double fd = beta * z * (p(z + hz) - p(z - hz)) / (2 * hz);
  double rho = density_bulk(m, 24, beta, mu);
  REQUIRE(std::abs(fd - rho) < 1e-6 * rho);
}

TEST_CASE("density inversion") {
  Model m(honeycomb(1.0, 0.6));
  FiberTable t = make_fiber_table(m, 24);

  SECTION("symmetric half filling gives mu = 0") {
    double mu0 = detail::invert_density_from_table(t, 2.0, 0.5);
    REQUIRE(std::abs(mu0) < 1e-10);
  }
  SECTION("round trips across the range") {
    for (double rho0 : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      double mu0 = detail::invert_density_from_table(t, 1.5, rho0);
      REQUIRE(std::abs(detail::density_from_table(t, 1.5, mu0) - rho0) < 1e-10);
    }
  }
  SECTION("large beta pins the chemical potential mid-gap") {
    double mu0 = detail::invert_density_from_table(t, 200.0, 0.5);
    double top = -std::numeric_limits<double>::infinity();
    double bottom = std::numeric_limits<double>::infinity();
    for (const auto& f : t.fibers) {
      top = std::max(top, f.E(0));
      bottom = std::min(bottom, f.E(1));
    }
    REQUIRE(std::abs(mu0 - 0.5 * (top + bottom)) < 1e-2);
  }
  SECTION("targets outside (0,1) are rejected") {
    try {
      detail::invert_density_from_table(t, 1.0, 1.5);
      FAIL("expected TargetOutOfRange");
    } catch (const Error& e) {
      REQUIRE(e.code() == errc::target_out_of_range);
    }
  }
}

TEST_CASE("trace formula for the gapped linear model") {
  Model m(dirac_gapped(1.0));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Vec2 k = oracle::random_k(rng, 3.0);
    BlochFiber f = m.fiber_at(k);
    cd xi(0.3 + 0.1 * trial, 0.8);
    MatC R = resolvent(f, xi);
    REQUIRE(std::abs(oracle::trace_P4(R, f.dH[0], f.dH[1], f.ddH[0], f.ddH[1], f.ddH[2])) <
            1e-14);
    REQUIRE(std::abs(oracle::trace_P3(R, f.ddH[0], f.ddH[1], f.ddH[2])) < 1e-14);
    double s = std::sqrt(1.0 + norm2(k));
    cd den = std::pow(cd(-s, 0) - xi, 4) * std::pow(cd(s, 0) - xi, 4);
    cd expected = 8.0 * xi * (1.0 - xi * xi) / den;
    REQUIRE(std::abs(trace_P(f, xi) - expected) < 1e-12 * std::abs(expected));
  }
}

TEST_CASE("trace formula vanishes for the diagonal model's P5") {
  Model m(dirac_diagonal(0.7));
  BlochFiber f = m.fiber_at({0.4, -1.2});
  MatC R = resolvent(f, cd(0.2, 0.6));
  REQUIRE(std::abs(oracle::trace_P5(R, f.dH[0], f.dH[1])) < 1e-15);
}

TEST_CASE("trace formula matches the literal-product oracle") {
  LatticeModel lm = honeycomb(1.0, 0.6);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    BlochFiber f = fiber(lm, oracle::random_k(rng, 3.0));
    cd xi(-0.5 + 0.2 * trial, 1.1);
    cd mine = trace_P(f, xi);
    cd ref = oracle::trace_P_sum(f, xi);
    REQUIRE(std::abs(mine - ref) < 1e-12 * (std::abs(ref) + 1.0));
  }
}

TEST_CASE("chi vanishes identically for flat bands") {
  Model m(oracle::flat_two_band(0.9));
  ChiResult r = chi_contour(m, 8, 2.0, 0.5);
  REQUIRE(std::abs(r.chi) < 1e-15);
  ChiResult s = chi_residue(m, 8, 2.0, 0.5);
  REQUIRE(s.chi == 0.0);
}

TEST_CASE("cauchy sanity of the contour rule") {
  const double beta = 3.0, mu = 0.2, E = 0.7;
  ContourSpec c = build_contour(beta, E - 0.5, E + 0.5, 5);
  cd acc(0, 0);
  for (const auto& [xi, w] : c.nodes) acc += w * fermi_ln(beta, mu, xi) / (cd(E, 0) - xi);
  cd val = cd(0, 1) / (2.0 * std::numbers::pi) * acc;
  REQUIRE(std::abs(val - cd(fermi_dirac_derivs(beta, mu, E, 0)[0], 0)) < 1e-11);
}

TEST_CASE("contour stays clear of the spectrum by construction") {
  Model m(honeycomb(1.0, 0.6));
  FiberTable t = make_fiber_table(m, 8);
  ContourSpec c = build_contour(2.0, t.emin, t.emax, 0);
  REQUIRE(t.emin - c.delta_minus >= 1.0 - 1e-12);
  REQUIRE(c.delta_plus - t.emax >= 1.0 - 1e-12);
}
