#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "orbsus/lattice.hpp"
#include "orbsus/models.hpp"

using namespace orbsus;

TEST_CASE("honeycomb closure yields six directed bond entries") {
  LatticeModel m = honeycomb(1.0);
  REQUIRE(m.hops.size() == 6);
  for (const Hop& h : m.hops) {
    REQUIRE(std::abs(norm(m.displacement(h)) - 1.0) < 1e-14);
  }
  LatticeModel g = honeycomb(1.0, 0.6);
  REQUIRE(g.hops.size() == 8);  // six bonds plus two on-site entries
}

TEST_CASE("hermitian closure inserts the conjugate entry") {
  ModelInput in;
  in.a1 = {1.0, 0.0};
  in.a2 = {0.0, 1.0};
  in.basis = {{0.0, 0.0}, {0.5, 0.0}};
  in.cutoff = 1.0;
  in.hops = {{0, 1, {0, 0}, cd(1.0, 0.5)}};
  LatticeModel m = build_model(in);
  REQUIRE(m.hops.size() == 2);
  bool found = false;
  for (const Hop& h : m.hops)
    if (h.i == 1 && h.j == 0 && h.cell == std::array<int, 2>{0, 0}) {
      found = true;
      REQUIRE(h.t == std::conj(cd(1.0, 0.5)));
    }
  REQUIRE(found);
}

TEST_CASE("conflicting conjugate pair is rejected") {
  ModelInput in;
  in.a1 = {1.0, 0.0};
  in.a2 = {0.0, 1.0};
  in.basis = {{0.0, 0.0}, {0.5, 0.0}};
  in.cutoff = 1.0;
  in.hops = {{0, 1, {0, 0}, cd(1.0, 0.0)}, {1, 0, {0, 0}, cd(0.5, 0.0)}};
  REQUIRE_THROWS_MATCHES(build_model(in), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::non_hermitian_conflict;
                         }));
}

TEST_CASE("complex on-site amplitude violates hermiticity") {
  ModelInput in;
  in.a1 = {1.0, 0.0};
  in.a2 = {0.0, 1.0};
  in.basis = {{0.0, 0.0}, {0.5, 0.0}};
  in.cutoff = 1.0;
  in.hops = {{0, 0, {0, 0}, cd(0.0, 1.0)}};
  REQUIRE_THROWS_AS(build_model(in), Error);
}

TEST_CASE("hop beyond the cutoff is rejected") {
  ModelInput in;
  in.a1 = {1.0, 0.0};
  in.a2 = {0.0, 1.0};
  in.basis = {{0.0, 0.0}, {0.5, 0.0}};
  in.cutoff = 1.0;
  in.hops = {{0, 1, {10, 0}, cd(1.0, 0.0)}};
  try {
    build_model(in);
    FAIL("expected RangeViolation");
  } catch (const Error& e) {
    REQUIRE(e.code() == errc::range_violation);
  }
}

TEST_CASE("parallel generators are rejected") {
  ModelInput in;
  in.a1 = {1.0, 2.0};
  in.a2 = {2.0, 4.0};
  in.basis = {{0.0, 0.0}, {0.1, 0.1}};
  in.cutoff = 1.0;
  try {
    build_model(in);
    FAIL("expected DegenerateLattice");
  } catch (const Error& e) {
    REQUIRE(e.code() == errc::degenerate_lattice);
  }
}

TEST_CASE("closure is idempotent") {
  LatticeModel m = honeycomb(0.8, 0.3);
  LatticeModel m2 = build_model(m);
  REQUIRE(m.hops.size() == m2.hops.size());
  for (std::size_t i = 0; i < m.hops.size(); ++i) REQUIRE(m.hops[i].t == m2.hops[i].t);
}

TEST_CASE("duality on the 2pi square lattice") {
  constexpr double two_pi = 6.283185307179586476925286766559;
  auto [b1, b2] = dual_vectors({two_pi, 0.0}, {0.0, two_pi});
  REQUIRE(std::abs(b1.x - 1.0) < 1e-15);
  REQUIRE(std::abs(b1.y) < 1e-15);
  REQUIRE(std::abs(b2.y - 1.0) < 1e-15);
  REQUIRE(std::abs(cross(b1, b2) - 1.0) < 1e-15);
}

TEST_CASE("square lattice grid weights") {
  LatticeModel m = oracle::flat_two_band(0.5);
  ReciprocalCell rc = reciprocal(m, 4);
  REQUIRE(rc.grid.size() == 16);
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (const auto& node : rc.grid)
    REQUIRE(std::abs(node.w - two_pi * two_pi / 16.0) < 1e-12);
  double total = 0.0;
  for (const auto& node : rc.grid) total += node.w;
  REQUIRE(std::abs(total - rc.area) < 1e-10);
}

TEST_CASE("honeycomb Brillouin-zone area") {
  LatticeModel m = honeycomb(1.0);
  ReciprocalCell rc = reciprocal(m, 2);
  constexpr double pi = 3.14159265358979323846;
  double expected = 8.0 * pi * pi / (3.0 * std::sqrt(3.0));
  REQUIRE(std::abs(rc.area - expected) < 1e-12 * expected);
}

TEST_CASE("duality residual is at machine precision") {
  LatticeModel m = honeycomb(1.0);
  auto [b1, b2] = dual_vectors(m.a1, m.a2);
  constexpr double two_pi = 6.283185307179586476925286766559;
  REQUIRE(std::abs(dot(m.a1, b1) - two_pi) < 1e-12);
  REQUIRE(std::abs(dot(m.a2, b2) - two_pi) < 1e-12);
  REQUIRE(std::abs(dot(m.a1, b2)) < 1e-12);
  REQUIRE(std::abs(dot(m.a2, b1)) < 1e-12);
}

TEST_CASE("periodic trapezoid rule converges spectrally") {
  LatticeModel m = honeycomb(1.0, 0.6);
  auto integral = [&](int n) {
    ReciprocalCell rc = reciprocal(m, n);
    std::vector<double> terms;
    for (const auto& node : rc.grid)
      terms.push_back(node.w *
                      std::exp(std::sin(dot(node.k, m.a1)) + std::cos(dot(node.k, m.a2))));
    return tree_sum(std::move(terms));
  };
  REQUIRE(std::abs(integral(48) - integral(24)) < 1e-10);
}
