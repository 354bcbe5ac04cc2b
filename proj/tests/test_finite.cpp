#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "orbsus/finite_lattice.hpp"

using namespace orbsus;

TEST_CASE("zero-field honeycomb Harper matrix is real and hermitian") {
  MagneticOperator op = build_harper(honeycomb(1.0, 0.3), 3, 0.0);
  REQUIRE(op.Hmat.imag().norm() == 0.0);
  REQUIRE((op.Hmat - op.Hmat.adjoint()).norm() == 0.0);
}

TEST_CASE("Peierls phases keep the operator hermitian") {
  MagneticOperator op = build_harper(honeycomb(1.0, 0.0), 3, 0.7);
  REQUIRE((op.Hmat - op.Hmat.adjoint()).norm() < 1e-14 * op.Hmat.norm());
}

TEST_CASE("magnetic translation covariance on interior bonds") {
  const LatticeModel m = honeycomb(1.0, 0.0);
  const double b = 0.37;
  MagneticOperator op = build_harper(m, 3, b);
  // shift by v = a1: compare H_b(x+v, y+v) e^{i b phi(y,v)} with e^{i b phi(x,v)} H_b(x,y)
  for (int n1 = -1; n1 <= 1; ++n1)
    for (int n2 = -1; n2 <= 1; ++n2) {
      int x = op.lat.index(n1, n2, 0);
      int y = op.lat.index(n1, n2, 1);
      int xs = op.lat.index(n1 + 1, n2, 0);
      int ys = op.lat.index(n1 + 1, n2, 1);
      Vec2 v = m.a1;
      cd lhs = op.Hmat(xs, ys) * std::exp(cd(0, b * magnetic_phase(op.lat.sites[y], v)));
      cd rhs = std::exp(cd(0, b * magnetic_phase(op.lat.sites[x], v))) * op.Hmat(x, y);
      REQUIRE(std::abs(lhs - rhs) < 1e-14);
    }
}

TEST_CASE("single-site pressure") {
  MagneticOperator op;
  op.lat.model = oracle::flat_two_band(0.0);
  op.lat.N = 0;
  op.lat.sites = {{0.0, 0.0}};
  op.lat.labels = {{0, 0, 0}};
  op.Hmat = MatC::Zero(1, 1);
  for (double beta : {0.5, 2.0})
    for (double z : {0.3, 1.0, 4.0})
      REQUIRE(std::abs(pressure_N(op, beta, z) - std::log(1.0 + z) / beta) < 1e-14);
}

TEST_CASE("pressure is linear in z as z vanishes") {
  MagneticOperator op = build_harper(honeycomb(1.0, 0.0), 2, 0.0);
  const double beta = 1.3, z = 1e-8;
  VecR e = spectrum_N(op);
  double mean = 0.0;
  for (int j = 0; j < e.size(); ++j) mean += std::exp(-beta * e(j));
  mean /= e.size();
  double p = pressure_N(op, beta, z);
  REQUIRE(std::abs(p - z * mean / beta) < 1e-3 * p);
}

TEST_CASE("finite pressure approaches the bulk pressure") {
  LatticeModel lm = honeycomb(1.0, 0.0);
  Model m(lm);
  double bulk = pressure_bulk(m, 96, ThermoState{2.0, 0.0, 0.5});
  double prev = std::numeric_limits<double>::infinity();
  for (int N : {4, 6, 8}) {
    double p = pressure_N(build_harper(lm, N, 0.0), 2.0, 1.0);
    double diff = std::abs(p - bulk);
    REQUIRE(diff < prev);
    prev = diff;
  }
}

TEST_CASE("size cap is enforced") {
  try {
    build_harper(honeycomb(1.0, 0.0), 10, 0.0, 100);
    FAIL("expected SizeLimit");
  } catch (const Error& e) {
    REQUIRE(e.code() == errc::size_limit);
  }
}

TEST_CASE("kernel derivative formulas match finite differences in b") {
  const LatticeModel m = honeycomb(1.0, 0.0);
  const int N = 6;
  const cd xi(0.2, 0.9);
  const double h = 1e-4;
  for (double b0 : {0.0, 0.3}) {
    MagneticOperator op = build_harper(m, N, b0);
    MatC rp = resolvent_N(build_harper(m, N, b0 + h), xi);
    MatC rm = resolvent_N(build_harper(m, N, b0 - h), xi);
    MatC r0 = resolvent_N(op, xi);
    int x = op.lat.index(0, 0, 0);

    cd fd1 = (rp(x, x) - rm(x, x)) / (2.0 * h);
    cd an1 = kernel_db(op, x, x, xi, 1);
    REQUIRE(std::abs(an1 - fd1) < 1e-6 * std::abs(fd1));

    cd fd2 = (rp(x, x) - 2.0 * r0(x, x) + rm(x, x)) / (h * h);
    cd an2 = kernel_db(op, x, x, xi, 2);
    REQUIRE(std::abs(an2 - fd2) < 1e-5 * std::abs(fd2));

    // off-diagonal entry as well
    int y = op.lat.index(0, 0, 1);
    cd fd1xy = (rp(x, y) - rm(x, y)) / (2.0 * h);
    REQUIRE(std::abs(kernel_db(op, x, y, xi, 1) - fd1xy) < 1e-6 * std::abs(fd1xy));
    cd fd2xy = (rp(x, y) - 2.0 * r0(x, y) + rm(x, y)) / (h * h);
    REQUIRE(std::abs(kernel_db(op, x, y, xi, 2) - fd2xy) < 1e-5 * std::abs(fd2xy));
  }
}

TEST_CASE("kernel derivatives refuse edge sites") {
  MagneticOperator op = build_harper(honeycomb(1.0, 0.0), 4, 0.0);
  int edge = op.lat.index(4, 0, 0);
  try {
    kernel_db(op, edge, edge, cd(0, 1), 1);
    FAIL("expected BoundaryProximity");
  } catch (const Error& e) {
    REQUIRE(e.code() == errc::boundary_proximity);
  }
}

TEST_CASE("dressing operator norm scales linearly in delta b") {
  MagneticOperator op = build_harper(honeycomb(1.0, 0.0), 4, 0.1);
  const cd xi(0.2, 0.9);
  REQUIRE(ttilde_norm(op, 0.0, xi) == 0.0);
  double n1 = ttilde_norm(op, 1e-3, xi);
  double n2 = ttilde_norm(op, 5e-4, xi);
  REQUIRE(std::abs(n1 / n2 - 2.0) < 0.05 * 2.0);
}

TEST_CASE("the dressed resolvent identity holds on the box") {
  const LatticeModel m = honeycomb(1.0, 0.0);
  for (double db : {1e-3, 1e-2})
    REQUIRE(opident_residual(m, 4, 0.2, db, cd(0.2, 0.9)) < 1e-10);
}

TEST_CASE("resolvent kernel decays exponentially") {
  MagneticOperator op = build_harper(honeycomb(1.0, 0.0), 6, 0.4);
  MatC R = resolvent_N(op, cd(0.0, 1.0));
  int x = op.lat.index(0, 0, 0);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (int n1 = -4; n1 <= 4; ++n1)
    for (int n2 = -4; n2 <= 4; ++n2) {
      int y = op.lat.index(n1, n2, 1);
      double dist = norm(op.lat.sites[y] - op.lat.sites[x]);
      double mag = std::abs(R(x, y));
      if (dist < 1e-9 || mag < 1e-280) continue;
      sx += dist;
      sy += std::log(mag);
      sxx += dist * dist;
      sxy += dist * std::log(mag);
      ++count;
    }
  double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  REQUIRE(slope < -0.05);
}

TEST_CASE("harper norm is bounded uniformly in b") {
  LatticeModel m = honeycomb(1.0, 0.6);
  MagneticOperator op0 = build_harper(m, 3, 0.0);
  double schur = 0.0;
  for (int r = 0; r < op0.dim(); ++r) {
    double row = 0.0;
    for (int c = 0; c < op0.dim(); ++c) row += std::abs(op0.Hmat(r, c));
    schur = std::max(schur, row);
  }
  for (double b : {0.0, 0.5, 1.0, 2.5}) {
    VecR e = spectrum_N(build_harper(m, 3, b));
    REQUIRE(std::max(std::abs(e(0)), std::abs(e(e.size() - 1))) <= schur + 1e-12);
  }
}
