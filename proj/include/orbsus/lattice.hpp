#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "orbsus/error.hpp"
#include "orbsus/vec2.hpp"

namespace orbsus {

using cd = std::complex<double>;

// One directed hopping entry: amplitude of the kernel between basis site i
// displaced by cell and basis site j, i.e. the bond (x_i + n1*a1 + n2*a2, x_j).
struct Hop {
  int i = 0;
  int j = 0;
  std::array<int, 2> cell{0, 0};
  cd t{0.0, 0.0};
};

struct LatticeModel {
  Vec2 a1, a2;
  std::vector<Vec2> basis;
  std::vector<Hop> hops;  // hermitian-closed, canonically sorted
  double cutoff = 0.0;

  int bands() const { return static_cast<int>(basis.size()); }

  Vec2 cell_vector(int n1, int n2) const {
    return static_cast<double>(n1) * a1 + static_cast<double>(n2) * a2;
  }

  // x_i + n1*a1 + n2*a2 - x_j for a hop entry
  Vec2 displacement(const Hop& h) const {
    return basis[h.i] + cell_vector(h.cell[0], h.cell[1]) - basis[h.j];
  }
};

// Pre-closure user description; build_model() validates and closes it.
struct ModelInput {
  Vec2 a1, a2;
  std::vector<Vec2> basis;
  std::vector<Hop> hops;
  double cutoff = 0.0;
};

inline LatticeModel build_model(const ModelInput& in) {
  if (std::abs(cross(in.a1, in.a2)) <= 1e-12 * (norm(in.a1) * norm(in.a2) + 1e-300))
    fail(errc::degenerate_lattice, "a1 and a2 are (numerically) parallel");
  if (in.basis.size() < 2)
    fail(errc::config_error, "at least two basis sites are required");
  if (!(in.cutoff > 0.0))
    fail(errc::config_error, "cutoff must be positive");

  LatticeModel m;
  m.a1 = in.a1;
  m.a2 = in.a2;
  m.basis = in.basis;
  m.cutoff = in.cutoff;

  const int nb = m.bands();
  using Key = std::tuple<int, int, int, int>;
  std::map<Key, cd> table;

  auto insert = [&](int i, int j, int n1, int n2, cd t) {
    if (i < 0 || i >= nb || j < 0 || j >= nb)
      fail(errc::config_error, "hop site index out of range");
    Key key{i, j, n1, n2};
    auto it = table.find(key);
    if (it == table.end()) {
      table.emplace(key, t);
      return;
    }
    if (std::abs(it->second - t) > 1e-12 * (1.0 + std::abs(t)))
      fail(errc::non_hermitian_conflict,
           "conflicting amplitudes for bond (" + std::to_string(i) + "," +
               std::to_string(j) + ") cell (" + std::to_string(n1) + "," +
               std::to_string(n2) + ")");
  };

  for (const Hop& h : in.hops) {
    if (std::abs(h.t) == 0.0) continue;
    insert(h.i, h.j, h.cell[0], h.cell[1], h.t);
  }
  // (P1) closure: every entry gets its reversed, conjugated partner.
  for (auto snapshot = table; const auto& [key, t] : snapshot) {
    auto [i, j, n1, n2] = key;
    insert(j, i, -n1, -n2, std::conj(t));
  }

  m.hops.reserve(table.size());
  for (const auto& [key, t] : table) {
    auto [i, j, n1, n2] = key;
    Hop h{i, j, {n1, n2}, t};
    double r = norm(m.displacement(h));
    if (r >= m.cutoff)
      fail(errc::range_violation,
           "hop (" + std::to_string(i) + "," + std::to_string(j) + ") cell (" +
               std::to_string(n1) + "," + std::to_string(n2) + ") spans " +
               std::to_string(r) + " >= cutoff " + std::to_string(m.cutoff));
    m.hops.push_back(h);
  }
  return m;
}

inline LatticeModel build_model(const LatticeModel& m) {
  return build_model(ModelInput{m.a1, m.a2, m.basis, m.hops, m.cutoff});
}

struct KNode {
  Vec2 k;
  double w = 0.0;
};

struct ReciprocalCell {
  Vec2 b1, b2;
  double area = 0.0;  // |Omega*|
  std::vector<KNode> grid;
};

inline std::pair<Vec2, Vec2> dual_vectors(Vec2 a1, Vec2 a2) {
  double c = cross(a1, a2);
  if (std::abs(c) <= 1e-12 * (norm(a1) * norm(a2) + 1e-300))
    fail(errc::degenerate_lattice, "a1 and a2 are (numerically) parallel");
  constexpr double two_pi = 6.283185307179586476925286766559;
  Vec2 b1{two_pi * a2.y / c, -two_pi * a2.x / c};
  Vec2 b2{-two_pi * a1.y / c, two_pi * a1.x / c};
  return {b1, b2};
}

// Uniform fractional grid with the periodic trapezoid weights |Omega*|/n^2.
inline ReciprocalCell reciprocal(const LatticeModel& m, int n) {
  if (n < 1) fail(errc::config_error, "grid order must be >= 1");
  ReciprocalCell rc;
  std::tie(rc.b1, rc.b2) = dual_vectors(m.a1, m.a2);
  rc.area = std::abs(cross(rc.b1, rc.b2));
  rc.grid.reserve(static_cast<std::size_t>(n) * n);
  const double w = rc.area / (static_cast<double>(n) * n);
  for (int m1 = 0; m1 < n; ++m1)
    for (int m2 = 0; m2 < n; ++m2) {
      Vec2 k = (static_cast<double>(m1) / n) * rc.b1 + (static_cast<double>(m2) / n) * rc.b2;
      rc.grid.push_back({k, w});
    }
  return rc;
}

}  // namespace orbsus
