#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <tuple>
#include <vector>

#include "orbsus/lattice.hpp"
#include "orbsus/thermo.hpp"

namespace orbsus {

// Symmetric-gauge magnetic phase and the flux of a unit field through the
// triangle (u, v, w); the gauge-invariant building block of the kernels below.
inline double magnetic_phase(Vec2 x, Vec2 y) { return 0.5 * (y.x * x.y - x.x * y.y); }
inline double flux(Vec2 u, Vec2 v, Vec2 w) {
  return magnetic_phase(u, v) + magnetic_phase(v, w) + magnetic_phase(w, u);
}

// Sites x + v with cell indices |n_k| <= N.
struct FiniteLattice {
  LatticeModel model;
  int N = 0;
  std::vector<Vec2> sites;                    // ordinal -> position
  std::vector<std::array<int, 3>> labels;     // ordinal -> (n1, n2, basis)

  int dim() const { return static_cast<int>(sites.size()); }
  int side() const { return 2 * N + 1; }
  int index(int n1, int n2, int b) const {
    return ((n1 + N) * side() + (n2 + N)) * model.bands() + b;
  }
  bool in_range(int n1, int n2) const {
    return n1 >= -N && n1 <= N && n2 >= -N && n2 <= N;
  }
};

struct MagneticOperator {
  FiniteLattice lat;
  double b = 0.0;
  MatC Hmat;
  std::vector<std::tuple<int, int, cd>> entries;  // nonzero kernel entries of Hmat

  int dim() const { return lat.dim(); }
};

inline FiniteLattice make_finite_lattice(const LatticeModel& m, int N) {
  if (N < 1) fail(errc::config_error, "N must be >= 1");
  FiniteLattice lat;
  lat.model = m;
  lat.N = N;
  const int nb = m.bands();
  lat.sites.resize(static_cast<std::size_t>(lat.side()) * lat.side() * nb);
  lat.labels.resize(lat.sites.size());
  for (int n1 = -N; n1 <= N; ++n1)
    for (int n2 = -N; n2 <= N; ++n2)
      for (int b = 0; b < nb; ++b) {
        int i = lat.index(n1, n2, b);
        lat.sites[i] = m.basis[b] + m.cell_vector(n1, n2);
        lat.labels[i] = {n1, n2, b};
      }
  return lat;
}

// H_{N,b}: Peierls phases on the b=0 kernel, hops leaving the box dropped.
inline MagneticOperator build_harper(const LatticeModel& m, int N, double b,
                                     int size_cap = 20000) {
  FiniteLattice lat = make_finite_lattice(m, N);
  if (lat.dim() > size_cap)
    fail(errc::size_limit, "finite lattice dimension " + std::to_string(lat.dim()) +
                               " exceeds cap " + std::to_string(size_cap));
  MagneticOperator op;
  op.lat = std::move(lat);
  op.b = b;
  const int d = op.lat.dim();
  op.Hmat = MatC::Zero(d, d);
  for (int n1 = -N; n1 <= N; ++n1)
    for (int n2 = -N; n2 <= N; ++n2)
      for (const Hop& h : m.hops) {
        int r1 = n1 + h.cell[0], r2 = n2 + h.cell[1];
        if (!op.lat.in_range(r1, r2)) continue;
        int row = op.lat.index(r1, r2, h.i);
        int col = op.lat.index(n1, n2, h.j);
        cd v = h.t * std::exp(cd(0.0, b * magnetic_phase(op.lat.sites[row],
                                                         op.lat.sites[col])));
        op.Hmat(row, col) += v;
      }
  op.entries.reserve(static_cast<std::size_t>(d) * 8);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      if (op.Hmat(r, c) != cd(0.0, 0.0)) op.entries.emplace_back(r, c, op.Hmat(r, c));
  return op;
}

inline VecR spectrum_N(const MagneticOperator& op) {
  Eigen::SelfAdjointEigenSolver<MatC> solver(op.Hmat, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    fail(errc::eig_solver_failure, "finite-lattice eigensolver did not converge");
  return solver.eigenvalues();
}

// Grand-canonical pressure of the boxed crystal.
inline double pressure_N(const MagneticOperator& op, double beta, double z) {
  if (!(beta > 0.0 && z > 0.0)) fail(errc::config_error, "beta and z must be positive");
  VecR e = spectrum_N(op);
  const double mu = std::log(z) / beta;
  double s = 0.0;
  for (int j = 0; j < e.size(); ++j) s += fermi_dirac_derivs(beta, mu, e(j), 0)[0];
  return s / (beta * op.dim());
}

inline MatC resolvent_N(const MagneticOperator& op, cd xi) {
  // Real spectrum: an imaginary part is already a safe distance.
  if (std::abs(xi.imag()) <= 1e-10) {
    VecR e = spectrum_N(op);
    double d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < e.size(); ++j) d = std::min(d, std::abs(cd(e(j), 0) - xi));
    if (d <= 1e-13 * (e(e.size() - 1) - e(0) + 1.0))
      fail(errc::on_spectrum, "xi within 1e-13 of the finite-lattice spectrum");
  }
  const int d = op.dim();
  return (op.Hmat - xi * MatC::Identity(d, d)).partialPivLu().inverse();
}

namespace detail {

inline void require_interior(const MagneticOperator& op, int site) {
  const auto& lab = op.lat.labels[site];
  const LatticeModel& m = op.lat.model;
  double spacing = std::abs(cross(m.a1, m.a2)) / std::max(norm(m.a1), norm(m.a2));
  int margin = static_cast<int>(std::ceil(2.0 * m.cutoff / spacing));
  if (std::max(std::abs(lab[0]), std::abs(lab[1])) > op.lat.N - margin)
    fail(errc::boundary_proximity, "site " + std::to_string(site) +
                                       " is within 2*cutoff of the box edge");
}

}  // namespace detail

// First and second b-derivative of the resolvent kernel at the operator's own
// field value, evaluated from flux-weighted kernel sums. Matches central
// finite differences in b.
inline cd kernel_db(const MagneticOperator& op, int x, int y, cd xi, int order) {
  if (order != 1 && order != 2) fail(errc::config_error, "order must be 1 or 2");
  detail::require_interior(op, x);
  detail::require_interior(op, y);
  const MatC R = resolvent_N(op, xi);
  const Vec2 px = op.lat.sites[x], py = op.lat.sites[y];
  const auto& sites = op.lat.sites;

  if (order == 1) {
    cd sum(0, 0);
    for (const auto& [z1, z2, h] : op.entries)
      sum += R(x, z1) * flux(sites[z1], sites[z2], py) * h * R(z2, y);
    return cd(0, 1) * magnetic_phase(px, py) * R(x, y) - cd(0, 1) * sum;
  }

  // chain terms with one and two flux insertions
  cd squared(0, 0), phase_single(0, 0);
  for (const auto& [z1, z2, h] : op.entries) {
    double fl = flux(sites[z1], sites[z2], py);
    cd chain = R(x, z1) * h * R(z2, y);
    squared += fl * fl * chain;
    phase_single += (magnetic_phase(px, sites[z1]) + magnetic_phase(sites[z1], py)) * fl * chain;
  }
  cd twofold(0, 0);
  for (const auto& [z1, z2, h12] : op.entries) {
    cd lead = R(x, z1) * h12;
    for (const auto& [z3, z4, h34] : op.entries) {
      twofold += lead * flux(sites[z1], sites[z2], sites[z3]) * R(z2, z3) *
                 flux(sites[z3], sites[z4], py) * h34 * R(z4, y);
    }
  }
  double phi = magnetic_phase(px, py);
  return -phi * phi * R(x, y) + 2.0 * phase_single + squared - 2.0 * twofold;
}

// ---- Gauge-dressed comparison operators --------------------------------------

inline MatC ttilde_matrix(const MagneticOperator& op, double delta_b, cd xi) {
  const int d = op.dim();
  const MatC R = resolvent_N(op, xi);
  const auto& sites = op.lat.sites;
  MatC T = MatC::Zero(d, d);
  for (const auto& [x, z, h] : op.entries) {
    for (int y = 0; y < d; ++y) {
      double fl = flux(sites[x], sites[z], sites[y]);
      cd factor = std::exp(cd(0, delta_b * magnetic_phase(sites[x], sites[y]))) *
                  (std::exp(cd(0, delta_b * fl)) - 1.0);
      T(x, y) += factor * h * R(z, y);
    }
  }
  return T;
}

// Operator norm (largest singular value) of T-tilde at field b0 + delta_b.
inline double ttilde_norm(const MagneticOperator& op, double delta_b, cd xi) {
  MatC T = ttilde_matrix(op, delta_b, xi);
  Eigen::BDCSVD<MatC> svd(T);
  return svd.singularValues()(0);
}

// Residual of R_b = R~_b - R_b T~_b on the boxed lattice (Frobenius norm).
inline double opident_residual(const LatticeModel& m, int N, double b0, double delta_b,
                               cd xi) {
  MagneticOperator op0 = build_harper(m, N, b0);
  MagneticOperator opb = build_harper(m, N, b0 + delta_b);
  const MatC R0 = resolvent_N(op0, xi);
  const MatC Rb = resolvent_N(opb, xi);
  const int d = op0.dim();
  MatC Rtilde(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      Rtilde(r, c) = std::exp(cd(0, delta_b * magnetic_phase(op0.lat.sites[r],
                                                             op0.lat.sites[c]))) *
                     R0(r, c);
  MatC T = ttilde_matrix(op0, delta_b, xi);
  return (Rb - Rtilde + Rb * T).norm();
}

}  // namespace orbsus
