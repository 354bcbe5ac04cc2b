#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <array>
#include <complex>

#include "orbsus/lattice.hpp"

namespace orbsus {

using MatC = Eigen::MatrixXcd;
using VecR = Eigen::VectorXd;

// The fiber of the hopping operator at one quasi-momentum: the matrix, its
// first and second k-derivatives, and the eigen-decomposition (eigenvalues
// sorted increasing, eigenvector phases fixed for reproducibility).
struct BlochFiber {
  Vec2 k;
  MatC H;
  std::array<MatC, 2> dH;   // d/dk1, d/dk2
  std::array<MatC, 3> ddH;  // (1,1), (1,2), (2,2)
  VecR E;
  MatC U;

  int bands() const { return static_cast<int>(E.size()); }
  const MatC& ddH_at(int a, int g) const { return ddH[(a == 0 && g == 0) ? 0 : (a == 1 && g == 1) ? 2 : 1]; }
  double spectral_scale() const { return E(E.size() - 1) - E(0) + 1.0; }
};

// Tolerance separating genuine band crossings from round-off.
inline double eps_degenerate(const VecR& E) {
  return 1e-8 * (E(E.size() - 1) - E(0) + 1.0);
}

inline void fix_eigenvector_phases(MatC& U) {
  for (int c = 0; c < U.cols(); ++c) {
    int imax = 0;
    double amax = -1.0;
    for (int r = 0; r < U.rows(); ++r) {
      double a = std::abs(U(r, c));
      if (a > amax + 1e-15) {
        amax = a;
        imax = r;
      }
    }
    cd u = U(imax, c);
    if (std::abs(u) > 0) U.col(c) *= std::conj(u) / std::abs(u);
  }
}

inline void diagonalize_fiber(BlochFiber& f) {
  Eigen::SelfAdjointEigenSolver<MatC> solver(f.H);
  if (solver.info() != Eigen::Success)
    fail(errc::eig_solver_failure, "Hermitian eigensolver did not converge at k=(" +
                                       std::to_string(f.k.x) + "," + std::to_string(f.k.y) + ")");
  f.E = solver.eigenvalues();
  f.U = solver.eigenvectors();
  fix_eigenvector_phases(f.U);
}

// Fiber kernels: H(x,y;k) = sum_v e^{-i k.(x+v-y)} H0(x+v, y), with the
// derivative kernels picking up -i*d_alpha and -d_alpha*d_gamma factors.
inline BlochFiber fiber(const LatticeModel& m, Vec2 k) {
  const int nb = m.bands();
  BlochFiber f;
  f.k = k;
  f.H = MatC::Zero(nb, nb);
  for (auto& d : f.dH) d = MatC::Zero(nb, nb);
  for (auto& d : f.ddH) d = MatC::Zero(nb, nb);
  const cd iu(0.0, 1.0);
  for (const Hop& h : m.hops) {
    Vec2 d = m.displacement(h);
    cd phase = std::exp(-iu * dot(k, d)) * h.t;
    f.H(h.i, h.j) += phase;
    f.dH[0](h.i, h.j) += -iu * d.x * phase;
    f.dH[1](h.i, h.j) += -iu * d.y * phase;
    f.ddH[0](h.i, h.j) += -d.x * d.x * phase;
    f.ddH[1](h.i, h.j) += -d.x * d.y * phase;
    f.ddH[2](h.i, h.j) += -d.y * d.y * phase;
  }
  diagonalize_fiber(f);
  return f;
}

inline double distance_to_spectrum(const VecR& E, cd xi) {
  double d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < E.size(); ++j) d = std::min(d, std::abs(cd(E(j), 0.0) - xi));
  return d;
}

// (H(k) - xi)^{-1} from the eigen-decomposition.
inline MatC resolvent(const BlochFiber& f, cd xi) {
  if (distance_to_spectrum(f.E, xi) <= 1e-13 * f.spectral_scale())
    fail(errc::on_spectrum, "resolvent requested within 1e-13 of the spectrum");
  const int nb = f.bands();
  MatC scaled(nb, nb);
  for (int c = 0; c < nb; ++c) scaled.col(c) = f.U.col(c) / (cd(f.E(c), 0.0) - xi);
  return scaled * f.U.adjoint();
}

struct BandDerivatives {
  Vec2 grad;
  double h11 = 0.0, h12 = 0.0, h22 = 0.0;  // symmetric hessian
};

// Hellmann-Feynman gradient and second derivatives of a simple band:
// dE_j/dk_a    = <u_j|(d_a H)|u_j>
// d2E_j/dk_a dk_g = <u_j|(d_a d_g H)|u_j>
//                 + 2 sum_{m != j} Re{ <u_m|d_a H|u_j> conj(<u_m|d_g H|u_j>) } / (E_j - E_m)
inline BandDerivatives band_derivatives(const BlochFiber& f, int j) {
  const int nb = f.bands();
  if (j < 0 || j >= nb) fail(errc::config_error, "band index out of range");
  const double eps = eps_degenerate(f.E);
  for (int mth = 0; mth < nb; ++mth)
    if (mth != j && std::abs(f.E(mth) - f.E(j)) <= eps)
      fail(errc::degenerate_band, "band " + std::to_string(j) + " is degenerate at this k");

  const auto uj = f.U.col(j);
  BandDerivatives out;
  Eigen::VectorXcd d1 = f.dH[0] * uj;
  Eigen::VectorXcd d2 = f.dH[1] * uj;
  out.grad = {(uj.adjoint() * d1)(0).real(), (uj.adjoint() * d2)(0).real()};
  out.h11 = (uj.adjoint() * (f.ddH[0] * uj))(0).real();
  out.h12 = (uj.adjoint() * (f.ddH[1] * uj))(0).real();
  out.h22 = (uj.adjoint() * (f.ddH[2] * uj))(0).real();
  for (int mth = 0; mth < nb; ++mth) {
    if (mth == j) continue;
    const auto um = f.U.col(mth);
    cd p1 = (um.adjoint() * d1)(0);
    cd p2 = (um.adjoint() * d2)(0);
    double den = f.E(j) - f.E(mth);
    out.h11 += 2.0 * (p1 * std::conj(p1)).real() / den;
    out.h12 += 2.0 * (p1 * std::conj(p2)).real() / den;
    out.h22 += 2.0 * (p2 * std::conj(p2)).real() / den;
  }
  return out;
}

}  // namespace orbsus
