#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "orbsus/models.hpp"
#include "orbsus/parallel.hpp"
#include "orbsus/quadrature.hpp"

namespace orbsus {

struct ThermoState {
  double beta = 1.0;
  double mu = 0.0;
  double rho0 = 0.5;

  double z() const { return std::exp(beta * mu); }
};

// f(beta,z;xi) = ln(1 + z e^{-beta xi}) on the principal branch, valid inside
// the strip |Im(beta xi)| < pi where the argument stays away from the cut.
inline cd fermi_ln(double beta, double mu, cd xi) {
  if (!(beta > 0.0)) fail(errc::config_error, "beta must be positive");
  if (std::abs(beta * xi.imag()) >= std::numbers::pi)
    fail(errc::outside_strip, "xi outside the holomorphy strip |Im(beta xi)| < pi");
  cd w = beta * (cd(mu, 0.0) - xi);
  if (w.real() > 40.0) return w + std::log(1.0 + std::exp(-w));
  return std::log(1.0 + std::exp(w));
}

// d^l/dxi^l of f(beta, e^{beta mu}; xi) at real xi = E, l = 0..lmax, in closed
// form through the Fermi-Dirac value fd = (e^{beta(E-mu)}+1)^{-1}. Overflow
// safe in both tails.
inline std::array<double, 5> fermi_dirac_derivs(double beta, double mu, double E, int lmax) {
  if (lmax < 0 || lmax > 4) fail(errc::config_error, "lmax must be in 0..4");
  std::array<double, 5> out{};
  const double x = beta * (E - mu);
  double fd, ln1pe;
  if (x >= 0.0) {
    double e = std::exp(-x);
    fd = e / (1.0 + e);
    ln1pe = std::log1p(e);
  } else {
    double e = std::exp(x);
    fd = 1.0 / (1.0 + e);
    ln1pe = -x + std::log1p(e);
  }
  out[0] = ln1pe;
  if (lmax >= 1) out[1] = -beta * fd;
  const double q = fd * (1.0 - fd);
  if (lmax >= 2) out[2] = beta * beta * q;
  if (lmax >= 3) out[3] = -beta * beta * beta * q * (1.0 - 2.0 * fd);
  if (lmax >= 4) out[4] = beta * beta * beta * beta * q * (1.0 - 6.0 * fd + 6.0 * fd * fd);
  return out;
}

inline double fermi_dirac(double beta, double mu, double E) {
  double x = beta * (E - mu);
  if (x >= 0.0) {
    double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

// ---- Sampled fibers over a k-grid -------------------------------------------

struct FiberTable {
  KGrid grid;
  std::vector<BlochFiber> fibers;
  double emin = 0.0, emax = 0.0;

  int bands() const { return fibers.empty() ? 0 : fibers.front().bands(); }
};

inline FiberTable make_fiber_table(const Model& model, int n) {
  FiberTable t;
  t.grid = model.kgrid(n);
  t.fibers.resize(t.grid.nodes.size());
  parallel_for(t.grid.nodes.size(),
               [&](std::size_t i) { t.fibers[i] = model.fiber_at(t.grid.nodes[i].k); });
  t.emin = std::numeric_limits<double>::infinity();
  t.emax = -std::numeric_limits<double>::infinity();
  for (const auto& f : t.fibers) {
    t.emin = std::min(t.emin, f.E(0));
    t.emax = std::max(t.emax, f.E(f.bands() - 1));
  }
  return t;
}

// ---- Rectangular contour around the sampled spectrum ------------------------

struct ContourSpec {
  double beta = 1.0;
  double delta_minus = 0.0, delta_plus = 0.0;
  double halfheight = 0.0;  // pi/(2 beta)
  int level = 0;
  std::vector<std::pair<cd, cd>> nodes;  // (xi, weight) traversing counter-clockwise
};

inline ContourSpec build_contour(double beta, double emin, double emax, int level) {
  if (!(beta > 0.0)) fail(errc::config_error, "beta must be positive");
  ContourSpec c;
  c.beta = beta;
  c.delta_minus = emin - 1.0;
  c.delta_plus = emax + 1.0;
  c.halfheight = 0.5 * std::numbers::pi / beta;
  c.level = level;
  const GaussRule g = gauss_legendre(12);
  auto add_segment = [&](cd A, cd B, int panels) {
    cd step = (B - A) / static_cast<double>(panels);
    for (int p = 0; p < panels; ++p) {
      cd lo = A + static_cast<double>(p) * step;
      cd center = lo + 0.5 * step;
      cd half = 0.5 * step;
      for (int i = 0; i < static_cast<int>(g.x.size()); ++i)
        c.nodes.emplace_back(center + g.x[i] * half, g.w[i] * half);
    }
  };
  const int nh = 8 << level;
  const int nv = 2 << level;
  const cd bl(c.delta_minus, -c.halfheight), br(c.delta_plus, -c.halfheight);
  const cd tr(c.delta_plus, c.halfheight), tl(c.delta_minus, c.halfheight);
  add_segment(bl, br, nh);
  add_segment(br, tr, nv);
  add_segment(tr, tl, nh);
  add_segment(tl, bl, nv);
  return c;
}

// ---- The trace under the contour integral -----------------------------------

// Tr(P3 + P4 + P5)(k; xi), assembled by dense matrix products with the
// resolvent from the fiber eigen-decomposition.
inline cd trace_P(const BlochFiber& f, cd xi) {
  MatC R = resolvent(f, xi);
  cd t5 = detail::calc_P5(R, f.dH[0], f.dH[1]).trace();
  cd t4 = detail::calc_P4(R, f.dH[0], f.dH[1], f.ddH[0], f.ddH[1], f.ddH[2]).trace();
  cd t3 = detail::calc_P3(R, f.ddH[0], f.ddH[1], f.ddH[2]).trace();
  return t3 + t4 + t5;
}

namespace detail {

// Stack-allocated copy of one fiber for the hot contour loop; the dense
// products below are the same as calc_P3/4/5 but free of heap traffic.
template <int N>
struct FixedFiber {
  using Mat = Eigen::Matrix<cd, N, N>;
  Mat U, Uh, d1, d2, s11, s12, s22;
  Eigen::Matrix<double, N, 1> E;
  double on_spectrum_tol = 0.0;
  bool has_second = true;

  static FixedFiber from(const BlochFiber& f) {
    FixedFiber g;
    g.U = f.U;
    g.Uh = f.U.adjoint();
    g.d1 = f.dH[0];
    g.d2 = f.dH[1];
    g.s11 = f.ddH[0];
    g.s12 = f.ddH[1];
    g.s22 = f.ddH[2];
    g.E = f.E;
    g.on_spectrum_tol = 1e-13 * f.spectral_scale();
    g.has_second = g.s11.norm() + g.s12.norm() + g.s22.norm() > 0.0;
    return g;
  }

  cd trace_P_at(cd xi) const {
    Mat scaled;
    for (int c = 0; c < N; ++c) {
      cd den = cd(E(c), 0.0) - xi;
      if (std::abs(den) <= on_spectrum_tol)
        fail(errc::on_spectrum, "contour node within 1e-13 of the spectrum");
      scaled.col(c) = U.col(c) / den;
    }
    Mat R = scaled * Uh;
    Mat d1R = d1 * R;
    Mat d2R = d2 * R;
    Mat A = d1R * d2 - d2R * d1;
    Mat RA = R * A;
    cd t5 = -(RA * RA * R).trace();
    if (!has_second) return t5;
    Mat inner4 =
        s11 * (R * d2R * d2) - s12 * (R * (d1R * d2 + d2R * d1)) + s22 * (R * d1R * d1);
    cd t4 = (R * inner4 * R).trace();
    Mat inner3 = 0.5 * (s11 * (R * s22)) + 0.5 * (s22 * (R * s11)) - s12 * (R * s12);
    cd t3 = -(R * inner3 * R).trace();
    return t3 + t4 + t5;
  }
};

template <int N>
inline cd contour_sum_fixed(const BlochFiber& f, const ContourSpec& c, double mu) {
  auto g = FixedFiber<N>::from(f);
  cd acc(0.0, 0.0);
  for (const auto& [xi, w] : c.nodes) acc += w * fermi_ln(c.beta, mu, xi) * g.trace_P_at(xi);
  return acc;
}

}  // namespace detail

// (i/2pi) * contour integral of f(beta,mu;xi) Tr(P3+P4+P5)(k;xi).
inline cd contour_trace_integral(const BlochFiber& f, const ContourSpec& c, double mu) {
  cd acc(0.0, 0.0);
  switch (f.bands()) {
    case 1: acc = detail::contour_sum_fixed<1>(f, c, mu); break;
    case 2: acc = detail::contour_sum_fixed<2>(f, c, mu); break;
    case 3: acc = detail::contour_sum_fixed<3>(f, c, mu); break;
    case 4: acc = detail::contour_sum_fixed<4>(f, c, mu); break;
    default:
      for (const auto& [xi, w] : c.nodes) acc += w * fermi_ln(c.beta, mu, xi) * trace_P(f, xi);
  }
  return cd(0.0, 1.0) / (2.0 * std::numbers::pi) * acc;
}

// ---- Pressure, density, inversion -------------------------------------------

namespace detail {

inline double pressure_from_table(const FiberTable& t, double beta, double z) {
  const double mu = std::log(z) / beta;
  const int nb = t.bands();
  std::vector<double> terms(t.fibers.size());
  parallel_for(t.fibers.size(), [&](std::size_t i) {
    double s = 0.0;
    for (int j = 0; j < nb; ++j)
      s += fermi_dirac_derivs(beta, mu, t.fibers[i].E(j), 0)[0];
    terms[i] = t.grid.nodes[i].w * s;
  });
  return tree_sum(std::move(terms)) / (beta * nb * t.grid.area);
}

inline double density_from_table(const FiberTable& t, double beta, double mu) {
  const int nb = t.bands();
  std::vector<double> terms(t.fibers.size());
  for (std::size_t i = 0; i < t.fibers.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < nb; ++j) s += fermi_dirac(beta, mu, t.fibers[i].E(j));
    terms[i] = t.grid.nodes[i].w * s;
  }
  return tree_sum(std::move(terms)) / (nb * t.grid.area);
}

inline double invert_density_from_table(const FiberTable& t, double beta, double rho0) {
  if (!(rho0 > 0.0 && rho0 < 1.0))
    fail(errc::target_out_of_range, "rho0 must lie strictly between 0 and 1");
  double lo = t.emin - 1.0, hi = t.emax + 1.0, widen = 1.0;
  while (density_from_table(t, beta, lo) >= rho0) {
    lo -= widen;
    widen *= 2.0;
    if (widen > 1e12) fail(errc::target_out_of_range, "could not bracket rho0 from below");
  }
  widen = 1.0;
  while (density_from_table(t, beta, hi) <= rho0) {
    hi += widen;
    widen *= 2.0;
    if (widen > 1e12) fail(errc::target_out_of_range, "could not bracket rho0 from above");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200 && hi - lo > 1e-16 * (1.0 + std::abs(mid)); ++it) {
    mid = 0.5 * (lo + hi);
    (density_from_table(t, beta, mid) < rho0 ? lo : hi) = mid;
  }
  return mid;
}

}  // namespace detail

// Bulk grand-canonical pressure by Brillouin-zone quadrature of the band sum.
inline double pressure_bulk(const Model& model, int n, const ThermoState& st,
                            double quad_tol = 1e-8) {
  if (!(st.beta > 0.0)) fail(errc::config_error, "beta must be positive");
  FiberTable fine = make_fiber_table(model, n);
  double p = detail::pressure_from_table(fine, st.beta, st.z());
  if (n >= 8) {
    FiberTable coarse = make_fiber_table(model, std::max(2, n / 2));
    double pc = detail::pressure_from_table(coarse, st.beta, st.z());
    if (std::abs(p - pc) > quad_tol * (std::abs(p) + 1.0))
      fail(errc::quadrature_not_converged,
           "pressure grid-doubling change " + std::to_string(std::abs(p - pc)));
  }
  return p;
}

inline double density_bulk(const Model& model, int n, double beta, double mu,
                           double quad_tol = 1e-8) {
  if (!(beta > 0.0)) fail(errc::config_error, "beta must be positive");
  FiberTable fine = make_fiber_table(model, n);
  double rho = detail::density_from_table(fine, beta, mu);
  if (n >= 8) {
    FiberTable coarse = make_fiber_table(model, std::max(2, n / 2));
    double rc = detail::density_from_table(coarse, beta, mu);
    if (std::abs(rho - rc) > quad_tol * (std::abs(rho) + 1.0))
      fail(errc::quadrature_not_converged,
           "density grid-doubling change " + std::to_string(std::abs(rho - rc)));
  }
  return rho;
}

inline double invert_density(const Model& model, int n, double beta, double rho0) {
  FiberTable t = make_fiber_table(model, n);
  return detail::invert_density_from_table(t, beta, rho0);
}

// ---- Susceptibility by direct contour quadrature -----------------------------

struct ChiOptions {
  double contour_rel_tol = 1e-11;
  int max_contour_level = 9;
  double grid_rel_tol = 1e-4;  // grid-doubling guard
  double prefactor = 1.0;      // (e/c)^2 in chosen units
};

struct ChiResult {
  double beta = 0.0;  // 0 marks a zero-temperature result
  double rho0 = 0.0;
  double mu0 = 0.0;  // chemical potential (or Fermi energy at zero T)
  double chi = 0.0;
  double err_estimate = 0.0;
  double imag_residual = 0.0;
  std::optional<double> chi_peierls;
  std::optional<double> chi_interband;
  std::string method;
};

namespace detail {

inline void check_contour_clearance(const FiberTable& t, const ContourSpec& c) {
  double clearance = std::min({t.emin - c.delta_minus, c.delta_plus - t.emax, c.halfheight});
  if (clearance <= 1e-10)
    fail(errc::contour_touches_spectrum, "spectrum within 1e-10 of the contour");
}

inline cd chi_contour_value(const FiberTable& t, const ContourSpec& c, double mu0,
                            double prefactor) {
  check_contour_clearance(t, c);
  std::vector<cd> terms(t.fibers.size());
  parallel_for(t.fibers.size(), [&](std::size_t i) {
    terms[i] = t.grid.nodes[i].w * contour_trace_integral(t.fibers[i], c, mu0);
  });
  cd integral = tree_sum(std::move(terms));
  const int nb = t.bands();
  return prefactor * 0.25 / (nb * t.grid.area * c.beta) * integral;
}

}  // namespace detail

// Theorem-form susceptibility: nested quadrature of the contour trace formula,
// k outer (parallel), xi inner with panel doubling until converged.
inline ChiResult chi_contour(const Model& model, int n, double beta, double rho0,
                             const ChiOptions& opts = {}) {
  FiberTable fine = make_fiber_table(model, n);
  const double mu0 = detail::invert_density_from_table(fine, beta, rho0);

  cd value(0.0, 0.0);
  double contour_err = std::numeric_limits<double>::infinity();
  int level = 0;
  bool converged = false;
  for (; level <= opts.max_contour_level; ++level) {
    ContourSpec c = build_contour(beta, fine.emin, fine.emax, level);
    cd v = detail::chi_contour_value(fine, c, mu0, opts.prefactor);
    if (level > 0) {
      contour_err = std::abs(v - value);
      if (contour_err <= opts.contour_rel_tol * std::abs(v) + 1e-16) {
        value = v;
        converged = true;
        break;
      }
    }
    value = v;
  }
  if (!converged)
    fail(errc::quadrature_not_converged,
         "contour panel doubling did not converge (last change " +
             std::to_string(contour_err) + ")");

  FiberTable coarse = make_fiber_table(model, std::max(2, n / 2));
  ContourSpec c = build_contour(beta, coarse.emin, coarse.emax, level);
  cd vc = detail::chi_contour_value(coarse, c, mu0, opts.prefactor);
  double grid_err = std::abs(value - vc);
  if (grid_err > opts.grid_rel_tol * (std::abs(value) + 1e-12))
    fail(errc::quadrature_not_converged,
         "k-grid doubling change " + std::to_string(grid_err) + " exceeds tolerance");

  ChiResult res;
  res.beta = beta;
  res.rho0 = rho0;
  res.mu0 = mu0;
  res.chi = value.real();
  res.imag_residual = std::abs(value.imag());
  res.err_estimate = contour_err + grid_err;
  res.method = "contour";
  return res;
}

}  // namespace orbsus
