#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "orbsus/thermo.hpp"

namespace orbsus {

// Matrix elements of the fiber derivatives in the eigenbasis:
// pi[a]    = U^dag (d_a H) U
// sigma[s] = U^dag (d_a d_g H) U, s = 0:(1,1), 1:(1,2), 2:(2,2)
struct MatrixElements {
  std::array<MatC, 2> pi;
  std::array<MatC, 3> sigma;
};

inline MatrixElements matrix_elements(const BlochFiber& f) {
  MatrixElements me;
  for (int a = 0; a < 2; ++a) me.pi[a] = f.U.adjoint() * f.dH[a] * f.U;
  for (int s = 0; s < 3; ++s) me.sigma[s] = f.U.adjoint() * f.ddH[s] * f.U;
  return me;
}

// The three coefficient families entering the trace expansions. Indices are
// 0-based band labels; no symmetrisation is applied beyond the printed form.
inline cd coeff_C4(const MatrixElements& me, int j1, int j2, int j3, int j4) {
  const MatC& p1 = me.pi[0];
  const MatC& p2 = me.pi[1];
  return (p1(j1, j2) * p2(j2, j3) - p2(j1, j2) * p1(j2, j3)) *
         (p2(j3, j4) * p1(j4, j1) - p1(j3, j4) * p2(j4, j1));
}

inline cd coeff_C3(const MatrixElements& me, int j1, int j2, int j3) {
  const MatC& p1 = me.pi[0];
  const MatC& p2 = me.pi[1];
  return me.sigma[0](j1, j2) * p2(j2, j3) * p2(j3, j1) +
         me.sigma[2](j1, j2) * p1(j2, j3) * p1(j3, j1) -
         me.sigma[1](j1, j2) * p1(j2, j3) * p2(j3, j1) -
         me.sigma[1](j1, j2) * p2(j2, j3) * p1(j3, j1);
}

inline cd coeff_C2(const MatrixElements& me, int j1, int j2) {
  return cd(-(me.sigma[0](j1, j2) * me.sigma[2](j2, j1)).real(), 0.0) +
         me.sigma[1](j1, j2) * me.sigma[1](j2, j1);
}

inline cd coeff_C(const MatrixElements& me, std::span<const int> idx) {
  switch (idx.size()) {
    case 2: return coeff_C2(me, idx[0], idx[1]);
    case 3: return coeff_C3(me, idx[0], idx[1], idx[2]);
    case 4: return coeff_C4(me, idx[0], idx[1], idx[2], idx[3]);
    default: fail(errc::bad_arity, "coefficient arity must be 2, 3 or 4");
  }
}

// Per-band, per-order residue weights d_{j,l}(k), l = 0..3, defined by
//   (i/2pi) oint f(xi) Tr(P3+P4+P5)(k;xi) dxi = - sum_{j,l} d^l f(E_j) d_{j,l}.
struct BandWeights {
  std::vector<std::array<double, 4>> d;  // [band][l]
  double imag_residual = 0.0;
  double order4_residual = 0.0;

  int bands() const { return static_cast<int>(d.size()); }
};

namespace detail {

inline constexpr double kBinom[5][5] = {
    {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
inline constexpr double kFactorial[5] = {1, 1, 2, 6, 24};

// One rational term C / prod_g (E_{b_g} - xi)^{m_g}: exact residues of
// f(xi) * term over the contour, accumulated as coefficient vectors of
// d^l f(E). For each pole group, h(xi) = prod over the other groups; its
// derivatives follow from h' = h * S1 with S_p' = p S_{p+1}.
inline void accumulate_residues(cd C, std::span<const int> bands, std::span<const int> orders,
                                const VecR& E, std::vector<std::array<cd, 5>>& acc) {
  const int ng = static_cast<int>(bands.size());
  for (int g = 0; g < ng; ++g) {
    const int m = orders[g];
    const double Eg = E(bands[g]);
    double h[5] = {1.0, 0.0, 0.0, 0.0, 0.0};
    double S[5] = {0.0, 0.0, 0.0, 0.0, 0.0};  // S[p] = sum m' / (E'-Eg)^p
    for (int o = 0; o < ng; ++o) {
      if (o == g) continue;
      const double diff = E(bands[o]) - Eg;
      double ip = 1.0;
      for (int p = 1; p <= 4; ++p) {
        ip /= diff;
        S[p] += orders[o] * ip;
      }
      double f = 1.0;
      for (int q = 0; q < orders[o]; ++q) f /= diff;
      h[0] *= f;
    }
    for (int nlev = 0; nlev < m - 1; ++nlev) {
      double acc_h = 0.0;
      for (int r = 0; r <= nlev; ++r)
        acc_h += kBinom[nlev][r] * h[r] * kFactorial[nlev - r] * S[nlev - r + 1];
      h[nlev + 1] = acc_h;
    }
    const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
    auto& row = acc[bands[g]];
    for (int l = 0; l < m; ++l)
      row[l] += C * (sgn / kFactorial[m - 1] * kBinom[m - 1][l] * h[m - 1 - l]);
  }
}

// Collapse a tuple of band indices (first one carries pole order 2) into the
// distinct-band pole groups.
template <int N>
inline int group_tuple(const std::array<int, N>& tuple, std::array<int, N>& bands,
                       std::array<int, N>& orders) {
  int ng = 0;
  for (int pos = 0; pos < N; ++pos) {
    const int b = tuple[pos];
    const int add = (pos == 0) ? 2 : 1;
    int found = -1;
    for (int g = 0; g < ng; ++g)
      if (bands[g] == b) {
        found = g;
        break;
      }
    if (found >= 0) {
      orders[found] += add;
    } else {
      bands[ng] = b;
      orders[ng] = add;
      ++ng;
    }
  }
  return ng;
}

}  // namespace detail

// Generic residue engine: runs the three coefficient families over all index
// tuples and collects beta-independent weights. Returns nullopt when two
// eigenvalues collide within eps_deg (caller falls back to the contour path).
inline std::optional<BandWeights> residue_weights(const BlochFiber& f, double eps_deg = -1.0) {
  const int nb = f.bands();
  if (eps_deg < 0.0) eps_deg = eps_degenerate(f.E);
  for (int i = 0; i < nb; ++i)
    for (int j = i + 1; j < nb; ++j)
      if (std::abs(f.E(i) - f.E(j)) <= eps_deg) return std::nullopt;

  const MatrixElements me = matrix_elements(f);
  std::vector<std::array<cd, 5>> acc(nb);

  std::array<int, 4> bands{}, orders{};
  for (int j1 = 0; j1 < nb; ++j1)
    for (int j2 = 0; j2 < nb; ++j2)
      for (int j3 = 0; j3 < nb; ++j3) {
        for (int j4 = 0; j4 < nb; ++j4) {
          cd C = coeff_C4(me, j1, j2, j3, j4);
          if (C == cd(0.0, 0.0)) continue;
          std::array<int, 4> tuple{j1, j2, j3, j4};
          int ng = detail::group_tuple<4>(tuple, bands, orders);
          detail::accumulate_residues(C, std::span(bands.data(), ng),
                                      std::span(orders.data(), ng), f.E, acc);
        }
        cd C3 = coeff_C3(me, j1, j2, j3);
        if (C3 != cd(0.0, 0.0)) {
          std::array<int, 3> tuple{j1, j2, j3};
          std::array<int, 3> b3{}, o3{};
          int ng = detail::group_tuple<3>(tuple, b3, o3);
          detail::accumulate_residues(C3, std::span(b3.data(), ng), std::span(o3.data(), ng),
                                      f.E, acc);
        }
      }
  for (int j1 = 0; j1 < nb; ++j1)
    for (int j2 = 0; j2 < nb; ++j2) {
      cd C2 = coeff_C2(me, j1, j2);
      if (C2 == cd(0.0, 0.0)) continue;
      std::array<int, 2> tuple{j1, j2};
      std::array<int, 2> b2{}, o2{};
      int ng = detail::group_tuple<2>(tuple, b2, o2);
      detail::accumulate_residues(C2, std::span(b2.data(), ng), std::span(o2.data(), ng), f.E,
                                  acc);
    }

  BandWeights w;
  w.d.resize(nb);
  double scale = 0.0;
  for (const auto& row : acc)
    for (const cd& v : row) scale = std::max(scale, std::abs(v));
  for (int j = 0; j < nb; ++j) {
    for (int l = 0; l < 4; ++l) {
      w.d[j][l] = acc[j][l].real();
      w.imag_residual = std::max(w.imag_residual, std::abs(acc[j][l].imag()));
    }
    w.order4_residual = std::max(w.order4_residual, std::abs(acc[j][4]));
  }
  if (w.order4_residual > 1e-8 * (scale + 1.0)) return std::nullopt;
  return w;
}

// ---- Two-band closed forms ---------------------------------------------------

// u_{j,n} and v_{j,n}; index j is 0-based, m is the other band.
inline std::array<cd, 3> two_band_u(const MatrixElements& me, int j) {
  const int m = 1 - j;
  return {coeff_C2(me, j, m),
          coeff_C3(me, j, m, m) + coeff_C3(me, m, j, j) - coeff_C3(me, j, m, j) -
              coeff_C3(me, j, j, m),
          coeff_C4(me, j, m, m, m) - coeff_C4(me, m, j, j, j) - coeff_C4(me, j, j, m, m) -
              coeff_C4(me, j, m, j, m) - coeff_C4(me, j, m, m, j)};
}

inline std::array<cd, 3> two_band_v(const MatrixElements& me, int j) {
  const int m = 1 - j;
  return {cd(0.0, 0.0),
          2.0 * coeff_C3(me, j, m, m) + 2.0 * coeff_C3(me, m, j, j) - coeff_C3(me, j, m, j) -
              coeff_C3(me, j, j, m) - coeff_C3(me, m, j, m) - coeff_C3(me, m, m, j),
          2.0 * coeff_C4(me, j, m, m, m) - 2.0 * coeff_C4(me, m, j, j, j)};
}

// Closed-form weights for Card(Theta) = 2, the oracle for the generic engine.
inline std::array<cd, 4> two_band_closed_weights(const MatrixElements& me, const VecR& E,
                                                 int j) {
  const int m = 1 - j;
  const double dE = E(m) - E(j);
  std::array<cd, 4> d{};
  d[3] = (coeff_C4(me, j, j, m, j) / dE + coeff_C3(me, j, j, j)) / 6.0;
  d[2] = -0.5 * ((coeff_C4(me, j, j, m, m) + coeff_C4(me, j, m, j, m) +
                  coeff_C4(me, j, m, m, j)) /
                     (dE * dE) +
                 (coeff_C3(me, j, m, j) + coeff_C3(me, j, j, m)) / dE + coeff_C2(me, j, j));
  const auto u = two_band_u(me, j);
  const auto v = two_band_v(me, j);
  cd d1(0, 0), d0(0, 0);
  double pw = dE;
  for (int n = 0; n <= 2; ++n) {
    d1 += u[n] / pw;
    d0 += v[n] / (pw * dE);
    pw *= dE;
  }
  d[1] = d1;
  d[0] = d0;
  return d;
}

// ---- Susceptibility from the weight expansion ---------------------------------

namespace detail {

// Per-k contour integral with its own panel-doubling; used where the weight
// engine reports a degeneracy.
inline double contour_fallback_value(const BlochFiber& f, double beta, double mu0, double emin,
                                     double emax, const ChiOptions& opts) {
  cd prev(0, 0);
  for (int level = 0; level <= opts.max_contour_level; ++level) {
    ContourSpec c = build_contour(beta, emin, emax, level);
    cd v = contour_trace_integral(f, c, mu0);
    if (level > 0 && std::abs(v - prev) <= opts.contour_rel_tol * std::abs(v) + 1e-16)
      return v.real();
    prev = v;
  }
  fail(errc::quadrature_not_converged, "per-k contour fallback did not converge");
}

struct WeightedSum {
  double value = 0.0;
  double imag_residual = 0.0;
  int fallback_count = 0;
};

// sum_k w_k * [ -sum_{j,l} d^l f(E_j(k)) d_{j,l}(k) ], with fallback.
inline WeightedSum residue_ksum(const FiberTable& t, double beta, double mu0,
                                const ChiOptions& opts) {
  std::vector<double> terms(t.fibers.size());
  std::vector<double> imag(t.fibers.size(), 0.0);
  std::vector<int> fell(t.fibers.size(), 0);
  parallel_for(t.fibers.size(), [&](std::size_t i) {
    const BlochFiber& f = t.fibers[i];
    auto w = residue_weights(f);
    if (!w) {
      terms[i] = t.grid.nodes[i].w *
                 contour_fallback_value(f, beta, mu0, t.emin, t.emax, opts);
      fell[i] = 1;
      return;
    }
    double v = 0.0;
    for (int j = 0; j < f.bands(); ++j) {
      auto df = fermi_dirac_derivs(beta, mu0, f.E(j), 3);
      for (int l = 0; l <= 3; ++l) v -= df[l] * w->d[j][l];
    }
    terms[i] = t.grid.nodes[i].w * v;
    imag[i] = w->imag_residual;
  });
  WeightedSum out;
  out.value = tree_sum(std::move(terms));
  for (double r : imag) out.imag_residual = std::max(out.imag_residual, r);
  for (int c : fell) out.fallback_count += c;
  return out;
}

inline double chi_residue_from_table(const FiberTable& t, double beta, double mu0,
                                     const ChiOptions& opts, WeightedSum* info = nullptr) {
  WeightedSum s = residue_ksum(t, beta, mu0, opts);
  if (info) *info = s;
  const int nb = t.bands();
  return opts.prefactor * 0.25 / (nb * t.grid.area * beta) * s.value;
}

}  // namespace detail

// Band-expansion susceptibility: beta enters only through the Fermi factors,
// the weights are computed once per k.
inline ChiResult chi_residue(const Model& model, int n, double beta, double rho0,
                             const ChiOptions& opts = {}) {
  FiberTable fine = make_fiber_table(model, n);
  const double mu0 = detail::invert_density_from_table(fine, beta, rho0);
  detail::WeightedSum info;
  double chi = detail::chi_residue_from_table(fine, beta, mu0, opts, &info);

  FiberTable coarse = make_fiber_table(model, std::max(2, n / 2));
  double chic = detail::chi_residue_from_table(coarse, beta, mu0, opts);
  double grid_err = std::abs(chi - chic);
  if (grid_err > opts.grid_rel_tol * (std::abs(chi) + 1e-12))
    fail(errc::quadrature_not_converged,
         "k-grid doubling change " + std::to_string(grid_err) + " exceeds tolerance");

  ChiResult res;
  res.beta = beta;
  res.rho0 = rho0;
  res.mu0 = mu0;
  res.chi = chi;
  res.err_estimate = grid_err;
  res.imag_residual = info.imag_residual;
  res.method = "residue";
  return res;
}

// ---- Zero-temperature semiconducting limit -----------------------------------

namespace detail {

struct ZeroTSetup {
  int filled = 0;
  double fermi_energy = 0.0;
  double gap = 0.0;
};

inline ZeroTSetup zero_t_setup(const FiberTable& t, double rho0) {
  if (!(rho0 > 0.0 && rho0 < 1.0))
    fail(errc::target_out_of_range, "rho0 must lie strictly between 0 and 1");
  const int nb = t.bands();
  const double mf_real = rho0 * nb;
  const int mf = static_cast<int>(std::lround(mf_real));
  if (std::abs(mf_real - mf) > 1e-9)
    fail(errc::non_integer_filling,
         "rho0 * bands = " + std::to_string(mf_real) + " is not an integer");
  if (mf < 1 || mf > nb - 1)
    fail(errc::target_out_of_range, "filling must leave at least one band on each side");
  ZeroTSetup zs;
  zs.filled = mf;
  double top = -std::numeric_limits<double>::infinity();
  double bottom = std::numeric_limits<double>::infinity();
  for (const auto& f : t.fibers) {
    top = std::max(top, f.E(mf - 1));
    bottom = std::min(bottom, f.E(mf));
  }
  zs.gap = bottom - top;
  if (!(zs.gap > 0.0))
    fail(errc::not_semiconducting,
         "no spectral gap above band " + std::to_string(mf) + " on the sampled zone");
  zs.fermi_energy = 0.5 * (top + bottom);
  return zs;
}

// Weights at k, retrying once at a deterministically nudged k when bands
// collide on a grid point (measure-zero crossings).
inline std::optional<BandWeights> weights_with_nudge(const Model& model, const BlochFiber& f,
                                                     double kscale) {
  if (auto w = residue_weights(f)) return w;
  Vec2 nudged = f.k + (1e-7 * kscale) * Vec2{0.7548776662466927, 0.6558883882272147};
  BlochFiber g = model.fiber_at(nudged);
  return residue_weights(g);
}

}  // namespace detail

// Zero-temperature susceptibility in the semiconducting situation: the l=0,1
// weights of the filled bands, with the Fermi energy pinned mid-gap. For
// two-band models the u/v route is evaluated as a cross-check.
inline ChiResult chi_zero_temperature(const Model& model, int n, double rho0,
                                      const ChiOptions& opts = {}) {
  FiberTable fine = make_fiber_table(model, n);
  auto zs = detail::zero_t_setup(fine, rho0);

  auto evaluate = [&](const FiberTable& t, const detail::ZeroTSetup& setup, double* uv_diff) {
    const int nb = t.bands();
    const double kscale = std::sqrt(t.grid.area);
    std::vector<double> terms(t.fibers.size());
    std::vector<double> uv_terms(t.fibers.size(), 0.0);
    std::vector<int> unsupported(t.fibers.size(), 0);
    parallel_for(t.fibers.size(), [&](std::size_t i) {
      const BlochFiber& f = t.fibers[i];
      auto w = detail::weights_with_nudge(model, f, kscale);
      if (!w) {
        unsupported[i] = 1;
        return;
      }
      double v = 0.0;
      for (int j = 0; j < setup.filled; ++j)
        v += w->d[j][1] + (f.E(j) - setup.fermi_energy) * w->d[j][0];
      terms[i] = t.grid.nodes[i].w * v;
      if (nb == 2 && uv_diff) {
        const MatrixElements me = matrix_elements(f);
        const auto u = two_band_u(me, 0);
        const auto vv = two_band_v(me, 0);
        const double dE = f.E(1) - f.E(0);
        cd s(0, 0);
        double pw = dE;
        for (int l = 0; l <= 2; ++l) {
          s += u[l] / pw + (f.E(0) - setup.fermi_energy) * vv[l] / (pw * dE);
          pw *= dE;
        }
        uv_terms[i] = t.grid.nodes[i].w * s.real();
      }
    });
    int bad = 0;
    for (int u : unsupported) bad += u;
    if (bad > 0 && bad > static_cast<int>(t.fibers.size()) / 100)
      fail(errc::degenerate_band,
           "band degeneracies on more than 1% of the sampled zone are unsupported");
    double sum = tree_sum(std::move(terms));
    double chi = opts.prefactor * 0.25 / (nb * t.grid.area) * sum;
    if (nb == 2 && uv_diff) {
      double uv_chi = opts.prefactor * 0.125 / t.grid.area * tree_sum(std::move(uv_terms));
      *uv_diff = std::abs(chi - uv_chi);
    }
    return chi;
  };

  double uv_diff = 0.0;
  double chi = evaluate(fine, zs, &uv_diff);
  if (fine.bands() == 2 && uv_diff > 1e-9 * (std::abs(chi) + 1.0))
    fail(errc::compute_error,
         "two-band u/v evaluation disagrees with the weight expansion by " +
             std::to_string(uv_diff));

  FiberTable coarse = make_fiber_table(model, std::max(2, n / 2));
  auto zsc = detail::zero_t_setup(coarse, rho0);
  double chic = evaluate(coarse, zsc, nullptr);
  double grid_err = std::abs(chi - chic);
  if (grid_err > opts.grid_rel_tol * (std::abs(chi) + 1e-12))
    fail(errc::quadrature_not_converged,
         "k-grid doubling change " + std::to_string(grid_err) + " exceeds tolerance");

  ChiResult res;
  res.beta = 0.0;
  res.rho0 = rho0;
  res.mu0 = zs.fermi_energy;
  res.chi = chi;
  res.err_estimate = grid_err;
  res.method = "zerot";
  return res;
}

// ---- Peierls / interband decomposition ----------------------------------------

// Two-band split: the band-curvature (Peierls) term against the remainder
// carried by the coefficient functions.
inline ChiResult peierls_split(const Model& model, int n, double beta, double rho0,
                               const ChiOptions& opts = {}) {
  if (model.bands() != 2)
    fail(errc::not_two_band, "the decomposition is defined for two-band models");
  FiberTable fine = make_fiber_table(model, n);
  const double mu0 = detail::invert_density_from_table(fine, beta, rho0);

  std::vector<double> p_terms(fine.fibers.size());
  std::vector<double> ib_terms(fine.fibers.size());
  parallel_for(fine.fibers.size(), [&](std::size_t i) {
    const BlochFiber& f = fine.fibers[i];
    const MatrixElements me = matrix_elements(f);
    double pk = 0.0, ibk = 0.0;
    for (int j = 0; j < 2; ++j) {
      const int m = 1 - j;
      auto df = fermi_dirac_derivs(beta, mu0, f.E(j), 2);
      BandDerivatives bd = band_derivatives(f, j);
      pk += df[2] * (bd.h11 * bd.h22 - bd.h12 * bd.h12);

      const double dE = f.E(j) - f.E(m);
      cd quad = coeff_C4(me, j, j, m, m) + coeff_C4(me, j, m, j, m) +
                coeff_C4(me, j, m, m, j);
      cd brace = -quad / (dE * dE) +
                 cd(0.0, 1.0) * coeff_C3(me, j, m, j).imag() / dE;
      double Ij = 0.5 * brace.real();
      auto dhat = two_band_closed_weights(me, f.E, j);
      ibk += df[2] * Ij + df[0] * dhat[0].real() + df[1] * dhat[1].real();
    }
    p_terms[i] = fine.grid.nodes[i].w * pk;
    ib_terms[i] = fine.grid.nodes[i].w * ibk;
  });
  const double norm_p = -opts.prefactor / (48.0 * fine.grid.area * beta);
  const double norm_ib = -opts.prefactor / (8.0 * fine.grid.area * beta);
  double chi_p = norm_p * tree_sum(std::move(p_terms));
  double chi_ib = norm_ib * tree_sum(std::move(ib_terms));

  ChiResult res;
  res.beta = beta;
  res.rho0 = rho0;
  res.mu0 = mu0;
  res.chi = chi_p + chi_ib;
  res.chi_peierls = chi_p;
  res.chi_interband = chi_ib;
  res.method = "split";
  return res;
}

}  // namespace orbsus
