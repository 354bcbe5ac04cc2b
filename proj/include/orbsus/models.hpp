#pragma once

#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "orbsus/bloch.hpp"
#include "orbsus/quadrature.hpp"

namespace orbsus {

struct ZoneSpec {
  enum class Shape { square, disk };
  Shape shape = Shape::disk;
  double K = 5.0;

  double area() const {
    return shape == Shape::square ? 4.0 * K * K : std::numbers::pi * K * K;
  }
};

// A model given directly by closed-form matrix functions of k, integrated
// over a user-chosen truncated zone instead of a Brillouin zone.
struct AnalyticFiber {
  std::string name;
  int bands = 0;
  double gap_delta = 0.0;  // gap parameter where applicable
  std::function<MatC(Vec2)> H;
  std::function<MatC(Vec2)> dH1, dH2;
  std::function<MatC(Vec2)> ddH11, ddH12, ddH22;
  ZoneSpec zone;
};

inline BlochFiber fiber(const AnalyticFiber& a, Vec2 k) {
  BlochFiber f;
  f.k = k;
  f.H = a.H(k);
  f.dH = {a.dH1(k), a.dH2(k)};
  f.ddH = {a.ddH11(k), a.ddH12(k), a.ddH22(k)};
  diagonalize_fiber(f);
  return f;
}

// H = [[delta, k1+i k2], [k1-i k2, -delta]]; constant first derivatives,
// vanishing second derivatives.
inline AnalyticFiber dirac_gapped(double delta, ZoneSpec zone = {}) {
  if (!(delta > 0.0)) fail(errc::non_positive_gap, "dirac-l requires delta > 0");
  AnalyticFiber a;
  a.name = "dirac-l";
  a.bands = 2;
  a.gap_delta = delta;
  a.zone = zone;
  a.H = [delta](Vec2 k) {
    MatC h(2, 2);
    h << cd(delta, 0), cd(k.x, k.y), cd(k.x, -k.y), cd(-delta, 0);
    return h;
  };
  a.dH1 = [](Vec2) {
    MatC h(2, 2);
    h << cd(0, 0), cd(1, 0), cd(1, 0), cd(0, 0);
    return h;
  };
  a.dH2 = [](Vec2) {
    MatC h(2, 2);
    h << cd(0, 0), cd(0, 1), cd(0, -1), cd(0, 0);
    return h;
  };
  auto zero = [](Vec2) { return MatC::Zero(2, 2).eval(); };
  a.ddH11 = zero;
  a.ddH12 = zero;
  a.ddH22 = zero;
  return a;
}

// H = diag(-s, s) with s = sqrt(delta^2 + |k|^2); same dispersion as dirac-l
// but with no off-diagonal structure at all.
inline AnalyticFiber dirac_diagonal(double delta, ZoneSpec zone = {}) {
  if (!(delta > 0.0)) fail(errc::non_positive_gap, "dirac-d requires delta > 0");
  AnalyticFiber a;
  a.name = "dirac-d";
  a.bands = 2;
  a.gap_delta = delta;
  a.zone = zone;
  auto diag = [](double lo, double hi) {
    MatC h = MatC::Zero(2, 2);
    h(0, 0) = lo;
    h(1, 1) = hi;
    return h;
  };
  a.H = [delta, diag](Vec2 k) {
    double s = std::sqrt(delta * delta + norm2(k));
    return diag(-s, s);
  };
  auto first = [delta, diag](Vec2 k, int axis) {
    double s = std::sqrt(delta * delta + norm2(k));
    double g = (axis == 0 ? k.x : k.y) / s;
    return diag(-g, g);
  };
  a.dH1 = [first](Vec2 k) { return first(k, 0); };
  a.dH2 = [first](Vec2 k) { return first(k, 1); };
  auto second = [delta, diag](Vec2 k, int a1, int a2) {
    double s = std::sqrt(delta * delta + norm2(k));
    double ka = a1 == 0 ? k.x : k.y;
    double kg = a2 == 0 ? k.x : k.y;
    double g = (a1 == a2 ? 1.0 / s : 0.0) - ka * kg / (s * s * s);
    return diag(-g, g);
  };
  a.ddH11 = [second](Vec2 k) { return second(k, 0, 0); };
  a.ddH12 = [second](Vec2 k) { return second(k, 0, 1); };
  a.ddH22 = [second](Vec2 k) { return second(k, 1, 1); };
  return a;
}

// Two-site honeycomb with three nearest-neighbour bonds of amplitude t and an
// optional staggered on-site term (+/- gap/2) opening a gap at the corners.
inline LatticeModel honeycomb(double t, double onsite_gap = 0.0, double a = 1.0) {
  if (t == 0.0) fail(errc::config_error, "honeycomb requires t != 0");
  ModelInput in;
  const double s3 = std::sqrt(3.0);
  in.a1 = {1.5 * a, 0.5 * s3 * a};
  in.a2 = {1.5 * a, -0.5 * s3 * a};
  in.basis = {{0.0, 0.0}, {a, 0.0}};
  in.cutoff = 1.25 * a;
  in.hops = {
      {0, 1, {0, 0}, cd(t, 0)},
      {0, 1, {1, 0}, cd(t, 0)},
      {0, 1, {0, 1}, cd(t, 0)},
  };
  if (onsite_gap != 0.0) {
    in.hops.push_back({0, 0, {0, 0}, cd(0.5 * onsite_gap, 0)});
    in.hops.push_back({1, 1, {0, 0}, cd(-0.5 * onsite_gap, 0)});
  }
  return build_model(in);
}

struct KGrid {
  std::vector<KNode> nodes;
  double area = 0.0;
  bool periodic = false;  // true for Brillouin-zone trapezoid grids
};

inline KGrid zone_grid_square(double K, int n) {
  if (n < 1) fail(errc::config_error, "grid order must be >= 1");
  GaussRule g = gauss_legendre(n);
  KGrid grid;
  grid.area = 4.0 * K * K;
  grid.nodes.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      grid.nodes.push_back({{K * g.x[i], K * g.x[j]}, K * g.w[i] * K * g.w[j]});
  return grid;
}

// Radial-angular rule: uniform midpoint angles, composite Gauss-Legendre over
// geometrically shrinking radial panels so integrands peaked near k=0 (small
// gaps) stay resolved at any grid order.
inline KGrid zone_grid_disk(double K, int n) {
  if (n < 1) fail(errc::config_error, "grid order must be >= 1");
  constexpr int panels = 24;
  const int order = std::max(6, n / 8);
  const int ntheta = std::max(4, n);
  GaussRule g = gauss_legendre(order);
  std::vector<std::pair<double, double>> radial;  // (r, w_r) with w_r for dr
  double hi = K;
  for (int p = 0; p < panels; ++p) {
    double lo = (p == panels - 1) ? 0.0 : hi * 0.5;
    double c = 0.5 * (hi + lo), h = 0.5 * (hi - lo);
    for (int i = 0; i < order; ++i) radial.push_back({c + h * g.x[i], h * g.w[i]});
    hi = lo;
  }
  KGrid grid;
  grid.area = std::numbers::pi * K * K;
  grid.nodes.reserve(radial.size() * ntheta);
  const double dtheta = 2.0 * std::numbers::pi / ntheta;
  for (int j = 0; j < ntheta; ++j) {
    double theta = (j + 0.5) * dtheta;
    double ct = std::cos(theta), st = std::sin(theta);
    for (auto [r, wr] : radial)
      grid.nodes.push_back({{r * ct, r * st}, wr * r * dtheta});
  }
  return grid;
}

inline KGrid zone_grid(const ZoneSpec& z, int n) {
  return z.shape == ZoneSpec::Shape::square ? zone_grid_square(z.K, n)
                                            : zone_grid_disk(z.K, n);
}

// Either kind of model behind one sampling interface.
class Model {
 public:
  Model(LatticeModel m) : kind_(std::move(m)) {}
  Model(AnalyticFiber a) : kind_(std::move(a)) {}

  bool is_lattice() const { return std::holds_alternative<LatticeModel>(kind_); }
  const LatticeModel& lattice() const { return std::get<LatticeModel>(kind_); }
  const AnalyticFiber& analytic() const { return std::get<AnalyticFiber>(kind_); }

  int bands() const {
    return is_lattice() ? lattice().bands() : analytic().bands;
  }

  BlochFiber fiber_at(Vec2 k) const {
    return is_lattice() ? fiber(lattice(), k) : fiber(analytic(), k);
  }

  KGrid kgrid(int n) const {
    if (is_lattice()) {
      ReciprocalCell rc = reciprocal(lattice(), n);
      return KGrid{std::move(rc.grid), rc.area, true};
    }
    return zone_grid(analytic().zone, n);
  }

  std::string name() const {
    return is_lattice() ? std::string("lattice") : analytic().name;
  }

 private:
  std::variant<LatticeModel, AnalyticFiber> kind_;
};

// ---- Change-of-basis demonstration for the two Dirac fibers ----------------

struct ChangeOfBasisReport {
  MatC P, Pinv;
  double similarity_residual = 0.0;   // ||P H_d P^{-1} - H_l||
  cd trace_P5_diag_conjugated{0, 0};  // Tr(P P5_d P^{-1}), identically zero
  cd trace_W5{0, 0};                  // Tr(P5_l - P P5_d P^{-1})
  cd trace_P5_closed{0, 0};           // 2*xi*4*(delta^2-xi^2)/(d^4)
};

namespace detail {
// P5 assembled literally from the printed product of five resolvents.
inline MatC calc_P5(const MatC& R, const MatC& d1, const MatC& d2) {
  MatC A = d1 * R * d2 - d2 * R * d1;
  MatC B = d2 * R * d1 - d1 * R * d2;
  return R * A * R * B * R;
}
inline MatC calc_P4(const MatC& R, const MatC& d1, const MatC& d2, const MatC& s11,
                    const MatC& s12, const MatC& s22) {
  MatC inner = s11 * R * d2 * R * d2 - s12 * R * (d1 * R * d2 + d2 * R * d1) +
               s22 * R * d1 * R * d1;
  return R * inner * R;
}
inline MatC calc_P3(const MatC& R, const MatC& s11, const MatC& s12, const MatC& s22) {
  MatC inner = 0.5 * s11 * R * s22 + 0.5 * s22 * R * s11 - s12 * R * s12;
  return -(R * inner * R);
}
}  // namespace detail

inline ChangeOfBasisReport change_of_basis_demo(double delta, Vec2 k, cd xi = cd(0, 1)) {
  if (!(delta > 0.0)) fail(errc::non_positive_gap, "demo requires delta > 0");
  if (norm(k) <= 1e-10 * (1.0 + delta))
    fail(errc::singular_basis, "change-of-basis matrix is singular at k = 0");
  const double s = std::sqrt(delta * delta + norm2(k));
  const cd w(k.x, k.y);

  ChangeOfBasisReport rep;
  rep.P = MatC(2, 2);
  rep.P << -w / (delta + s), -w / (delta - s), cd(1, 0), cd(1, 0);
  rep.Pinv = MatC(2, 2);
  rep.Pinv << -std::conj(w) / (2 * s), (delta + s) / (2 * s),
      std::conj(w) / (2 * s), (s - delta) / (2 * s);

  AnalyticFiber al = dirac_gapped(delta);
  AnalyticFiber ad = dirac_diagonal(delta);
  MatC Hl = al.H(k), Hd = ad.H(k);
  rep.similarity_residual = (rep.P * Hd * rep.Pinv - Hl).norm();

  const double E1 = -s, E2 = s;
  if (std::min(std::abs(cd(E1, 0) - xi), std::abs(cd(E2, 0) - xi)) <= 1e-13 * (2 * s + 1))
    fail(errc::on_spectrum, "xi sits on the common spectrum");
  MatC Rl = (Hl - xi * MatC::Identity(2, 2)).inverse();
  MatC Rd = (Hd - xi * MatC::Identity(2, 2)).inverse();

  MatC P5l = detail::calc_P5(Rl, al.dH1(k), al.dH2(k));
  MatC P5d = detail::calc_P5(Rd, ad.dH1(k), ad.dH2(k));
  MatC conjugated = rep.P * P5d * rep.Pinv;
  rep.trace_P5_diag_conjugated = conjugated.trace();
  rep.trace_W5 = (P5l - conjugated).trace();
  rep.trace_P5_closed = 8.0 * xi * (delta * delta - xi * xi) /
                        (std::pow(cd(E1, 0) - xi, 4) * std::pow(cd(E2, 0) - xi, 4));
  return rep;
}

// ---- Registry ---------------------------------------------------------------

struct RegistryParams {
  double delta = 1.0;
  double t = 1.0;
  double onsite_gap = 0.6;
  double a = 1.0;
  std::optional<ZoneSpec> zone;
};

inline Model model_from_registry(const std::string& name, const RegistryParams& p = {}) {
  ZoneSpec zone = p.zone.value_or(ZoneSpec{});
  if (name == "dirac-l") return Model(dirac_gapped(p.delta, zone));
  if (name == "dirac-d") return Model(dirac_diagonal(p.delta, zone));
  if (name == "honeycomb") return Model(honeycomb(p.t, p.onsite_gap, p.a));
  fail(errc::config_error, "unknown model '" + name + "' (expected dirac-l, dirac-d or honeycomb)");
}

}  // namespace orbsus
