#pragma once

// Test-only oracles, kept independent of the library's evaluation paths:
// resolvents by direct LU inversion and the trace products written out
// literally.

#include <random>

#include "orbsus/residue.hpp"

namespace oracle {

using orbsus::BlochFiber;
using orbsus::cd;
using orbsus::MatC;
using orbsus::Vec2;

inline MatC invert(const MatC& H, cd xi) {
  const int n = static_cast<int>(H.rows());
  return (H - xi * MatC::Identity(n, n)).fullPivLu().inverse();
}

inline cd trace_P5(const MatC& R, const MatC& d1, const MatC& d2) {
  MatC left = d1 * R * d2 - d2 * R * d1;
  MatC right = d2 * R * d1 - d1 * R * d2;
  return (R * left * R * right * R).trace();
}

inline cd trace_P4(const MatC& R, const MatC& d1, const MatC& d2, const MatC& s11,
                   const MatC& s12, const MatC& s22) {
  MatC inner = s11 * R * d2 * R * d2 - s12 * R * (d1 * R * d2 + d2 * R * d1) +
               s22 * R * d1 * R * d1;
  return (R * inner * R).trace();
}

inline cd trace_P3(const MatC& R, const MatC& s11, const MatC& s12, const MatC& s22) {
  MatC inner = 0.5 * s11 * R * s22 + 0.5 * s22 * R * s11 - s12 * R * s12;
  return -(R * inner * R).trace();
}

inline cd trace_P_sum(const BlochFiber& f, cd xi) {
  MatC R = invert(f.H, xi);
  return trace_P3(R, f.ddH[0], f.ddH[1], f.ddH[2]) +
         trace_P4(R, f.dH[0], f.dH[1], f.ddH[0], f.ddH[1], f.ddH[2]) +
         trace_P5(R, f.dH[0], f.dH[1]);
}

inline Vec2 random_k(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng)};
}

inline MatC random_hermitian(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  MatC a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = cd(u(rng), u(rng));
  return 0.5 * (a + a.adjoint()).eval();
}

// Analytic multi-band fiber with quadratic k-dependence; exercises the
// residue engine beyond two bands with exactly consistent derivatives.
inline orbsus::AnalyticFiber quadratic_fiber(int bands, unsigned seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  MatC a0 = random_hermitian(rng, bands, 2.0 * scale);
  MatC a1 = random_hermitian(rng, bands, scale);
  MatC a2 = random_hermitian(rng, bands, scale);
  MatC q11 = random_hermitian(rng, bands, 0.5 * scale);
  MatC q12 = random_hermitian(rng, bands, 0.5 * scale);
  MatC q22 = random_hermitian(rng, bands, 0.5 * scale);
  orbsus::AnalyticFiber f;
  f.name = "quadratic-test";
  f.bands = bands;
  f.zone = {orbsus::ZoneSpec::Shape::square, 2.0};
  f.H = [=](Vec2 k) {
    return (a0 + k.x * a1 + k.y * a2 + 0.5 * k.x * k.x * q11 + k.x * k.y * q12 +
            0.5 * k.y * k.y * q22)
        .eval();
  };
  f.dH1 = [=](Vec2 k) { return (a1 + k.x * q11 + k.y * q12).eval(); };
  f.dH2 = [=](Vec2 k) { return (a2 + k.x * q12 + k.y * q22).eval(); };
  f.ddH11 = [=](Vec2) { return q11; };
  f.ddH12 = [=](Vec2) { return q12; };
  f.ddH22 = [=](Vec2) { return q22; };
  return f;
}

// Flat two-band model: on-site +/- delta on a square lattice, no hopping.
inline orbsus::LatticeModel flat_two_band(double delta) {
  orbsus::ModelInput in;
  in.a1 = {1.0, 0.0};
  in.a2 = {0.0, 1.0};
  in.basis = {{0.0, 0.0}, {0.5, 0.5}};
  in.cutoff = 0.8;
  in.hops = {{0, 0, {0, 0}, cd(delta, 0)}, {1, 1, {0, 0}, cd(-delta, 0)}};
  return orbsus::build_model(in);
}

}  // namespace oracle
