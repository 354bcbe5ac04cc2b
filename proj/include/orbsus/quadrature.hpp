#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace orbsus {

struct GaussRule {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

// Gauss-Legendre rule by Newton iteration on the Legendre recurrence.
inline GaussRule gauss_legendre(int n) {
  GaussRule rule;
  rule.x.resize(n);
  rule.w.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.x[i] = -x;
    rule.w[i] = w;
    rule.x[n - 1 - i] = x;
    rule.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.x[n / 2] = 0.0;
  return rule;
}

// Pairwise tree sum; the reduction order depends only on the slot order, not
// on how the values were produced.
template <class T>
T tree_sum(std::vector<T> v) {
  if (v.empty()) return T{};
  std::size_t n = v.size();
  while (n > 1) {
    std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < n / 2; ++i) v[i] = v[2 * i] + v[2 * i + 1];
    if (n % 2 == 1) v[n / 2] = v[n - 1];
    n = m;
  }
  return v[0];
}

}  // namespace orbsus
