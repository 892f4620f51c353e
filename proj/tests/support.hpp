#pragma once

// Helpers shared by the test executables: random polygons and integrals of
// monomials computed independently of the library quadrature.

#include "pvem/experiment.hpp"

#include <random>

namespace testing_support {

using pvem::Vec2;

/// Star-shaped polygon with n vertices inside the unit square, CCW.
inline std::vector<Vec2> random_polygon(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> ang(n);
  for (;;) {
    for (auto& a : ang) a = 2 * pvem::kPi * U(rng);
    std::sort(ang.begin(), ang.end());
    double gap = 2 * pvem::kPi - ang.back() + ang.front();
    for (int i = 1; i < n; ++i) gap = std::max(gap, ang[i] - ang[i - 1]);
    if (gap < 0.9 * pvem::kPi) break;  // keeps the centre inside the kernel
  }
  const Vec2 c(0.3 + 0.4 * U(rng), 0.3 + 0.4 * U(rng));
  std::vector<Vec2> p;
  for (double a : ang) {
    const double r = 0.12 + 0.13 * U(rng);
    p.push_back(c + r * Vec2(std::cos(a), std::sin(a)));
  }
  return p;
}

inline pvem::PolyMesh single_cell_mesh(const std::vector<Vec2>& p) {
  std::vector<int> cell(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) cell[i] = int(i);
  return pvem::mesh_from_polygons(p, {cell});
}

/// Raw monomial x^a y^b.
inline double mono(int a, int b, const Vec2& x) { return std::pow(x.x(), a) * std::pow(x.y(), b); }

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline void legendre_rule(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(pvem::kPi * (i + 0.75) / (n + 0.5)), dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = z;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2 * j - 1) * z * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2 / ((1 - z * z) * dp * dp);
  }
}

/// int_P x^a y^b by the divergence theorem, int x^a y^b = oint x^{a+1} y^b / (a+1) n_x ds,
/// with a 12-point Gauss rule on each side.
inline double integrate_monomial(const std::vector<Vec2>& p, int a, int b) {
  static std::vector<double> gx, gw;
  if (gx.empty()) legendre_rule(12, gx, gw);
  double s = 0;
  const int n = int(p.size());
  for (int i = 0; i < n; ++i) {
    const Vec2 A = p[i], B = p[(i + 1) % n];
    const double dy = B.y() - A.y();  // n_x ds
    for (std::size_t j = 0; j < gx.size(); ++j) {
      const Vec2 x = A + 0.5 * (1 + gx[j]) * (B - A);
      s += 0.5 * gw[j] * mono(a + 1, b, x) / (a + 1) * dy;
    }
  }
  return s;
}

/// Polynomial in raw monomials: coefficients for exponents (a, b) with a + b <= k.
struct RawPoly {
  int k = 1;
  std::vector<std::tuple<int, int, double>> terms;

  static RawPoly random(std::mt19937& rng, int k) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    RawPoly p;
    p.k = k;
    for (int d = 0; d <= k; ++d)
      for (int b = 0; b <= d; ++b) p.terms.emplace_back(d - b, b, U(rng));
    return p;
  }
  double operator()(const Vec2& x) const {
    double s = 0;
    for (auto [a, b, c] : terms) s += c * mono(a, b, x);
    return s;
  }
  Vec2 grad(const Vec2& x) const {
    Vec2 g(0, 0);
    for (auto [a, b, c] : terms) {
      if (a > 0) g.x() += c * a * mono(a - 1, b, x);
      if (b > 0) g.y() += c * b * mono(a, b - 1, x);
    }
    return g;
  }
  /// Product with another polynomial, as a list of raw terms.
  std::vector<std::tuple<int, int, double>> times(const RawPoly& q) const {
    std::vector<std::tuple<int, int, double>> out;
    for (auto [a, b, c] : terms)
      for (auto [a2, b2, c2] : q.terms) out.emplace_back(a + a2, b + b2, c * c2);
    return out;
  }
  /// grad p . grad q as raw terms.
  std::vector<std::tuple<int, int, double>> grad_dot(const RawPoly& q) const {
    std::vector<std::tuple<int, int, double>> out;
    for (auto [a, b, c] : terms)
      for (auto [a2, b2, c2] : q.terms) {
        if (a > 0 && a2 > 0) out.emplace_back(a + a2 - 2, b + b2, c * c2 * a * a2);
        if (b > 0 && b2 > 0) out.emplace_back(a + a2, b + b2 - 2, c * c2 * b * b2);
      }
    return out;
  }
};

inline double integrate_terms(const std::vector<Vec2>& p, const std::vector<std::tuple<int, int, double>>& t) {
  double s = 0;
  for (auto [a, b, c] : t) s += c * integrate_monomial(p, a, b);
  return s;
}

}  // namespace testing_support
