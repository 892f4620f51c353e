#pragma once

#include "pvem/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <mutex>
#include <vector>

namespace pvem {

struct Rule1D {
  std::vector<double> x;  // nodes on [0,1]
  std::vector<double> w;  // weights summing to 1
};

/// n-point Gauss-Legendre rule on [0,1] (Golub-Welsch).
inline Rule1D make_gauss_legendre(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Rule1D r;
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    r.x.push_back(0.5 * (es.eigenvalues()(i) + 1.0));
    r.w.push_back(v0 * v0);
  }
  return r;
}

inline const Rule1D& gauss_legendre(int n) {
  static std::vector<Rule1D> table;
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  if (table.empty())
    for (int i = 1; i <= 40; ++i) table.push_back(make_gauss_legendre(i));
  if (n < 1 || n > 40) throw Error("gauss_legendre: unsupported point count");
  return table[n - 1];
}

struct QuadratureRule {
  std::vector<Vec2> x;
  std::vector<double> w;
  int degree = 0;
  double sum() const {
    double s = 0;
    for (double v : w) s += v;
    return s;
  }
  std::size_t size() const { return w.size(); }
};

/// Collapsed Gauss rule on triangle (a,b,c) exact for total degree `degree`.
inline void append_triangle_rule(QuadratureRule& q, const Vec2& a, const Vec2& b, const Vec2& c,
                                 int degree) {
  const int n = std::max(1, (degree + 3) / 2);
  const Rule1D& g = gauss_legendre(n);
  const double area2 = cross(b - a, c - a);  // twice the signed area
  for (int j = 0; j < n; ++j) {
    const double v = g.x[j];
    for (int i = 0; i < n; ++i) {
      const double u = g.x[i] * (1.0 - v);
      q.x.push_back(a + u * (b - a) + v * (c - a));
      q.w.push_back(area2 * g.w[i] * g.w[j] * (1.0 - v));
    }
  }
}

/// Fan sub-triangulation quadrature on a simple polygon, exact up to `degree`.
/// The fan centre is the centroid when it sees every side, else a kernel point.
inline QuadratureRule polygon_quadrature(const std::vector<Vec2>& p, int degree) {
  if (degree < 0) throw Error("polygon_quadrature: negative degree");
  const double area = signed_area(p);
  const double h = diameter(p);
  if (!(std::abs(area) >= 1e-14 * h * h) || p.size() < 3) throw Error("DegenerateCell");
  Vec2 c = centroid(p);
  bool ok = true;
  for (std::size_t i = 0; i < p.size() && ok; ++i)
    ok = cross(p[(i + 1) % p.size()] - p[i], c - p[i]) > 0;
  if (!ok) {
    Vec2 kc;
    if (kernel_point(p, kc)) c = kc;
  }
  QuadratureRule q;
  q.degree = degree;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2& a = p[i];
    const Vec2& b = p[(i + 1) % p.size()];
    if (std::abs(cross(a - c, b - c)) <= 1e-15 * h * h) continue;
    append_triangle_rule(q, c, a, b, degree);
  }
  return q;
}

/// Gauss rule on the segment [a,b]; weights carry the length.
inline QuadratureRule segment_quadrature(const Vec2& a, const Vec2& b, int degree) {
  const int n = std::max(1, (degree + 2) / 2);
  const Rule1D& g = gauss_legendre(n);
  const double len = (b - a).norm();
  QuadratureRule q;
  q.degree = degree;
  for (int i = 0; i < n; ++i) {
    q.x.push_back(a + g.x[i] * (b - a));
    q.w.push_back(len * g.w[i]);
  }
  return q;
}

}  // namespace pvem
