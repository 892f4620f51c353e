#pragma once

#include "pvem/quadrature.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace pvem {

/// Number of monomials of total degree <= k in two variables.
inline int poly_dim(int k) { return k < 0 ? 0 : (k + 1) * (k + 2) / 2; }

/// Exponents of the idx-th monomial in graded lexicographic order:
/// 1, x, y, x^2, xy, y^2, ...
inline std::pair<int, int> monomial_exponent(int idx) {
  int d = 0;
  while (poly_dim(d) <= idx) ++d;
  const int j = idx - poly_dim(d - 1);
  return {d - j, j};
}

inline int monomial_index(int a, int b) { return poly_dim(a + b - 1) + b; }

/// Scaled monomials m_a(x) = ((x - c)/h)^a on a cell.
struct ScaledMonomials {
  Vec2 c = Vec2::Zero();
  double h = 1.0;
  int k = 0;

  ScaledMonomials() = default;
  ScaledMonomials(const Vec2& center, double diam, int degree) : c(center), h(diam), k(degree) {}

  int size() const { return poly_dim(k); }

  Vec eval(const Vec2& x) const { return eval_upto(x, k); }

  Vec eval_upto(const Vec2& x, int deg) const {
    const double s = (x.x() - c.x()) / h, t = (x.y() - c.y()) / h;
    Vec v(poly_dim(deg));
    double sp[8], tp[8];
    sp[0] = tp[0] = 1.0;
    for (int i = 1; i <= deg; ++i) {
      sp[i] = sp[i - 1] * s;
      tp[i] = tp[i - 1] * t;
    }
    for (int i = 0; i < v.size(); ++i) {
      const auto [a, b] = monomial_exponent(i);
      v[i] = sp[a] * tp[b];
    }
    return v;
  }

  /// Gradients, one row per monomial.
  Eigen::MatrixX2d grad(const Vec2& x) const {
    const double s = (x.x() - c.x()) / h, t = (x.y() - c.y()) / h;
    Eigen::MatrixX2d g(size(), 2);
    for (int i = 0; i < size(); ++i) {
      const auto [a, b] = monomial_exponent(i);
      g(i, 0) = a > 0 ? a * std::pow(s, a - 1) * std::pow(t, b) / h : 0.0;
      g(i, 1) = b > 0 ? b * std::pow(s, a) * std::pow(t, b - 1) / h : 0.0;
    }
    return g;
  }

  /// Hessian entries (xx, xy, yy), one row per monomial.
  Eigen::MatrixX3d hessian(const Vec2& x) const {
    const double s = (x.x() - c.x()) / h, t = (x.y() - c.y()) / h;
    Eigen::MatrixX3d H(size(), 3);
    const double h2 = h * h;
    auto pw = [](double v, int e) { return e < 0 ? 0.0 : std::pow(v, e); };
    for (int i = 0; i < size(); ++i) {
      const auto [a, b] = monomial_exponent(i);
      H(i, 0) = a * (a - 1) * pw(s, a - 2) * pw(t, b) / h2;
      H(i, 1) = a * b * pw(s, a - 1) * pw(t, b - 1) / h2;
      H(i, 2) = b * (b - 1) * pw(s, a) * pw(t, b - 2) / h2;
    }
    return H;
  }
};

/// Mass matrix of the scaled monomials up to degree k under a quadrature rule.
inline Mat monomial_mass(const ScaledMonomials& m, const QuadratureRule& q) {
  const int n = m.size();
  Mat H = Mat::Zero(n, n);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Vec v = m.eval(q.x[i]);
    H.noalias() += q.w[i] * v * v.transpose();
  }
  return H;
}

/// L2 projection of f onto P_l on one cell. Returns coefficients in the scaled basis.
inline Vec l2_project_poly(const std::function<double(const Vec2&)>& f, const std::vector<Vec2>& cell,
                           int l) {
  const ScaledMonomials m(centroid(cell), diameter(cell), l);
  const QuadratureRule q = polygon_quadrature(cell, 2 * l + 2);
  Vec rhs = Vec::Zero(m.size());
  for (std::size_t i = 0; i < q.size(); ++i) rhs += q.w[i] * f(q.x[i]) * m.eval(q.x[i]);
  const Mat H = monomial_mass(m, q);
  return H.ldlt().solve(rhs);
}

/// Broken polynomial field: per-cell coefficients in each cell's scaled basis.
struct PiecewisePolynomial {
  int degree = 0;
  std::vector<ScaledMonomials> basis;
  std::vector<Vec> coef;

  double eval(int cell, const Vec2& x) const {
    const auto& b = basis[cell];
    return b.eval_upto(x, degree).dot(coef[cell].head(poly_dim(degree)));
  }
};

/// Change of basis: coefficients of a polynomial given in basis `from` re-expressed in `to`
/// (same degree). Exact for polynomials; solved by collocation on a unisolvent grid.
inline Vec rebase(const ScaledMonomials& from, const Vec& coef, const ScaledMonomials& to) {
  const int n = to.size();
  const int k = to.k;
  Mat A(n, n);
  Vec b(n);
  int row = 0;
  for (int i = 0; i <= k; ++i)
    for (int j = 0; j <= k - i; ++j) {
      const Vec2 x = to.c + to.h * Vec2(double(i) / std::max(1, k) - 0.5, double(j) / std::max(1, k) - 0.5);
      A.row(row) = to.eval(x).transpose();
      b[row] = from.eval(x).head(coef.size()).dot(coef);
      ++row;
    }
  return A.lu().solve(b);
}

}  // namespace pvem
