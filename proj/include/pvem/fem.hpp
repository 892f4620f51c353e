#pragma once

#include "pvem/space.hpp"

#include <array>

namespace pvem {

/// Radial compression of the unit square towards a ring of radius r0 about the
/// origin. The map fixes the boundary and the identity is amplitude 0.
struct WarpMap {
  double amplitude = 0.4;  // a(t) = amplitude / (1 + t)
  double r0 = 0.15;
  double delta = 0.12;

  double a(double t) const { return amplitude / (1.0 + t); }

  double radial(double r, double t) const {
    const double s = (r - r0) / delta;
    if (s <= 0.0 || s >= 1.0) return r;
    return r - a(t) * delta * (std::sin(kPi * s) / kPi + std::sin(2 * kPi * s) / (2 * kPi));
  }

  Vec2 operator()(const Vec2& xi, double t) const {
    const double r = xi.norm();
    if (r == 0.0 || amplitude == 0.0) return xi;
    return xi * (radial(r, t) / r);
  }
};

namespace detail {

struct Q1Point {
  std::array<double, 4> N;
  std::array<Vec2, 4> dN;  // reference derivatives
};

inline Q1Point q1_shape(double s, double t) {
  Q1Point p;
  p.N = {(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t};
  p.dN = {Vec2(-(1 - t), -(1 - s)), Vec2(1 - t, -s), Vec2(t, s), Vec2(-t, 1 - s)};
  return p;
}

}  // namespace detail

/// Nodal coordinates of the n x n primitive grid warped at time t.
inline std::vector<Vec2> warp_nodes(const WarpMap& w, int n, double t) {
  std::vector<Vec2> x;
  x.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) x.push_back(w(Vec2(double(i) / n, double(j) / n), t));
  return x;
}

/// Quadrilateral mesh with the primitive topology and warped coordinates.
inline PolyMesh warp_mesh(const WarpMap& w, int n, double t) {
  PolyMesh m;
  m.vertices = warp_nodes(w, n, t);
  for (std::size_t v = 0; v < m.vertices.size(); ++v) m.vkey.push_back(long(v));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int v = j * (n + 1) + i;
      m.cells.push_back({v, v + 1, v + n + 2, v + n + 1});
      m.node.push_back(j * n + i);
    }
  m.finalize();
  return m;
}

class FemSpace;

/// Bilinear finite element functions evaluated through the inverse isoparametric map.
class FemView final : public FieldView {
 public:
  FemView(const FemSpace& s, Vec u) : s_(s), u_(std::move(u)) {}
  double value(int c, const Vec2& x) const override;
  Vec2 grad(int c, const Vec2& x) const override;
  Eigen::Vector3d hess(int c, const Vec2& x) const override;

 private:
  const FemSpace& s_;
  Vec u_;
};

/// Conforming Q1 space on a warped square grid.
class FemSpace final : public DiscreteSpace {
 public:
  std::shared_ptr<const PolyMesh> mesh;
  int n = 1;
  double time = 0.0;
  std::vector<QuadratureRule> quad;  // 3x3 Gauss mapped per cell

  FemSpace(int nn, const WarpMap& w, double t, const ProblemData& p) : n(nn), time(t) {
    prob = &p;
    mesh = std::make_shared<PolyMesh>(warp_mesh(w, n, t));
    const PolyMesh& pm = *mesh;
    ndofs = pm.num_vertices();
    boundary.assign(ndofs, 0);
    for (int v = 0; v < ndofs; ++v) boundary[v] = pm.vertex_on_boundary[v];
    setup_dofs();
    const Rule1D& g = gauss_legendre(3);
    std::vector<Eigen::Triplet<double>> tm, ta;
    quad.resize(pm.num_cells());
    for (int c = 0; c < pm.num_cells(); ++c) {
      const auto& cv = pm.cells[c];
      Eigen::Matrix4d Mc = Eigen::Matrix4d::Zero(), Ac = Eigen::Matrix4d::Zero();
      for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 3; ++a) {
          const Vec2 xi(g.x[a], g.x[b]);
          const Mat2 J = jacobian(c, xi);
          const double det = J.determinant();
          if (!(det > 0)) throw Error("FoldedElement");
          const double wq = g.w[a] * g.w[b] * det;
          const auto sh = detail::q1_shape(xi.x(), xi.y());
          const Vec2 x = map(c, xi);
          quad[c].x.push_back(x);
          quad[c].w.push_back(wq);
          const Mat2 Jit = J.inverse().transpose();
          std::array<Vec2, 4> gr;
          for (int k = 0; k < 4; ++k) gr[k] = Jit * sh.dN[k];
          const Mat2 D = p.D(x);
          const double r = p.r(x);
          for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
              Mc(i, j) += wq * sh.N[i] * sh.N[j];
              Ac(i, j) += wq * (gr[i].dot(D * gr[j]) + r * sh.N[i] * sh.N[j]);
            }
        }
      quad[c].degree = 5;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          tm.emplace_back(cv[i], cv[j], Mc(i, j));
          ta.emplace_back(cv[i], cv[j], Ac(i, j));
        }
    }
    M.resize(ndofs, ndofs);
    A.resize(ndofs, ndofs);
    M.setFromTriplets(tm.begin(), tm.end());
    A.setFromTriplets(ta.begin(), ta.end());
    finish_forms();
  }

  const PolyMesh& poly_mesh() const override { return *mesh; }
  bool is_vem() const override { return false; }
  int degree() const override { return 1; }

  const Vec2& node(int c, int i) const { return mesh->vertices[mesh->cells[c][i]]; }

  Vec2 map(int c, const Vec2& xi) const {
    const auto sh = detail::q1_shape(xi.x(), xi.y());
    Vec2 x = Vec2::Zero();
    for (int k = 0; k < 4; ++k) x += sh.N[k] * node(c, k);
    return x;
  }

  Mat2 jacobian(int c, const Vec2& xi) const {
    const auto sh = detail::q1_shape(xi.x(), xi.y());
    Mat2 J = Mat2::Zero();
    for (int k = 0; k < 4; ++k) J += node(c, k) * sh.dN[k].transpose();
    return J;
  }

  /// Reference coordinates of x in cell c by Newton iteration.
  Vec2 inverse_map(int c, const Vec2& x) const {
    Vec2 xi(0.5, 0.5);
    for (int it = 0; it < 30; ++it) {
      const Vec2 r = map(c, xi) - x;
      const Vec2 d = jacobian(c, xi).lu().solve(r);
      xi -= d;
      if (d.norm() < 1e-14) break;
    }
    return xi;
  }

  /// Cell containing x, searching outward from the grid cell of hint.
  int locate(const Vec2& x, int hint = -1) const {
    int ci, cj;
    if (hint >= 0) {
      ci = hint % n;
      cj = hint / n;
    } else {
      ci = std::clamp(int(x.x() * n), 0, n - 1);
      cj = std::clamp(int(x.y() * n), 0, n - 1);
    }
    constexpr double eps = 1e-10;
    for (int iter = 0; iter < 4 * n + 4; ++iter) {
      const int c = cj * n + ci;
      const Vec2 xi = inverse_map(c, x);
      int di = 0, dj = 0;
      if (xi.x() < -eps) di = -1;
      if (xi.x() > 1 + eps) di = 1;
      if (xi.y() < -eps) dj = -1;
      if (xi.y() > 1 + eps) dj = 1;
      const int ni = std::clamp(ci + di, 0, n - 1), nj = std::clamp(cj + dj, 0, n - 1);
      if ((di == 0 && dj == 0) || (ni == ci && nj == cj)) return c;
      ci = ni;
      cj = nj;
    }
    throw Error("FemSpace::locate: point not found");
  }

  Vec interpolate(const ScalarField& f, bool zero_boundary = true) const override {
    Vec u(ndofs);
    for (int v = 0; v < ndofs; ++v) u[v] = zero_boundary && boundary[v] ? 0.0 : f(mesh->vertices[v]);
    return u;
  }

  Vec load(const CellField& g) const override {
    Vec b = Vec::Zero(ndofs);
    const Rule1D& gl = gauss_legendre(3);
    for (int c = 0; c < num_cells(); ++c)
      for (int q = 0; q < 9; ++q) {
        const auto sh = detail::q1_shape(gl.x[q % 3], gl.x[q / 3]);
        const double v = quad[c].w[q] * g(c, quad[c].x[q]);
        for (int k = 0; k < 4; ++k) b[mesh->cells[c][k]] += v * sh.N[k];
      }
    return b;
  }

  std::unique_ptr<FieldView> view(const Vec& u) const override { return std::make_unique<FemView>(*this, u); }
  const QuadratureRule& cell_quadrature(int c) const override { return quad[c]; }

  Vec project_at_quad(const CellField& g, int c) const override {
    Vec v(quad[c].size());
    for (std::size_t q = 0; q < quad[c].size(); ++q) v[q] = g(c, quad[c].x[q]);
    return v;
  }

  double value(const Vec& u, int c, const Vec2& x) const {
    const Vec2 xi = inverse_map(c, x);
    const auto sh = detail::q1_shape(xi.x(), xi.y());
    double s = 0;
    for (int k = 0; k < 4; ++k) s += sh.N[k] * u[mesh->cells[c][k]];
    return s;
  }

  Vec2 grad(const Vec& u, int c, const Vec2& x) const {
    const Vec2 xi = inverse_map(c, x);
    const auto sh = detail::q1_shape(xi.x(), xi.y());
    Vec2 gr = Vec2::Zero();
    for (int k = 0; k < 4; ++k) gr += sh.dN[k] * u[mesh->cells[c][k]];
    return jacobian(c, xi).inverse().transpose() * gr;
  }

  /// Hessian of u on the curved bilinear cell: J^{-T}(H_ref u - sum_k u_k H_ref F_k) J^{-1}.
  Eigen::Vector3d hess(const Vec& u, int c, const Vec2& x) const {
    const Vec2 xi = inverse_map(c, x);
    const auto sh = detail::q1_shape(xi.x(), xi.y());
    Vec2 gref = Vec2::Zero();
    double uxy = 0;
    const double sgn[4] = {1, -1, 1, -1};
    Vec2 Fxy = Vec2::Zero();
    for (int k = 0; k < 4; ++k) {
      const double uk = u[mesh->cells[c][k]];
      gref += sh.dN[k] * uk;
      uxy += sgn[k] * uk;
      Fxy += sgn[k] * node(c, k);
    }
    const Mat2 J = jacobian(c, xi);
    const Mat2 Ji = J.inverse();
    const Vec2 gx = Ji.transpose() * gref;
    Mat2 Hr;
    const double m = uxy - gx.dot(Fxy);
    Hr << 0, m, m, 0;
    const Mat2 H = Ji.transpose() * Hr * Ji;
    return {H(0, 0), H(0, 1), H(1, 1)};
  }
};

inline double FemView::value(int c, const Vec2& x) const { return s_.value(u_, c, x); }
inline Vec2 FemView::grad(int c, const Vec2& x) const { return s_.grad(u_, c, x); }
inline Eigen::Vector3d FemView::hess(int c, const Vec2& x) const { return s_.hess(u_, c, x); }

}  // namespace pvem
