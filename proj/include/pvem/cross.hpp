#pragma once

#include "pvem/fem.hpp"
#include "pvem/vem.hpp"

namespace pvem {

/// Quadrature on the common refinement of two meshes. Each point records the
/// cell containing it in the new and in the old mesh.
struct CrossQuad {
  std::vector<Vec2> x;
  std::vector<double> w;
  std::vector<int> cnew, cold;
  std::vector<int> group;   // finest common coarsening cell (VEM only)
  std::vector<Vec2> xi_new;  // reference coordinates in the new cell (FEM only)
  int num_groups = 0;
  bool same_mesh = false;
  std::size_t size() const { return w.size(); }
};

inline bool same_fem_mesh(const FemSpace& a, const FemSpace& b) {
  return a.n == b.n && a.mesh->vertices == b.mesh->vertices;
}

/// Common refinement quadrature for two spaces of the same kind.
inline CrossQuad cross_quadrature(const DiscreteSpace& nw, const DiscreteSpace& old) {
  CrossQuad cq;
  if (nw.is_vem() != old.is_vem()) throw Error("UnrelatedMeshes: mixed backends");
  if (nw.is_vem()) {
    const Overlay ov = make_overlay(nw.poly_mesh(), old.poly_mesh());
    cq.same_mesh = ov.identical && nw.poly_mesh().num_cells() == old.poly_mesh().num_cells();
    cq.num_groups = ov.num_groups;
    const int deg = 2 * nw.degree() + 2;
    for (const auto& p : ov.pieces) {
      const bool whole = p.poly.size() == nw.poly_mesh().cells[p.ca].size();
      const QuadratureRule q = whole && cq.same_mesh ? nw.cell_quadrature(p.ca) : polygon_quadrature(p.poly, deg);
      for (std::size_t i = 0; i < q.size(); ++i) {
        cq.x.push_back(q.x[i]);
        cq.w.push_back(q.w[i]);
        cq.cnew.push_back(p.ca);
        cq.cold.push_back(p.cb);
        cq.group.push_back(p.group);
      }
    }
    return cq;
  }
  const auto& fn = static_cast<const FemSpace&>(nw);
  const auto& fo = static_cast<const FemSpace&>(old);
  cq.same_mesh = same_fem_mesh(fn, fo);
  if (cq.same_mesh) {
    for (int c = 0; c < fn.num_cells(); ++c)
      for (std::size_t i = 0; i < fn.quad[c].size(); ++i) {
        cq.x.push_back(fn.quad[c].x[i]);
        cq.w.push_back(fn.quad[c].w[i]);
        cq.cnew.push_back(c);
        cq.cold.push_back(c);
        const Rule1D& g = gauss_legendre(3);
        cq.xi_new.emplace_back(g.x[i % 3], g.x[i / 3]);
      }
    return cq;
  }
  const Rule1D& g = gauss_legendre(3);
  for (int c = 0; c < fn.num_cells(); ++c) {
    int hint = c;
    for (int sb = 0; sb < 2; ++sb)
      for (int sa = 0; sa < 2; ++sa)
        for (int b = 0; b < 3; ++b)
          for (int a = 0; a < 3; ++a) {
            const Vec2 xi(0.5 * (sa + g.x[a]), 0.5 * (sb + g.x[b]));
            const Vec2 x = fn.map(c, xi);
            cq.x.push_back(x);
            cq.w.push_back(0.25 * g.w[a] * g.w[b] * fn.jacobian(c, xi).determinant());
            cq.cnew.push_back(c);
            cq.xi_new.push_back(xi);
            hint = fo.locate(x, hint);
            cq.cold.push_back(hint);
          }
  }
  return cq;
}

/// (g, Pi phi_j) on the new space with g sampled at the cross points.
inline Vec cross_load(const DiscreteSpace& nw, const CrossQuad& cq, const std::vector<double>& g) {
  Vec b = Vec::Zero(nw.ndofs);
  if (nw.is_vem()) {
    const auto& vs = static_cast<const VemSpace&>(nw);
    std::vector<Vec> mom(vs.num_cells());
    for (int c = 0; c < vs.num_cells(); ++c) mom[c] = Vec::Zero(poly_dim(vs.k));
    for (std::size_t i = 0; i < cq.size(); ++i) mom[cq.cnew[i]] += cq.w[i] * g[i] * vs.ops[cq.cnew[i]].basis.eval(cq.x[i]);
    for (int c = 0; c < vs.num_cells(); ++c) {
      const Vec lc = vs.ops[c].P0.transpose() * mom[c];
      for (int i = 0; i < vs.ops[c].ndof; ++i) b[vs.ops[c].dofs[i]] += lc[i];
    }
    return b;
  }
  const auto& fs = static_cast<const FemSpace&>(nw);
  for (std::size_t i = 0; i < cq.size(); ++i) {
    const auto sh = detail::q1_shape(cq.xi_new[i].x(), cq.xi_new[i].y());
    for (int k = 0; k < 4; ++k) b[fs.mesh->cells[cq.cnew[i]][k]] += cq.w[i] * g[i] * sh.N[k];
  }
  return b;
}

/// Integral of (fa - fb)^2 over the common refinement, fa on the new and fb on the old mesh.
inline double cross_diff_norm2(const CrossQuad& cq, const std::function<double(int, const Vec2&)>& fa,
                               const std::function<double(int, const Vec2&)>& fb) {
  double s = 0;
  for (std::size_t i = 0; i < cq.size(); ++i) {
    const double d = fa(cq.cnew[i], cq.x[i]) - fb(cq.cold[i], cq.x[i]);
    s += cq.w[i] * d * d;
  }
  return s;
}

}  // namespace pvem
