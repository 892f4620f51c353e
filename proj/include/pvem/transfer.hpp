#pragma once

#include "pvem/cross.hpp"

#include <unordered_map>

namespace pvem {

enum class TransferKind { LocalLagrange, L2Poly, Elliptic };

inline TransferKind parse_transfer(const std::string& s) {
  if (s == "local" || s == "local_lagrange") return TransferKind::LocalLagrange;
  if (s == "l2" || s == "l2_poly") return TransferKind::L2Poly;
  if (s == "elliptic") return TransferKind::Elliptic;
  throw Error("unknown transfer kind: " + s);
}

namespace detail {

inline std::pair<long, long> edge_key(const PolyMesh& m, int e) {
  return std::minmax(m.vkey[m.edges[e].v0], m.vkey[m.edges[e].v1]);
}

struct PairHash {
  std::size_t operator()(const std::pair<long, long>& p) const {
    return std::hash<long>()(p.first * 1000003L ^ p.second);
  }
};

/// Degree-k trace of a VEM function on old edge e, as a function of the
/// parameter s in [0,1] from v0 to v1.
struct EdgeTrace {
  double va = 0, vb = 0, c = 0;
  double at(double s) const { return va * (1 - s) + vb * s + c * s * (1 - s); }
  /// Mean over [s0, s1].
  double mean(double s0, double s1) const {
    auto prim = [&](double s) { return va * (s - s * s / 2) + vb * s * s / 2 + c * (s * s / 2 - s * s * s / 3); };
    return (prim(s1) - prim(s0)) / (s1 - s0);
  }
};

inline EdgeTrace edge_trace(const VemSpace& sp, const Vec& v, int e) {
  const PolyMesh& m = *sp.mesh;
  EdgeTrace t;
  t.va = v[m.edges[e].v0];
  t.vb = v[m.edges[e].v1];
  if (sp.k == 2) t.c = 6.0 * (v[m.num_vertices() + e] - 0.5 * (t.va + t.vb));
  return t;
}

/// Parameter of x along old edge e (0..1, clamped for endpoints).
inline double edge_param(const PolyMesh& m, int e, const Vec2& x) {
  const Vec2 a = m.vertices[m.edges[e].v0], b = m.vertices[m.edges[e].v1];
  return std::clamp((x - a).dot(b - a) / (b - a).squaredNorm(), 0.0, 1.0);
}

/// New dofs that follow from traces and averages of the old function; the rest
/// (interior to refined old cells) are flagged unknown.
struct TraceResult {
  Vec value;
  std::vector<char> known;
  CommonCoarsening cc;
};

inline TraceResult trace_dofs(const VemSpace& old, const VemSpace& nw, const Vec& v) {
  const PolyMesh& om = *old.mesh;
  const PolyMesh& nm = *nw.mesh;
  if (old.k != nw.k) throw Error("UnrelatedMeshes: degree mismatch");
  TraceResult tr;
  tr.cc = common_coarsening(om, nm);
  const CommonCoarsening& cc = tr.cc;
  tr.value = Vec::Zero(nw.ndofs);
  tr.known.assign(nw.ndofs, 0);
  std::unordered_map<long, int> overt;
  for (int i = 0; i < om.num_vertices(); ++i) overt[om.vkey[i]] = i;
  std::unordered_map<std::pair<long, long>, int, PairHash> oedge;
  for (int e = 0; e < om.num_edges(); ++e) oedge[edge_key(om, e)] = e;
  std::vector<std::vector<int>> vcells(nm.num_vertices());
  for (int c = 0; c < nm.num_cells(); ++c)
    for (int vv : nm.cells[c]) vcells[vv].push_back(c);
  std::vector<std::vector<int>> overt_edges(om.num_vertices());
  for (int e = 0; e < om.num_edges(); ++e) {
    overt_edges[om.edges[e].v0].push_back(e);
    overt_edges[om.edges[e].v1].push_back(e);
  }
  // old edge of the changed region containing x in its interior
  auto find_old_edge = [&](const Vec2& x, const std::vector<int>& ncells) -> int {
    for (int c : ncells)
      for (int oc : cc.cells_a[cc.group_b[c]])
        for (int e : om.cell_edges[oc]) {
          const Vec2 a = om.vertices[om.edges[e].v0], b = om.vertices[om.edges[e].v1];
          if (interior_param(x, a, b, 1e-9 * om.h_edge[e]) >= 0) return e;
        }
    return -1;
  };
  const int nvn = nm.num_vertices(), nen = nm.num_edges();
  const int nvo = om.num_vertices();
  for (int i = 0; i < nvn; ++i) {
    auto it = overt.find(nm.vkey[i]);
    if (it != overt.end()) {
      tr.value[i] = v[it->second];
      tr.known[i] = 1;
      continue;
    }
    const int e = find_old_edge(nm.vertices[i], vcells[i]);
    if (e >= 0) {
      tr.value[i] = edge_trace(old, v, e).at(edge_param(om, e, nm.vertices[i]));
      tr.known[i] = 1;
    }
  }
  if (nw.k == 2) {
    for (int e = 0; e < nen; ++e) {
      const int di = nvn + e;
      const auto key = edge_key(nm, e);
      auto it = oedge.find(key);
      if (it != oedge.end()) {
        tr.value[di] = v[nvo + it->second];
        tr.known[di] = 1;
        continue;
      }
      const Vec2 a = nm.vertices[nm.edges[e].v0], b = nm.vertices[nm.edges[e].v1];
      std::vector<int> ncells{nm.edges[e].left};
      if (nm.edges[e].right >= 0) ncells.push_back(nm.edges[e].right);
      const int oe = find_old_edge(0.5 * (a + b), ncells);
      if (oe >= 0) {
        double s0 = edge_param(om, oe, a), s1 = edge_param(om, oe, b);
        if (s0 > s1) std::swap(s0, s1);
        tr.value[di] = edge_trace(old, v, oe).mean(s0, s1);
        tr.known[di] = 1;
        continue;
      }
      // union of collinear old edges from a to b
      auto ia = overt.find(key.first), ib = overt.find(key.second);
      if (ia == overt.end() || ib == overt.end()) continue;
      const Vec2 pa = om.vertices[ia->second], pb = om.vertices[ib->second];
      const double len = (pb - pa).norm();
      int cur = ia->second;
      double acc = 0, pos = 0;
      bool ok = false;
      for (int guard = 0; guard < 64; ++guard) {
        int next = -1, via = -1;
        double best = pos;
        for (int oe2 : overt_edges[cur]) {
          const int w = om.edges[oe2].v0 == cur ? om.edges[oe2].v1 : om.edges[oe2].v0;
          const Vec2 pw = om.vertices[w];
          if (segment_distance(pw, pa, pb) > 1e-9 * len) continue;
          const double s = (pw - pa).dot(pb - pa) / (len * len);
          if (s > best + 1e-12) {
            if (next < 0 || s < (om.vertices[next] - pa).dot(pb - pa) / (len * len)) {
              next = w;
              via = oe2;
            }
          }
        }
        if (next < 0) break;
        acc += om.h_edge[via] * v[nvo + via];
        pos = (om.vertices[next] - pa).dot(pb - pa) / (len * len);
        cur = next;
        if (cur == ib->second) {
          ok = true;
          break;
        }
      }
      if (ok) {
        tr.value[di] = acc / len;
        tr.known[di] = 1;
      }
    }
    const int neo = om.num_edges();
    for (int c = 0; c < nm.num_cells(); ++c) {
      const int g = cc.group_b[c];
      const int di = nvn + nen + c;
      if (cc.group_leaves[g].empty()) {
        tr.value[di] = v[nvo + neo + cc.cells_a[g][0]];
        tr.known[di] = 1;
      } else if (cc.cells_b[g].size() == 1) {
        double s = 0;
        for (int oc : cc.cells_a[g]) s += om.area[oc] * v[nvo + neo + oc];
        tr.value[di] = s / nm.area[c];
        tr.known[di] = 1;
      }
    }
  }
  return tr;
}

}  // namespace detail

/// Local Lagrange transfer: interpolation on coarsened patches, the local
/// stabilized problem on refined cells, copies elsewhere.
inline Vec local_transfer(const VemSpace& old, const VemSpace& nw, const Vec& v) {
  if (old.mesh == nw.mesh || (old.mesh->forest == nw.mesh->forest && old.mesh->generation == nw.mesh->generation))
    return v;
  detail::TraceResult tr = detail::trace_dofs(old, nw, v);
  const CommonCoarsening& cc = tr.cc;
  const PolyMesh& om = *old.mesh;
  const PolyMesh& nm = *nw.mesh;
  std::vector<char> handled(nw.ndofs, 0);
  for (std::size_t g = 0; g < cc.cells_a.size(); ++g) {
    if (cc.group_leaves[g].empty() || cc.cells_b[g].size() == 1) continue;
    if (cc.cells_a[g].size() != 1) throw Error("LocalSolveFail: patch is neither refined nor coarsened");
    const int E = cc.cells_a[g][0];
    std::vector<int> ldofs;
    std::unordered_map<int, int> loc;
    for (int c : cc.cells_b[g])
      for (int d : nw.ops[c].dofs)
        if (!loc.count(d)) {
          loc[d] = int(ldofs.size());
          ldofs.push_back(d);
        }
    const int nl = int(ldofs.size());
    Mat AP = Mat::Zero(nl, nl);
    for (int c : cc.cells_b[g]) {
      const auto& L = nw.ops[c];
      for (int i = 0; i < L.ndof; ++i)
        for (int j = 0; j < L.ndof; ++j) AP(loc[L.dofs[i]], loc[L.dofs[j]]) += L.A(i, j);
    }
    std::vector<int> unk, kn;
    for (int i = 0; i < nl; ++i) (tr.known[ldofs[i]] ? kn : unk).push_back(i);
    if (unk.empty()) continue;
    Vec rhs = Vec::Zero(int(unk.size()));
    if (nw.k == 2) {
      const auto& LE = old.ops[E];
      const Vec AEv = LE.A * old.gather(v, E);
      const double aecell = AEv[LE.ndof - 1];
      const int cell0 = nm.num_vertices() + nm.num_edges();
      for (std::size_t a = 0; a < unk.size(); ++a) {
        const int d = ldofs[unk[a]];
        if (d >= cell0) rhs[a] = aecell * nm.area[d - cell0] / om.area[E];
      }
    }
    Mat Auu(unk.size(), unk.size());
    Vec xk(kn.size());
    for (std::size_t b = 0; b < kn.size(); ++b) xk[b] = tr.value[ldofs[kn[b]]];
    for (std::size_t a = 0; a < unk.size(); ++a) {
      for (std::size_t b = 0; b < unk.size(); ++b) Auu(a, b) = AP(unk[a], unk[b]);
      for (std::size_t b = 0; b < kn.size(); ++b) rhs[a] -= AP(unk[a], kn[b]) * xk[b];
    }
    // k = 2: the child cell moments must average to the parent moment so that
    // coarsening undoes refinement; imposed with a Lagrange multiplier.
    Vec x;
    if (nw.k == 2) {
      const int nu = int(unk.size());
      const int cell0 = nm.num_vertices() + nm.num_edges();
      Mat K = Mat::Zero(nu + 1, nu + 1);
      K.topLeftCorner(nu, nu) = Auu;
      Vec r(nu + 1);
      r.head(nu) = rhs;
      r[nu] = om.area[E] * v[om.num_vertices() + om.num_edges() + E];
      for (int a = 0; a < nu; ++a) {
        const int d = ldofs[unk[a]];
        if (d >= cell0) K(a, nu) = K(nu, a) = nm.area[d - cell0];
      }
      const Eigen::FullPivLU<Mat> lu(K);
      if (!lu.isInvertible()) throw Error("LocalSolveFail");
      x = lu.solve(r).head(nu);
    } else {
      const Eigen::LDLT<Mat> f(Auu);
      if (f.info() != Eigen::Success) throw Error("LocalSolveFail");
      x = f.solve(rhs);
    }
    for (std::size_t a = 0; a < unk.size(); ++a) {
      tr.value[ldofs[unk[a]]] = x[a];
      handled[ldofs[unk[a]]] = 1;
    }
  }
  for (int i = 0; i < nw.ndofs; ++i)
    if (!tr.known[i] && !handled[i]) throw Error("LocalSolveFail: undetermined dof");
  return tr.value;
}

/// Piecewise polynomials on the finest common coarsening.
struct GroupPolynomials {
  std::vector<ScaledMonomials> basis;
  std::vector<Vec> coef;
  double eval(int g, const Vec2& x) const { return basis[g].eval(x).dot(coef[g]); }
};

/// L2 projection onto P_k of the finest common coarsening of a field sampled at the cross points.
inline GroupPolynomials fcc_project(const CrossQuad& cq, int k, const std::vector<double>& vals) {
  const int G = cq.num_groups;
  GroupPolynomials gp;
  std::vector<double> area(G, 0.0);
  std::vector<Vec2> cen(G, Vec2::Zero());
  for (std::size_t i = 0; i < cq.size(); ++i) {
    area[cq.group[i]] += cq.w[i];
    cen[cq.group[i]] += cq.w[i] * cq.x[i];
  }
  std::vector<double> rad(G, 0.0);
  for (int g = 0; g < G; ++g)
    if (area[g] > 0) cen[g] /= area[g];
  for (std::size_t i = 0; i < cq.size(); ++i)
    rad[cq.group[i]] = std::max(rad[cq.group[i]], (cq.x[i] - cen[cq.group[i]]).norm());
  const int nk = poly_dim(k);
  std::vector<Mat> H(G, Mat::Zero(nk, nk));
  std::vector<Vec> b(G, Vec::Zero(nk));
  for (int g = 0; g < G; ++g) gp.basis.emplace_back(cen[g], std::max(2 * rad[g], 1e-14), k);
  for (std::size_t i = 0; i < cq.size(); ++i) {
    const int g = cq.group[i];
    const Vec m = gp.basis[g].eval(cq.x[i]);
    H[g].noalias() += cq.w[i] * m * m.transpose();
    b[g] += cq.w[i] * vals[i] * m;
  }
  gp.coef.resize(G);
  for (int g = 0; g < G; ++g) gp.coef[g] = area[g] > 0 ? Vec(H[g].ldlt().solve(b[g])) : Vec::Zero(nk);
  return gp;
}

/// Boundary dofs of the new space read from the trace of v; interior entries zero.
inline Vec transferred_boundary(const VemSpace& old, const VemSpace& nw, const Vec& v) {
  if (old.mesh == nw.mesh || (old.mesh->forest == nw.mesh->forest && old.mesh->generation == nw.mesh->generation)) {
    Vec b = v;
    for (int i = 0; i < nw.ndofs; ++i)
      if (!nw.boundary[i]) b[i] = 0.0;
    return b;
  }
  const detail::TraceResult tr = detail::trace_dofs(old, nw, v);
  Vec b = Vec::Zero(nw.ndofs);
  for (int i = 0; i < nw.ndofs; ++i)
    if (nw.boundary[i]) {
      if (!tr.known[i]) throw Error("LocalSolveFail: boundary dof without trace");
      b[i] = tr.value[i];
    }
  return b;
}

/// T = P~ o Pi-hat: projection onto polynomials of the finest common coarsening
/// followed by the discrete L2 reconstruction.
inline Vec l2_poly_transfer(const VemSpace& old, const VemSpace& nw, const Vec& v) {
  const CrossQuad cq = cross_quadrature(nw, old);
  const auto vo = old.view(v);
  std::vector<double> vals(cq.size());
  for (std::size_t i = 0; i < cq.size(); ++i) vals[i] = vo->value(cq.cold[i], cq.x[i]);
  const GroupPolynomials gp = fcc_project(cq, nw.k, vals);
  for (std::size_t i = 0; i < cq.size(); ++i) vals[i] = gp.eval(cq.group[i], cq.x[i]);
  const Vec bnd = transferred_boundary(old, nw, v);
  const Vec rhs = cross_load(nw, cq, vals) - nw.M * bnd;
  if (nw.num_interior() == 0) return bnd;
  return nw.from_reduced(nw.mass_solver().solve(nw.to_reduced(rhs)), &bnd);
}

/// Computable elliptic transfer: A_h^n(Tv, phi) = -(Pi-hat(L_h^{n-1} v + (P~^{n-1} - I) Pi^{n-1} f
/// - (P~^n - I) Pi^n f), Pi0 phi) with f taken at the old time level.
inline Vec vem_elliptic_transfer(const VemSpace& old, const VemSpace& nw, const Vec& v, double t_old) {
  const CrossQuad cq = cross_quadrature(nw, old);
  const CellField f = [&](int, const Vec2& x) { return old.prob->f(x, t_old); };
  const Vec Lv = old.discrete_laplacian(v);
  const Vec fh_old = old.l2_recon(f);
  const Vec fh_new = nw.l2_recon(f);
  const auto vlo = old.view(Lv + fh_old);
  const auto vnew = nw.view(fh_new);
  std::vector<Vec> fo(old.num_cells()), fn(nw.num_cells());
  for (int c = 0; c < old.num_cells(); ++c) fo[c] = old.project_coef(f, c);
  for (int c = 0; c < nw.num_cells(); ++c) fn[c] = nw.project_coef(f, c);
  std::vector<double> vals(cq.size());
  for (std::size_t i = 0; i < cq.size(); ++i) {
    const int co = cq.cold[i], cn = cq.cnew[i];
    const Vec2& x = cq.x[i];
    vals[i] = vlo->value(co, x) - old.ops[co].basis.eval(x).dot(fo[co]) - vnew->value(cn, x) +
              nw.ops[cn].basis.eval(x).dot(fn[cn]);
  }
  const GroupPolynomials gp = fcc_project(cq, nw.k, vals);
  for (std::size_t i = 0; i < cq.size(); ++i) vals[i] = -gp.eval(cq.group[i], cq.x[i]);
  const Vec bnd = transferred_boundary(old, nw, v);
  const Vec rhs = cross_load(nw, cq, vals) - nw.A * bnd;
  if (nw.num_interior() == 0) return bnd;
  return nw.from_reduced(nw.stiffness_solver().solve(nw.to_reduced(rhs)), &bnd);
}

/// Elliptic transfer between moving meshes of one topology:
/// A^n(Tv, phi) = -(L_h^{n-1} v + P~^{n-1} f, phi) + (f, phi), boundary values from g.
inline Vec fem_elliptic_transfer(const FemSpace& old, const FemSpace& nw, const Vec& v, double t_old,
                                 const CrossQuad* cq_in = nullptr) {
  if (old.n != nw.n) throw Error("UnrelatedMeshes: topology mismatch");
  const CrossQuad cq_local = cq_in ? CrossQuad{} : cross_quadrature(nw, old);
  const CrossQuad& cq = cq_in ? *cq_in : cq_local;
  const ProblemData& p = *old.prob;
  const CellField f = [&](int, const Vec2& x) { return p.f(x, t_old); };
  const Vec Lv = old.discrete_laplacian(v) + old.l2_recon(f);
  const auto vo = old.view(Lv);
  std::vector<double> vals(cq.size());
  for (std::size_t i = 0; i < cq.size(); ++i) vals[i] = -vo->value(cq.cold[i], cq.x[i]);
  Vec bnd = Vec::Zero(nw.ndofs);
  if (cq.same_mesh) {
    for (int i = 0; i < nw.ndofs; ++i)
      if (nw.boundary[i]) bnd[i] = v[i];
  } else if (p.nonzero_boundary) {
    bnd = nw.boundary_values([&](const Vec2& x) { return p.u(x, t_old); });
  }
  const Vec rhs = cross_load(nw, cq, vals) + nw.load(f) - nw.A * bnd;
  if (nw.num_interior() == 0) return bnd;
  return nw.from_reduced(nw.stiffness_solver().solve(nw.to_reduced(rhs)), &bnd);
}

}  // namespace pvem
