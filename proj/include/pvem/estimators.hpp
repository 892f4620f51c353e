#pragma once

#include "pvem/scheme.hpp"

#include <limits>

namespace pvem {

struct EstimatorOptions {
  double lambda = 0.5;
  double C_stab = 1.0;
};

/// Single-level elliptic reconstruction estimators.
struct EllipticEstimate {
  double L2 = 0.0, H1 = 0.0;
  std::vector<double> cell_L2;  // additive per-cell share of L2^2, square-rooted
};

/// Geometric relation of two consecutive levels, shared by the two-level terms.
struct StepPair {
  CrossQuad cq;
  bool same_mesh = false;
  std::vector<int> new_to_old, old_to_new;  // unchanged cells, -1 elsewhere
  CommonCoarsening cc;                      // VEM, changed meshes only
  MeshDiff diff;                            // VEM, changed meshes only
};

inline StepPair make_step_pair(const DiscreteSpace& nw, const DiscreteSpace& old) {
  StepPair sp;
  sp.cq = cross_quadrature(nw, old);
  sp.same_mesh = sp.cq.same_mesh;
  const PolyMesh& nm = nw.poly_mesh();
  const PolyMesh& om = old.poly_mesh();
  sp.new_to_old.assign(nm.num_cells(), -1);
  sp.old_to_new.assign(om.num_cells(), -1);
  if (sp.same_mesh) {
    std::iota(sp.new_to_old.begin(), sp.new_to_old.end(), 0);
    std::iota(sp.old_to_new.begin(), sp.old_to_new.end(), 0);
    return sp;
  }
  if (!nw.is_vem()) return sp;
  sp.cc = common_coarsening(om, nm);
  sp.diff = mesh_diff(nm, om);
  for (std::size_t g = 0; g < sp.cc.cells_a.size(); ++g) {
    if (!sp.cc.group_leaves[g].empty()) continue;
    const int a = sp.cc.cells_a[g][0], b = sp.cc.cells_b[g][0];
    if (om.cells[a].size() != nm.cells[b].size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < om.cells[a].size() && same; ++i)
      same = om.vkey[om.cells[a][i]] == nm.vkey[nm.cells[b][i]];
    if (!same) continue;
    sp.old_to_new[a] = b;
    sp.new_to_old[b] = a;
  }
  return sp;
}

namespace detail {

/// L v = D : Hess v + div D . grad v - r v (D symmetric).
inline double diffop(const ProblemData& p, const Vec2& x, double val, const Vec2& g, const Eigen::Vector3d& H) {
  const Mat2 D = p.D(x);
  double s = D(0, 0) * H[0] + 2.0 * D(0, 1) * H[1] + D(1, 1) * H[2];
  if (p.divD) s += p.divD(x).dot(g);
  return s - p.r(x) * val;
}

/// Element residual R = L Pi U - Pi w + fhat of a state at x in cell c.
struct Residual {
  const StepState& s;
  std::unique_ptr<FieldView> u, w;
  explicit Residual(const StepState& st) : s(st), u(st.space->view(st.U)), w(st.space->view(st.w)) {}
  double operator()(int c, const Vec2& x) const {
    const ProblemData& p = *s.space->prob;
    return diffop(p, x, u->value(c, x), u->grad(c, x), u->hess(c, x)) - w->value(c, x) + s.fhat_at(c, x);
  }
};

inline Vec2 left_normal(const PolyMesh& m, int e) {
  const Vec2 d = m.vertices[m.edges[e].v1] - m.vertices[m.edges[e].v0];
  return Vec2(d.y(), -d.x()) / d.norm();
}

/// Normal flux jump (D grad U_left - D grad U_right) . n_left at x on edge e; zero on the boundary.
inline double flux_jump(const PolyMesh& m, const ProblemData& p, const FieldView& u, int e, const Vec2& x) {
  const Edge& ed = m.edges[e];
  if (ed.right < 0) return 0.0;
  const Vec2 g = u.grad(ed.left, x) - u.grad(ed.right, x);
  return (p.D(x) * g).dot(left_normal(m, e));
}

inline QuadratureRule edge_quad(const PolyMesh& m, int e, int degree) {
  return segment_quadrature(m.vertices[m.edges[e].v0], m.vertices[m.edges[e].v1], degree);
}

/// ||(I - Pi) a - (I - Pi) b||_h with the difference taken on unchanged cells and
/// the two contributions added separately on changed cells.
inline double split_stab(const DiscreteSpace& nw, const DiscreteSpace& old, const StepPair& pr, const Vec& a,
                         const Vec& b) {
  if (!nw.is_vem()) return 0.0;
  const auto& vn = static_cast<const VemSpace&>(nw);
  const auto& vo = static_cast<const VemSpace&>(old);
  auto local = [](const LocalVemOps& L, const Vec& loc) {
    const Vec r = loc - L.Pi * loc;
    return r.dot(L.M * r);
  };
  double same = 0, sn = 0, so = 0;
  for (int c = 0; c < vn.num_cells(); ++c) {
    const int oc = pr.new_to_old[c];
    if (oc >= 0)
      same += local(vn.ops[c], vn.gather(a, c) - vo.gather(b, oc));
    else
      sn += local(vn.ops[c], vn.gather(a, c));
  }
  for (int c = 0; c < vo.num_cells(); ++c)
    if (pr.old_to_new[c] < 0) so += local(vo.ops[c], vo.gather(b, c));
  return std::sqrt(std::max(0.0, same)) + std::sqrt(std::max(0.0, sn)) + std::sqrt(std::max(0.0, so));
}

/// Per-cell inconsistency groups: L2 type (h^2 Psi_L2(arg), h Psi_A(v)) or energy
/// type (h Psi_L2(arg), Psi_A(v)), squared.
inline double psi_group2(const DiscreteSpace& sp, const Vec& v, const Vec& arg, int c, bool energy) {
  if (!sp.is_vem()) return 0.0;
  const double h = sp.poly_mesh().h_cell[c];
  const double pl = sp.inconsistency(arg, c).first;
  const double pa = sp.inconsistency(v, c).second;
  if (energy) return h * h * pl * pl + pa * pa;
  return std::pow(h, 4) * pl * pl + h * h * pa * pa;
}

}  // namespace detail

/// Residual estimators of one level (single mesh bound with C = 1).
inline EllipticEstimate elliptic_estimate(const StepState& s) {
  const DiscreteSpace& sp = *s.space;
  const PolyMesh& m = sp.poly_mesh();
  const ProblemData& p = *sp.prob;
  const detail::Residual R(s);
  const int nc = m.num_cells();
  std::vector<double> cl2(nc, 0.0), ch1(nc, 0.0);
  for (int c = 0; c < nc; ++c) {
    const QuadratureRule& q = sp.cell_quadrature(c);
    double r2 = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double r = R(c, q.x[i]);
      r2 += q.w[i] * r * r;
    }
    const double h = m.h_cell[c];
    cl2[c] += std::pow(h, 4) * r2 + detail::psi_group2(sp, s.U, s.w, c, false);
    ch1[c] += h * h * r2 + detail::psi_group2(sp, s.U, s.w, c, true);
  }
  const int edeg = 2 * sp.degree() + 2;
  for (int e = 0; e < m.num_edges(); ++e) {
    if (m.boundary_edge(e)) continue;
    const QuadratureRule q = detail::edge_quad(m, e, edeg);
    double j2 = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double j = detail::flux_jump(m, p, *R.u, e, q.x[i]);
      j2 += q.w[i] * j * j;
    }
    const double hs = m.h_edge[e];
    for (int c : {m.edges[e].left, m.edges[e].right}) {
      cl2[c] += 0.5 * hs * hs * hs * j2;
      ch1[c] += 0.5 * hs * j2;
    }
  }
  EllipticEstimate est;
  est.cell_L2.resize(nc);
  double a = 0, b = 0;
  for (int c = 0; c < nc; ++c) {
    a += cl2[c];
    b += ch1[c];
    est.cell_L2[c] = std::sqrt(std::max(0.0, cl2[c]));
  }
  est.L2 = std::sqrt(std::max(0.0, a));
  est.H1 = std::sqrt(std::max(0.0, b));
  return est;
}

/// theta_S = ||h (f^n - fhat^n)||; zero for the conforming space.
inline double data_space_estimate(const StepState& s) {
  if (s.fhat.empty()) return 0.0;
  const DiscreteSpace& sp = *s.space;
  const ProblemData& p = *sp.prob;
  double e2 = 0;
  for (int c = 0; c < sp.num_cells(); ++c) {
    const QuadratureRule& q = sp.cell_quadrature(c);
    const double h = sp.poly_mesh().h_cell[c];
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double d = p.f(q.x[i], s.t) - s.fhat_at(c, q.x[i]);
      e2 += q.w[i] * h * h * d * d;
    }
  }
  return std::sqrt(e2);
}

/// theta_T(t) = ||f(t) - f^n|| at the given times.
inline std::vector<double> data_time_estimate(const StepState& s, const std::vector<double>& times) {
  const DiscreteSpace& sp = *s.space;
  const ProblemData& p = *sp.prob;
  std::vector<double> out;
  for (double t : times) {
    double e2 = 0;
    for (int c = 0; c < sp.num_cells(); ++c) {
      const QuadratureRule& q = sp.cell_quadrature(c);
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double d = p.f(q.x[i], t) - p.f(q.x[i], s.t);
        e2 += q.w[i] * d * d;
      }
    }
    out.push_back(std::sqrt(e2));
  }
  return out;
}

/// eta_M = ||U^{n-1} - T U^{n-1}|| / tau, projected parts over the common refinement.
inline double mesh_transfer_estimate(const StepState& cur, const StepState& prev, const StepPair& pr) {
  const DiscreteSpace& nw = *cur.space;
  const DiscreteSpace& old = *prev.space;
  const auto vt = nw.view(cur.TUprev);
  const auto vu = old.view(prev.U);
  const double d2 = cross_diff_norm2(
      pr.cq, [&](int c, const Vec2& x) { return vt->value(c, x); }, [&](int c, const Vec2& x) { return vu->value(c, x); });
  const double cs = nw.is_vem() ? static_cast<const VemSpace&>(nw).C_stab : 0.0;
  return (std::sqrt(d2) + cs * detail::split_stab(nw, old, pr, cur.TUprev, prev.U)) / cur.tau;
}

/// eta_T = ||(Pi w^n - fhat^n) - (Pi w^{n-1} - fhat^{n-1})|| with stabilization parts.
inline double time_estimate(const StepState& cur, const StepState& prev, const StepPair& pr) {
  const DiscreteSpace& nw = *cur.space;
  const DiscreteSpace& old = *prev.space;
  const auto wn = nw.view(cur.w);
  const auto wo = old.view(prev.w);
  const double d2 = cross_diff_norm2(
      pr.cq, [&](int c, const Vec2& x) { return wn->value(c, x) - cur.fhat_at(c, x); },
      [&](int c, const Vec2& x) { return wo->value(c, x) - prev.fhat_at(c, x); });
  const double cs = nw.is_vem() ? static_cast<const VemSpace&>(nw).C_stab : 0.0;
  return std::sqrt(d2) + cs * detail::split_stab(nw, old, pr, cur.w, prev.w);
}

namespace detail {

/// Old interior edge containing x among the candidates, or -1.
inline int old_edge_at(const PolyMesh& om, const std::vector<int>& cand, const Vec2& x) {
  for (int e : cand) {
    if (om.boundary_edge(e)) continue;
    const Vec2 a = om.vertices[om.edges[e].v0], b = om.vertices[om.edges[e].v1];
    if (segment_distance(x, a, b) <= 1e-10 * om.h_edge[e]) return e;
  }
  return -1;
}

/// Old cells related to new cell c (the cell itself when unchanged).
inline std::vector<int> related_old_cells(const StepPair& pr, int c) {
  if (pr.new_to_old[c] >= 0) return {pr.new_to_old[c]};
  return pr.cc.cells_a[pr.cc.group_b[c]];
}

inline std::vector<int> related_new_cells(const StepPair& pr, int c) {
  if (pr.old_to_new[c] >= 0) return {pr.old_to_new[c]};
  return pr.cc.cells_b[pr.cc.group_a[c]];
}

}  // namespace detail

/// Space estimator for locally modified meshes (VEM, or any pair on a fixed mesh).
inline double space_estimate_local(const StepState& cur, const StepState& prev, const StepPair& pr,
                                   double eta_M) {
  const DiscreteSpace& nw = *cur.space;
  const DiscreteSpace& old = *prev.space;
  const PolyMesh& nm = nw.poly_mesh();
  const PolyMesh& om = old.poly_mesh();
  const ProblemData& p = *nw.prob;
  const double tau = cur.tau;
  const detail::Residual Rn(cur), Ro(prev);
  double sum = std::pow(tau * eta_M, 2);
  // element residual differences over the common refinement, weighted by the new h
  for (std::size_t i = 0; i < pr.cq.size(); ++i) {
    const int cn = pr.cq.cnew[i], co = pr.cq.cold[i];
    const double d = Rn(cn, pr.cq.x[i]) - Ro(co, pr.cq.x[i]);
    sum += pr.cq.w[i] * std::pow(nm.h_cell[cn], 4) * d * d;
  }
  // jump differences on the new skeleton
  const int edeg = 2 * nw.degree() + 2;
  for (int e = 0; e < nm.num_edges(); ++e) {
    if (nm.boundary_edge(e)) continue;
    const QuadratureRule q = detail::edge_quad(nm, e, edeg);
    std::vector<int> cand;
    if (!pr.same_mesh)
      for (int c : {nm.edges[e].left, nm.edges[e].right})
        for (int oc : detail::related_old_cells(pr, c))
          for (int oe : om.cell_edges[oc]) cand.push_back(oe);
    double j2 = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double jn = detail::flux_jump(nm, p, *Rn.u, e, q.x[i]);
      const int oe = pr.same_mesh ? e : detail::old_edge_at(om, cand, q.x[i]);
      const double jo = oe >= 0 ? detail::flux_jump(om, p, *Ro.u, oe, q.x[i]) : 0.0;
      j2 += q.w[i] * (jn - jo) * (jn - jo);
    }
    sum += std::pow(nm.h_edge[e], 3) * j2;
  }
  if (!pr.same_mesh) {
    // old sides inside new cells, and the h-hat weighted old residuals on the diff sets
    for (int e : pr.diff.edges_only_in_old) {
      if (om.boundary_edge(e)) continue;
      const QuadratureRule q = detail::edge_quad(om, e, edeg);
      double j2 = 0;
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double j = detail::flux_jump(om, p, *Ro.u, e, q.x[i]);
        j2 += q.w[i] * j * j;
      }
      const Vec2 mid = 0.5 * (om.vertices[om.edges[e].v0] + om.vertices[om.edges[e].v1]);
      bool covered = false;
      for (int c : {om.edges[e].left, om.edges[e].right})
        for (int nc : detail::related_new_cells(pr, c))
          for (int ne : nm.cell_edges[nc])
            if (segment_distance(mid, nm.vertices[nm.edges[ne].v0], nm.vertices[nm.edges[ne].v1]) <=
                1e-10 * om.h_edge[e])
              covered = true;
      if (!covered) sum += std::pow(om.h_edge[e], 3) * j2;
      sum += std::pow(pr.diff.hhat_old_edge[e], 3) * j2;
    }
    for (int c : pr.diff.cells_only_in_old) {
      const QuadratureRule& q = old.cell_quadrature(c);
      double r2 = 0;
      for (std::size_t i = 0; i < q.size(); ++i) r2 += q.w[i] * std::pow(Ro(c, q.x[i]), 2);
      sum += std::pow(pr.diff.hhat_old_cell[c], 4) * r2;
    }
  }
  // inconsistency groups
  if (nw.is_vem()) {
    const auto& vn = static_cast<const VemSpace&>(nw);
    const auto& vo = static_cast<const VemSpace&>(old);
    const Vec d = cur.U - cur.TUprev;
    const Vec tw = pr.same_mesh ? prev.w : local_transfer(vo, vn, prev.w);
    const Vec dw = cur.w - tw;
    for (int c = 0; c < vn.num_cells(); ++c) {
      sum += detail::psi_group2(vn, d, dw, c, false);
      if (pr.new_to_old[c] < 0) sum += detail::psi_group2(vn, cur.TUprev, tw, c, false);
    }
    for (int c = 0; c < vo.num_cells(); ++c)
      if (pr.old_to_new[c] < 0) sum += detail::psi_group2(vo, prev.U, prev.w, c, false);
  }
  return std::sqrt(std::max(0.0, sum)) / tau;
}

/// Space estimator for a global mesh change with the elliptic transfer (conforming space).
inline double space_estimate_global(const StepState& cur, const StepState& prev, const StepPair& pr) {
  const DiscreteSpace& nw = *cur.space;
  const DiscreteSpace& old = *prev.space;
  const PolyMesh& nm = nw.poly_mesh();
  const ProblemData& p = *nw.prob;
  const double tau = cur.tau;
  const Vec d = cur.U - cur.TUprev;
  // L_h d + P~(f^n - f^{n-1}) on the new space
  const double tn = cur.t, to = prev.t;
  const CellField df = [&](int, const Vec2& x) { return p.f(x, tn) - p.f(x, to); };
  const Vec Ld = nw.discrete_laplacian(d) + nw.l2_recon(df);
  const auto vd = nw.view(d);
  const auto vl = nw.view(Ld);
  double sum = 0;
  for (int c = 0; c < nm.num_cells(); ++c) {
    const QuadratureRule& q = nw.cell_quadrature(c);
    double r2 = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const Vec2& x = q.x[i];
      const double r = detail::diffop(p, x, vd->value(c, x), vd->grad(c, x), vd->hess(c, x)) - vl->value(c, x) +
                       df(c, x);
      r2 += q.w[i] * r * r;
    }
    sum += std::pow(nm.h_cell[c], 4) * r2;
  }
  for (int e = 0; e < nm.num_edges(); ++e) {
    if (nm.boundary_edge(e)) continue;
    const QuadratureRule q = detail::edge_quad(nm, e, 4);
    double j2 = 0;
    for (std::size_t i = 0; i < q.size(); ++i) j2 += q.w[i] * std::pow(detail::flux_jump(nm, p, *vd, e, q.x[i]), 2);
    sum += std::pow(nm.h_edge[e], 3) * j2;
  }
  // with the elliptic transfer the data operators differ by (P^n - I) w^{n-1}
  const auto wo = old.view(prev.w);
  std::vector<double> g(pr.cq.size());
  for (std::size_t i = 0; i < pr.cq.size(); ++i) g[i] = wo->value(pr.cq.cold[i], pr.cq.x[i]);
  const Vec pg = nw.solve_mass(cross_load(nw, pr.cq, g));
  const auto vp = nw.view(pg);
  for (std::size_t i = 0; i < pr.cq.size(); ++i) {
    const int c = pr.cq.cnew[i];
    const double r = vp->value(c, pr.cq.x[i]) - g[i];
    sum += pr.cq.w[i] * std::pow(nm.h_cell[c], 4) * r * r;
  }
  return std::sqrt(std::max(0.0, sum)) / tau;
}

/// c_{p,r} = ||exp(alpha (s - r))||_{L^q(0,r)}, 1/p + 1/q = 1; p = 0 encodes infinity.
inline double accumulation_weight(int p, double r, double alpha) {
  if (p == 1) return 1.0;
  const bool small = std::abs(alpha * r) < 1e-8;
  if (p == 2) return small ? std::sqrt(r) : std::sqrt(-std::expm1(-2.0 * alpha * r) / (2.0 * alpha));
  if (p == 0) return small ? r : -std::expm1(-alpha * r) / alpha;
  throw Error("accumulation_weight: p must be 1, 2 or infinity");
}

inline double alpha_lambda(const ProblemData& p, double lambda) {
  const double c = p.C_equiv() * p.C_pf();
  return 2.0 * (1.0 - lambda) / (c * c);
}

/// Running L1, L2 and Linf norms over [0, t] of a nonnegative time profile.
struct Accumulator {
  double L1 = 0.0, L2sq = 0.0, Linf = 0.0;
  void add_constant(double tau, double F) {
    L1 += tau * F;
    L2sq += tau * F * F;
    Linf = std::max(Linf, F);
  }
  void add_samples(double tau, const std::vector<double>& w, const std::vector<double>& F) {
    for (std::size_t i = 0; i < F.size(); ++i) {
      L1 += tau * w[i] * F[i];
      L2sq += tau * w[i] * F[i] * F[i];
      Linf = std::max(Linf, F[i]);
    }
  }
  /// Piecewise linear profile from a to b on a step of length tau.
  void add_linear(double tau, double a, double b) {
    L1 += 0.5 * tau * (a + b);
    L2sq += tau * (a * a + a * b + b * b) / 3.0;
    Linf = std::max({Linf, a, b});
  }
  double L2() const { return std::sqrt(L2sq); }
  double min12() const { return std::min(L1, L2()); }
  /// min over p in {1, 2, inf} of c_{p,t} ||F||_{L^p(0,t)}.
  double A(double t, double alpha) const {
    return std::min({accumulation_weight(1, t, alpha) * L1, accumulation_weight(2, t, alpha) * L2(),
                     accumulation_weight(0, t, alpha) * Linf});
  }
  double A_tilde(double t, double alpha) const {
    return std::min(L2(), std::sqrt(accumulation_weight(0, t, alpha)) * Linf);
  }
};

/// Per-step estimator values.
struct StepEstimates {
  EllipticEstimate ell;
  double eta_S = 0, eta_T = 0, eta_M = 0, theta_S = 0;
  std::vector<double> theta_T;  // at the three Gauss points of the step
};

inline StepEstimates estimate_step(const StepState& cur, const StepState* prev, const StepPair* pr) {
  StepEstimates e;
  e.ell = elliptic_estimate(cur);
  e.theta_S = data_space_estimate(cur);
  if (!prev) return e;
  e.eta_M = mesh_transfer_estimate(cur, *prev, *pr);
  e.eta_T = time_estimate(cur, *prev, *pr);
  e.eta_S = (cur.space->is_vem() || pr->same_mesh) ? space_estimate_local(cur, *prev, *pr, e.eta_M)
                                                    : space_estimate_global(cur, *prev, *pr);
  const Rule1D& g = gauss_legendre(3);
  std::vector<double> ts;
  for (double x : g.x) ts.push_back(prev->t + x * cur.tau);
  e.theta_T = data_time_estimate(cur, ts);
  return e;
}

/// Accumulated estimator totals with unit constants.
struct EstimatorTotals {
  double alpha = 0.0;
  double seed = 0.0;
  double t = 0.0;
  Accumulator L2ell, H1ell, S, T, M, thT, thS;
  double last_L2 = 0.0, last_H1 = 0.0;
  bool started = false;

  void add(const StepEstimates& e, double tau) {
    if (!started) {
      started = true;
      last_L2 = e.ell.L2;
      last_H1 = e.ell.H1;
      L2ell.Linf = e.ell.L2;
      H1ell.Linf = e.ell.H1;
      return;
    }
    t += tau;
    L2ell.add_linear(tau, last_L2, e.ell.L2);
    H1ell.add_linear(tau, last_H1, e.ell.H1);
    last_L2 = e.ell.L2;
    last_H1 = e.ell.H1;
    S.add_constant(tau, e.eta_S);
    T.add_constant(tau, e.eta_T);
    M.add_constant(tau, e.eta_M);
    thS.add_constant(tau, e.theta_S);
    thT.add_samples(tau, gauss_legendre(3).w, e.theta_T);
  }

  double total_L2H1() const { return seed + H1ell.L2() + thS.L2() + T.min12() + M.min12() + thT.min12(); }

  double total_LinfL2() const {
    if (t <= 0) return seed + L2ell.Linf;
    return seed + L2ell.Linf + S.A(t, alpha) + T.A(t, alpha) + M.A(t, alpha) + thT.A(t, alpha) +
           thS.A_tilde(t, alpha);
  }
};

/// True errors against the exact solution, accumulated over the run.
struct ErrorTracker {
  double LinfL2 = 0.0;
  double L2H1sq = 0.0;

  static double l2_error_at(const StepState& s) {
    const DiscreteSpace& sp = *s.space;
    const ProblemData& p = *sp.prob;
    const auto v = sp.view(s.U);
    double e2 = 0;
    for (int c = 0; c < sp.num_cells(); ++c) {
      const QuadratureRule& q = sp.cell_quadrature(c);
      for (std::size_t i = 0; i < q.size(); ++i) e2 += q.w[i] * std::pow(p.u(q.x[i], s.t) - v->value(c, q.x[i]), 2);
    }
    return std::sqrt(e2);
  }

  void start(const StepState& s0) {
    if (!s0.space->prob->has_exact()) throw Error("NoExactSolution");
    LinfL2 = l2_error_at(s0);
    L2H1sq = 0.0;
  }

  /// Linear-in-time reconstruction between the two levels.
  void add(const StepState& cur, const StepState& prev, const StepPair& pr) {
    const ProblemData& p = *cur.space->prob;
    const auto un = cur.space->view(cur.U);
    const auto uo = prev.space->view(prev.U);
    const CrossQuad& cq = pr.cq;
    for (int j = 1; j <= 6; ++j) {
      const double l = j / 6.0;
      const double t = prev.t + l * cur.tau;
      double e2 = 0;
      for (std::size_t i = 0; i < cq.size(); ++i) {
        const Vec2& x = cq.x[i];
        const double U = (1 - l) * uo->value(cq.cold[i], x) + l * un->value(cq.cnew[i], x);
        e2 += cq.w[i] * std::pow(p.u(x, t) - U, 2);
      }
      LinfL2 = std::max(LinfL2, std::sqrt(e2));
    }
    const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (double l : gp) {
      const double t = prev.t + l * cur.tau;
      double e2 = 0;
      for (std::size_t i = 0; i < cq.size(); ++i) {
        const Vec2& x = cq.x[i];
        const int cn = cq.cnew[i], co = cq.cold[i];
        const Vec2 gU = (1 - l) * uo->grad(co, x) + l * un->grad(cn, x);
        const double U = (1 - l) * uo->value(co, x) + l * un->value(cn, x);
        const Vec2 ge = p.grad_u(x, t) - gU;
        const double ev = p.u(x, t) - U;
        e2 += cq.w[i] * (ge.dot(p.D(x) * ge) + p.r(x) * ev * ev);
      }
      L2H1sq += 0.5 * cur.tau * e2;
    }
  }

  double L2H1() const { return std::sqrt(L2H1sq); }
};

}  // namespace pvem
