#pragma once

#include "pvem/transfer.hpp"

namespace pvem {

/// One time level of the backward Euler scheme.
struct StepState {
  int n = 0;
  double t = 0.0, tau = 0.0;
  std::shared_ptr<const DiscreteSpace> space;
  Vec U;       // solution, boundary entries carry the Dirichlet data
  Vec TUprev;  // previous solution transferred to this space
  Vec LU;      // discrete Laplacian L_h U
  Vec fh;      // P~ fhat
  Vec w;       // L_h U + f_h: discrete time derivative on interior dofs
  std::vector<Vec> fhat;  // VEM: per-cell P_k coefficients of f(t); FEM: empty
  double seed = 0.0;      // ||u0 - Pi U^0|| at n = 0

  /// Data approximation fhat evaluated in cell c.
  double fhat_at(int c, const Vec2& x) const {
    if (fhat.empty()) return space->prob->f(x, t);
    const auto& vs = static_cast<const VemSpace&>(*space);
    return vs.ops[c].basis.eval(x).dot(fhat[c]);
  }
};

namespace detail {

inline void complete_state(StepState& s) {
  const DiscreteSpace& sp = *s.space;
  const ProblemData& p = *sp.prob;
  const double t = s.t;
  const CellField f = [&](int, const Vec2& x) { return p.f(x, t); };
  s.fhat.clear();
  if (sp.is_vem()) {
    const auto& vs = static_cast<const VemSpace&>(sp);
    s.fhat.resize(vs.num_cells());
    for (int c = 0; c < vs.num_cells(); ++c) s.fhat[c] = vs.project_coef(f, c);
  }
  s.fh = sp.l2_recon(f);
  s.LU = sp.discrete_laplacian(s.U);
  s.w = s.LU + s.fh;
}

}  // namespace detail

inline Vec dirichlet_data(const DiscreteSpace& sp, double t) {
  const ProblemData& p = *sp.prob;
  if (!p.nonzero_boundary) return Vec::Zero(sp.ndofs);
  return sp.boundary_values([&](const Vec2& x) { return p.u(x, t); });
}

/// U^0 = interpolant of u0 and the seed ||u0 - Pi U^0||.
inline StepState initial_state(std::shared_ptr<const DiscreteSpace> space) {
  StepState s;
  s.space = std::move(space);
  const DiscreteSpace& sp = *s.space;
  const ProblemData& p = *sp.prob;
  s.U = sp.interpolate(p.u0, !p.nonzero_boundary);
  s.TUprev = s.U;
  const auto v = sp.view(s.U);
  double e2 = 0;
  for (int c = 0; c < sp.num_cells(); ++c) {
    const QuadratureRule& q = sp.cell_quadrature(c);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double d = p.u0(q.x[i]) - v->value(c, q.x[i]);
      e2 += q.w[i] * d * d;
    }
  }
  s.seed = std::sqrt(e2);
  detail::complete_state(s);
  return s;
}

/// T v for the selected transfer. FEM spaces of one topology support the
/// elliptic transfer and nodal copying (LocalLagrange).
inline Vec apply_transfer(TransferKind kind, const DiscreteSpace& old, const DiscreteSpace& nw, const Vec& v,
                          double t_old) {
  if (old.is_vem() && nw.is_vem()) {
    const auto& o = static_cast<const VemSpace&>(old);
    const auto& n = static_cast<const VemSpace&>(nw);
    switch (kind) {
      case TransferKind::LocalLagrange: return local_transfer(o, n, v);
      case TransferKind::L2Poly: return l2_poly_transfer(o, n, v);
      case TransferKind::Elliptic: return vem_elliptic_transfer(o, n, v, t_old);
    }
  }
  if (!old.is_vem() && !nw.is_vem()) {
    const auto& o = static_cast<const FemSpace&>(old);
    const auto& n = static_cast<const FemSpace&>(nw);
    if (o.n != n.n) throw Error("UnrelatedMeshes: topology mismatch");
    if (kind == TransferKind::Elliptic) return fem_elliptic_transfer(o, n, v, t_old);
    if (kind == TransferKind::LocalLagrange) return v;
    const CrossQuad cq = cross_quadrature(n, o);
    const auto vo = o.view(v);
    std::vector<double> vals(cq.size());
    for (std::size_t i = 0; i < cq.size(); ++i) vals[i] = vo->value(cq.cold[i], cq.x[i]);
    Vec bnd = v;
    for (int i = 0; i < n.ndofs; ++i)
      if (!n.boundary[i]) bnd[i] = 0.0;
    const Vec rhs = cross_load(n, cq, vals) - n.M * bnd;
    return n.from_reduced(n.mass_solver().solve(n.to_reduced(rhs)), &bnd);
  }
  throw Error("UnrelatedMeshes: mixed backends");
}

/// Backward Euler step: (M/tau + A) U = (fhat, Pi phi) + M T U^{n-1} / tau on interior dofs.
inline StepState advance(const StepState& prev, std::shared_ptr<const DiscreteSpace> space, TransferKind kind,
                         double tau) {
  if (!(tau > 0)) throw Error("advance: non-positive time step");
  StepState s;
  s.n = prev.n + 1;
  s.tau = tau;
  s.t = prev.t + tau;
  s.space = std::move(space);
  const DiscreteSpace& sp = *s.space;
  const ProblemData& p = *sp.prob;
  s.TUprev = (s.space == prev.space) ? prev.U : apply_transfer(kind, *prev.space, sp, prev.U, prev.t);
  const double t = s.t;
  const Vec rhs_full = sp.load([&](int, const Vec2& x) { return p.f(x, t); }) + sp.M * s.TUprev / tau;
  const Vec ub = dirichlet_data(sp, t);
  Vec rhs = sp.to_reduced(rhs_full);
  if (p.nonzero_boundary) rhs -= sp.coupling(sp.M, ub) / tau + sp.coupling(sp.A, ub);
  const auto& solver = sp.step_solver(tau);
  const Vec ui = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !ui.allFinite()) throw Error("SolverFail");
  s.U = sp.from_reduced(ui, &ub);
  detail::complete_state(s);
  return s;
}

}  // namespace pvem
