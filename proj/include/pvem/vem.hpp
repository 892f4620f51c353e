#pragma once

#include "pvem/mesh.hpp"
#include "pvem/polynomial.hpp"
#include "pvem/problem.hpp"
#include "pvem/space.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>

namespace pvem {

/// Per-cell projectors and local forms of the order-k virtual element space.
struct LocalVemOps {
  int k = 1;
  int ndof = 0;
  std::vector<int> dofs;  // global indices, local order: vertices, edges, cell
  ScaledMonomials basis;
  QuadratureRule quad;
  Mat Mq;           // monomial values at quadrature points (npts x nk)
  Mat H;            // monomial mass (nk x nk)
  Mat Dm;           // dof values of monomials (ndof x nk)
  Mat Pnabla;       // H1 projector coefficients (nk x ndof)
  Mat P0;           // L2 projector onto P_k (nk x ndof)
  Mat P0gx, P0gy;   // L2 projection of the gradient onto P_{k-1} (n_{k-1} x ndof)
  Mat Pi;           // Dm * P0, projector acting on dof vectors
  Mat A, M;         // local stiffness and mass
  double sigma = 1.0;
  double a_lo = 1.0, a_hi = 1.0, r_lo = 0.0, r_hi = 0.0;
  double area = 0.0, h = 1.0;
};

struct VemOptions {
  int k = 1;
  double C_stab = 1.0;
};

namespace detail {

/// Gauss-Lobatto coefficients of a P_1 density g against a quadratic edge trace
/// expressed through (endpoint a, endpoint b, edge mean).
inline std::array<double, 3> lobatto_weights(double len, double ga, double gm, double gb) {
  return {len / 6.0 * (ga - gm), len / 6.0 * (gb - gm), len * gm};
}

}  // namespace detail

inline LocalVemOps build_local_ops(const PolyMesh& mesh, int c, int k, const ProblemData& prob) {
  if (k < 1 || k > 2) throw Error("VEM degree must be 1 or 2");
  LocalVemOps L;
  L.k = k;
  const auto& cv = mesh.cells[c];
  const int n = int(cv.size());
  L.ndof = k == 1 ? n : 2 * n + 1;
  const int nv = mesh.num_vertices(), ne = mesh.num_edges();
  for (int v : cv) L.dofs.push_back(v);
  if (k == 2) {
    for (int e : mesh.cell_edges[c]) L.dofs.push_back(nv + e);
    L.dofs.push_back(nv + ne + c);
  }
  const auto poly = mesh.polygon(c);
  L.area = mesh.area[c];
  L.h = mesh.h_cell[c];
  L.basis = ScaledMonomials(mesh.center[c], L.h, k);
  L.quad = polygon_quadrature(poly, 2 * k + 2);
  const int nk = poly_dim(k), nk1 = poly_dim(k - 1);
  const int np = int(L.quad.size());
  L.Mq.resize(np, nk);
  for (int q = 0; q < np; ++q) L.Mq.row(q) = L.basis.eval(L.quad.x[q]).transpose();
  const Eigen::Map<const Vec> wts(L.quad.w.data(), np);
  L.H = L.Mq.transpose() * wts.asDiagonal() * L.Mq;

  // dof values of the monomials
  L.Dm = Mat::Zero(L.ndof, nk);
  for (int i = 0; i < n; ++i) L.Dm.row(i) = L.basis.eval(poly[i]).transpose();
  if (k == 2) {
    for (int i = 0; i < n; ++i) {
      const auto sq = segment_quadrature(poly[i], poly[(i + 1) % n], 2);
      Vec mean = Vec::Zero(nk);
      for (std::size_t j = 0; j < sq.size(); ++j) mean += sq.w[j] * L.basis.eval(sq.x[j]);
      L.Dm.row(n + i) = mean.transpose() / mesh.h_edge[mesh.cell_edges[c][i]];
    }
    L.Dm.row(2 * n) = L.H.row(0) / L.area;
  }

  // H1 projector via integration by parts
  Mat B = Mat::Zero(nk, L.ndof);
  if (k == 1) {
    for (int i = 0; i < n; ++i) B(0, i) = 1.0 / n;
  } else {
    B(0, 2 * n) = 1.0;
  }
  Mat Ex = Mat::Zero(nk1, L.ndof), Ey = Mat::Zero(nk1, L.ndof);
  for (int i = 0; i < n; ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % n];
    const Vec2 d = b - a;
    const double len = d.norm();
    const Vec2 nrm(d.y() / len, -d.x() / len);
    const int ia = i, ib = (i + 1) % n;
    if (k == 1) {
      const Vec gn = L.basis.grad(a) * nrm;
      for (int al = 1; al < nk; ++al) {
        B(al, ia) += 0.5 * len * gn[al];
        B(al, ib) += 0.5 * len * gn[al];
      }
      Ex(0, ia) += 0.5 * len * nrm.x();
      Ex(0, ib) += 0.5 * len * nrm.x();
      Ey(0, ia) += 0.5 * len * nrm.y();
      Ey(0, ib) += 0.5 * len * nrm.y();
    } else {
      const Vec2 mid = 0.5 * (a + b);
      const Vec ga = L.basis.grad(a) * nrm, gm = L.basis.grad(mid) * nrm, gb = L.basis.grad(b) * nrm;
      for (int al = 1; al < nk; ++al) {
        const auto w = detail::lobatto_weights(len, ga[al], gm[al], gb[al]);
        B(al, ia) += w[0];
        B(al, ib) += w[1];
        B(al, n + i) += w[2];
      }
      const Vec ma = L.basis.eval_upto(a, k - 1), mm = L.basis.eval_upto(mid, k - 1), mb = L.basis.eval_upto(b, k - 1);
      for (int be = 0; be < nk1; ++be) {
        const auto w = detail::lobatto_weights(len, ma[be], mm[be], mb[be]);
        Ex(be, ia) += w[0] * nrm.x();
        Ex(be, ib) += w[1] * nrm.x();
        Ex(be, n + i) += w[2] * nrm.x();
        Ey(be, ia) += w[0] * nrm.y();
        Ey(be, ib) += w[1] * nrm.y();
        Ey(be, n + i) += w[2] * nrm.y();
      }
    }
  }
  if (k == 2) {
    // volume terms: -int lap(m_a) v and -int d(m_b) v use the cell mean
    for (int al = 1; al < nk; ++al) {
      const auto [ax, ay] = monomial_exponent(al);
      const double lap = (ax * (ax - 1) * (ay == 0) + ay * (ay - 1) * (ax == 0)) / (L.h * L.h);
      B(al, 2 * n) -= lap * L.area;
    }
    Ex(1, 2 * n) -= L.area / L.h;
    Ey(2, 2 * n) -= L.area / L.h;
  }
  const Mat G = B * L.Dm;
  const Eigen::FullPivLU<Mat> Glu(G);
  if (!Glu.isInvertible()) throw Error("SingularG");
  L.Pnabla = Glu.solve(B);

  // L2 projector from the enhancement moments
  Mat C = L.H * L.Pnabla;
  if (k == 2) {
    C.row(0).setZero();
    C(0, 2 * n) = L.area;
  }
  const Eigen::LDLT<Mat> Hl(L.H);
  L.P0 = Hl.solve(C);
  const Eigen::LDLT<Mat> H1(L.H.topLeftCorner(nk1, nk1));
  L.P0gx = H1.solve(Ex);
  L.P0gy = H1.solve(Ey);
  L.Pi = L.Dm * L.P0;

  // coefficient bounds sampled at quadrature points
  L.a_lo = 1e300;
  L.a_hi = 0;
  L.r_lo = 1e300;
  L.r_hi = 0;
  L.A = Mat::Zero(L.ndof, L.ndof);
  L.M = Mat::Zero(L.ndof, L.ndof);
  Mat Gq(2, L.ndof);
  for (int q = 0; q < np; ++q) {
    const Vec2& x = L.quad.x[q];
    const double w = L.quad.w[q];
    const Mat2 Dx = prob.D(x);
    const Eigen::SelfAdjointEigenSolver<Mat2> es(Dx);
    L.a_lo = std::min(L.a_lo, es.eigenvalues()[0]);
    L.a_hi = std::max(L.a_hi, es.eigenvalues()[1]);
    const double rx = prob.r(x);
    L.r_lo = std::min(L.r_lo, rx);
    L.r_hi = std::max(L.r_hi, std::abs(rx));
    const Vec m1 = L.Mq.row(q).head(nk1).transpose();
    Gq.row(0) = m1.transpose() * L.P0gx;
    Gq.row(1) = m1.transpose() * L.P0gy;
    const Eigen::RowVectorXd pv = L.Mq.row(q) * L.P0;
    L.A.noalias() += w * (Gq.transpose() * Dx * Gq + rx * pv.transpose() * pv);
    L.M.noalias() += w * pv.transpose() * pv;
  }
  L.sigma = std::sqrt(L.a_lo * L.a_hi) + std::sqrt(std::max(0.0, L.r_lo) * L.r_hi) * L.h * L.h;
  const Mat IP = Mat::Identity(L.ndof, L.ndof) - L.Pi;
  const Mat S = IP.transpose() * IP;
  L.A += L.sigma * S;
  L.M += L.h * L.h * S;
  return L;
}



class VemSpace;

/// Projections of a VEM function: Pi0_k for values and Hessians, Pi0_{k-1} grad for gradients.
class VemView final : public FieldView {
 public:
  VemView(const std::vector<LocalVemOps>& ops, const Vec& u) : ops_(ops) {
    pk_.resize(ops.size());
    gx_.resize(ops.size());
    gy_.resize(ops.size());
    for (std::size_t c = 0; c < ops.size(); ++c) {
      const auto& L = ops[c];
      Vec loc(L.ndof);
      for (int i = 0; i < L.ndof; ++i) loc[i] = u[L.dofs[i]];
      pk_[c] = L.P0 * loc;
      gx_[c] = L.P0gx * loc;
      gy_[c] = L.P0gy * loc;
    }
  }
  double value(int c, const Vec2& x) const override { return ops_[c].basis.eval(x).dot(pk_[c]); }
  Vec2 grad(int c, const Vec2& x) const override {
    const Vec m = ops_[c].basis.eval_upto(x, ops_[c].k - 1);
    return {m.dot(gx_[c]), m.dot(gy_[c])};
  }
  Eigen::Vector3d hess(int c, const Vec2& x) const override {
    return ops_[c].basis.hessian(x).transpose() * pk_[c];
  }
  const Vec& coef(int c) const { return pk_[c]; }

 private:
  const std::vector<LocalVemOps>& ops_;
  std::vector<Vec> pk_, gx_, gy_;
};

/// Global virtual element space of order k.
class VemSpace final : public DiscreteSpace {
 public:
  std::shared_ptr<const PolyMesh> mesh;
  int k = 1;
  double C_stab = 1.0;
  std::vector<LocalVemOps> ops;

  VemSpace(std::shared_ptr<const PolyMesh> m, const ProblemData& p, int degree, double cstab = 1.0)
      : mesh(std::move(m)), k(degree), C_stab(cstab) {
    prob = &p;
    const PolyMesh& pm = *mesh;
    const int nv = pm.num_vertices(), ne = pm.num_edges();
    ndofs = k == 1 ? nv : nv + ne + pm.num_cells();
    boundary.assign(ndofs, 0);
    for (int v = 0; v < nv; ++v) boundary[v] = pm.vertex_on_boundary[v];
    if (k == 2)
      for (int e = 0; e < ne; ++e) boundary[nv + e] = pm.boundary_edge(e);
    setup_dofs();
    ops.reserve(pm.num_cells());
    std::vector<Eigen::Triplet<double>> tm, ta;
    for (int c = 0; c < pm.num_cells(); ++c) {
      ops.push_back(build_local_ops(pm, c, k, p));
      const LocalVemOps& L = ops.back();
      for (int i = 0; i < L.ndof; ++i)
        for (int j = 0; j < L.ndof; ++j) {
          tm.emplace_back(L.dofs[i], L.dofs[j], L.M(i, j));
          ta.emplace_back(L.dofs[i], L.dofs[j], L.A(i, j));
        }
    }
    M.resize(ndofs, ndofs);
    A.resize(ndofs, ndofs);
    M.setFromTriplets(tm.begin(), tm.end());
    A.setFromTriplets(ta.begin(), ta.end());
    finish_forms();
  }

  const PolyMesh& poly_mesh() const override { return *mesh; }
  bool is_vem() const override { return true; }
  int degree() const override { return k; }

  Vec gather(const Vec& u, int c) const {
    const auto& d = ops[c].dofs;
    Vec v(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) v[i] = u[d[i]];
    return v;
  }

  /// Coefficients of Pi0_k u on cell c.
  Vec proj(const Vec& u, int c) const { return ops[c].P0 * gather(u, c); }

  /// Vertex values, edge means and cell means of f.
  Vec interpolate(const ScalarField& f, bool zero_boundary = true) const override {
    const PolyMesh& pm = *mesh;
    Vec u = Vec::Zero(ndofs);
    for (int v = 0; v < pm.num_vertices(); ++v) u[v] = f(pm.vertices[v]);
    if (k == 2) {
      const int nv = pm.num_vertices(), ne = pm.num_edges();
      for (int e = 0; e < ne; ++e) {
        const auto sq = segment_quadrature(pm.vertices[pm.edges[e].v0], pm.vertices[pm.edges[e].v1], 2 * k + 4);
        double s = 0;
        for (std::size_t q = 0; q < sq.size(); ++q) s += sq.w[q] * f(sq.x[q]);
        u[nv + e] = s / pm.h_edge[e];
      }
      for (int c = 0; c < pm.num_cells(); ++c) {
        const auto cq = polygon_quadrature(pm.polygon(c), 2 * k + 4);
        double s = 0;
        for (std::size_t q = 0; q < cq.size(); ++q) s += cq.w[q] * f(cq.x[q]);
        u[nv + ne + c] = s / pm.area[c];
      }
    }
    if (zero_boundary)
      for (int i = 0; i < ndofs; ++i)
        if (boundary[i]) u[i] = 0.0;
    return u;
  }

  /// Per-cell moments int_c g m_a.
  Vec moments(const CellField& g, int c) const {
    const LocalVemOps& L = ops[c];
    Vec gw(L.quad.size());
    for (std::size_t q = 0; q < L.quad.size(); ++q) gw[q] = L.quad.w[q] * g(c, L.quad.x[q]);
    return L.Mq.transpose() * gw;
  }

  Vec load(const CellField& g) const override {
    Vec b = Vec::Zero(ndofs);
    for (int c = 0; c < num_cells(); ++c) {
      const Vec lc = ops[c].P0.transpose() * moments(g, c);
      for (int i = 0; i < ops[c].ndof; ++i) b[ops[c].dofs[i]] += lc[i];
    }
    return b;
  }

  std::unique_ptr<FieldView> view(const Vec& u) const override { return std::make_unique<VemView>(ops, u); }
  const QuadratureRule& cell_quadrature(int c) const override { return ops[c].quad; }

  /// Coefficients of the L2 projection of g onto P_k(c).
  Vec project_coef(const CellField& g, int c) const { return ops[c].H.ldlt().solve(moments(g, c)); }

  Vec project_at_quad(const CellField& g, int c) const override { return ops[c].Mq * project_coef(g, c); }

  std::pair<double, double> inconsistency(const Vec& u, int c) const override {
    const LocalVemOps& L = ops[c];
    const Vec loc = gather(u, c);
    const Vec w = loc - L.Pi * loc;
    const double psiL2 = std::sqrt(std::max(0.0, (1.0 + C_stab) * w.dot(L.M * w)));
    const int nk1 = poly_dim(k - 1);
    const Vec gx = L.P0gx * loc, gy = L.P0gy * loc, pk = L.P0 * loc;
    const int np = int(L.quad.size());
    Mat qv(np, 3);  // D grad components and r p at quadrature points
    for (int q = 0; q < np; ++q) {
      const Vec2 x = L.quad.x[q];
      const Vec m1 = L.Mq.row(q).head(nk1).transpose();
      const Vec2 dg = prob->D(x) * Vec2(m1.dot(gx), m1.dot(gy));
      qv(q, 0) = dg.x();
      qv(q, 1) = dg.y();
      qv(q, 2) = prob->r(x) * L.Mq.row(q).dot(pk);
    }
    const Eigen::Map<const Vec> wts(L.quad.w.data(), np);
    const Mat Mk1 = L.Mq.leftCols(nk1);
    const Eigen::LDLT<Mat> H1(L.H.topLeftCorner(nk1, nk1));
    double t1 = 0;
    for (int comp = 0; comp < 2; ++comp) {
      const Vec res = qv.col(comp) - Mk1 * H1.solve(Mk1.transpose() * wts.asDiagonal() * qv.col(comp));
      t1 += res.dot(wts.asDiagonal() * res);
    }
    const Vec res2 = qv.col(2) - L.Mq * L.H.ldlt().solve(L.Mq.transpose() * wts.asDiagonal() * qv.col(2));
    const double t2 = res2.dot(wts.asDiagonal() * res2);
    const double t3 = w.dot(L.A * w);
    const double ratio = L.a_hi / L.a_lo;
    const double cpf = prob->C_pf();
    const double CA = 1.0 + C_stab * std::sqrt(0.5 + 0.5 * ratio * ratio + 1.0 / (L.a_lo * L.a_lo) + cpf * cpf);
    return {psiL2, std::sqrt(std::max(0.0, CA * (t1 + t2 + t3)))};
  }

  double stab_norm(const Vec& u) const override {
    double s = 0;
    for (int c = 0; c < num_cells(); ++c) {
      const Vec loc = gather(u, c);
      const Vec w = loc - ops[c].Pi * loc;
      s += w.dot(ops[c].M * w);
    }
    return std::sqrt(std::max(0.0, s));
  }
};

}  // namespace pvem
