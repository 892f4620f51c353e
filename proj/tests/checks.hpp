#pragma once

// Criterion checks shared by the unit tests and the acceptance binary.

#include "support.hpp"

#include <Eigen/Eigenvalues>

#include <sstream>

namespace checks {

using namespace pvem;
using testing_support::RawPoly;

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail_if(bool bad) { pass = pass && !bad; }
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

inline bool within(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

/// Anisotropic constant coefficients used by the consistency checks.
inline ProblemData constant_coefficients() {
  ProblemData p;
  p.D = [](const Vec2&) {
    Mat2 d;
    d << 2.0, 0.3, 0.3, 1.0;
    return d;
  };
  p.r = [](const Vec2&) { return 0.5; };
  p.a_lo = 0.9;
  p.a_hi = 2.1;
  p.r_lo = p.r_hi = 0.5;
  return p;
}

inline RawPoly derivative(const RawPoly& p, int dir) {
  RawPoly d;
  d.k = std::max(0, p.k - 1);
  for (auto [a, b, c] : p.terms) {
    if (dir == 0 && a > 0) d.terms.emplace_back(a - 1, b, c * a);
    if (dir == 1 && b > 0) d.terms.emplace_back(a, b - 1, c * b);
  }
  if (d.terms.empty()) d.terms.emplace_back(0, 0, 0.0);
  return d;
}

/// Worst relative consistency defect of A_h^E and m_h^E over random polygons and polynomials.
inline Outcome polynomial_consistency(int polygons, unsigned seed, double* worst_out = nullptr) {
  std::mt19937 rng(seed);
  const ProblemData prob = constant_coefficients();
  Mat2 D;
  D << 2.0, 0.3, 0.3, 1.0;
  double worst = 0;
  for (int t = 0; t < polygons; ++t) {
    const int nv = 3 + int(rng() % 8);
    const auto poly = testing_support::random_polygon(rng, nv);
    const PolyMesh mesh = testing_support::single_cell_mesh(poly);
    for (int k = 1; k <= 2; ++k) {
      const VemSpace vs(std::make_shared<PolyMesh>(mesh), prob, k);
      const LocalVemOps& L = vs.ops[0];
      for (int pair = 0; pair < 3; ++pair) {
        const RawPoly p = RawPoly::random(rng, k), q = RawPoly::random(rng, k);
        const Vec up = vs.gather(vs.interpolate(p, false), 0), uq = vs.gather(vs.interpolate(q, false), 0);
        double a_exact = 0.5 * testing_support::integrate_terms(poly, p.times(q));
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            a_exact += D(i, j) * testing_support::integrate_terms(poly, derivative(p, j).times(derivative(q, i)));
        const double m_exact = testing_support::integrate_terms(poly, p.times(q));
        const double a_h = up.dot(L.A * uq), m_h = up.dot(L.M * uq);
        worst = std::max(worst, std::abs(a_h - a_exact) / (1 + std::abs(a_exact)));
        worst = std::max(worst, std::abs(m_h - m_exact) / (1 + std::abs(m_exact)));
      }
    }
  }
  if (worst_out) *worst_out = worst;
  Outcome o;
  o.fail_if(!(worst <= 1e-10));
  o.detail = "max relative defect " + fmt(worst);
  return o;
}

/// Independent computation of Pi^nabla and Pi^0_k from the dof vector of one cell,
/// in raw monomials about the origin, via Green's formula with the explicit edge traces.
struct ProjectorOracle {
  std::vector<std::pair<int, int>> exps;
  Vec pnabla, p0;

  double eval(const Vec& c, const Vec2& x) const {
    double s = 0;
    for (std::size_t i = 0; i < exps.size(); ++i) s += c[i] * testing_support::mono(exps[i].first, exps[i].second, x);
    return s;
  }
};

inline ProjectorOracle projector_oracle(const std::vector<Vec2>& poly, int k, const Vec& dofs) {
  ProjectorOracle o;
  for (int d = 0; d <= k; ++d)
    for (int b = 0; b <= d; ++b) o.exps.emplace_back(d - b, b);
  const int nk = int(o.exps.size()), n = int(poly.size());
  const double area = testing_support::integrate_monomial(poly, 0, 0);
  std::vector<double> gx, gw;
  testing_support::legendre_rule(16, gx, gw);
  auto trace = [&](int e, double t) {
    const double a = dofs[e], b = dofs[(e + 1) % n];
    double v = a * (1 - t) + b * t;
    if (k == 2) v += (dofs[n + e] - 0.5 * (a + b)) * 6 * t * (1 - t);
    return v;
  };
  Mat G = Mat::Zero(nk, nk);
  Vec rhs = Vec::Zero(nk);
  for (int i = 1; i < nk; ++i) {
    RawPoly mi;
    mi.terms = {{o.exps[i].first, o.exps[i].second, 1.0}};
    for (int j = 0; j < nk; ++j) {
      RawPoly mj;
      mj.terms = {{o.exps[j].first, o.exps[j].second, 1.0}};
      G(i, j) = testing_support::integrate_terms(poly, mi.grad_dot(mj));
    }
    for (int e = 0; e < n; ++e) {
      const Vec2 A = poly[e], B = poly[(e + 1) % n];
      const Vec2 d = B - A;
      const Vec2 nrm = Vec2(d.y(), -d.x()) / d.norm();
      for (std::size_t q = 0; q < gx.size(); ++q) {
        const double t = 0.5 * (1 + gx[q]);
        rhs[i] += 0.5 * gw[q] * d.norm() * trace(e, t) * mi.grad(A + t * d).dot(nrm);
      }
    }
    if (k == 2) {
      const auto [a, b] = o.exps[i];
      const double lap = (a == 2 && b == 0) || (a == 0 && b == 2) ? 2.0 : 0.0;
      rhs[i] -= lap * area * dofs[2 * n];
    }
  }
  if (k == 1) {
    for (int j = 0; j < nk; ++j) {
      double s = 0;
      for (const Vec2& v : poly) s += testing_support::mono(o.exps[j].first, o.exps[j].second, v);
      G(0, j) = s / n;
    }
    rhs[0] = dofs.head(n).mean();
  } else {
    for (int j = 0; j < nk; ++j) G(0, j) = testing_support::integrate_monomial(poly, o.exps[j].first, o.exps[j].second);
    rhs[0] = area * dofs[2 * n];
  }
  o.pnabla = G.fullPivLu().solve(rhs);
  if (k == 1) {
    o.p0 = o.pnabla;
    return o;
  }
  Mat H(nk, nk);
  Vec mom(nk);
  for (int i = 0; i < nk; ++i) {
    for (int j = 0; j < nk; ++j)
      H(i, j) = testing_support::integrate_monomial(poly, o.exps[i].first + o.exps[j].first,
                                                    o.exps[i].second + o.exps[j].second);
    mom[i] = H.row(i).dot(o.pnabla);
  }
  mom[0] = area * dofs[2 * n];
  o.p0 = H.fullPivLu().solve(mom);
  return o;
}

inline Outcome projector_equivalence(int polygons, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  ProblemData prob;
  double worst = 0;
  for (int t = 0; t < polygons; ++t) {
    const auto poly = testing_support::random_polygon(rng, 3 + int(rng() % 8));
    const PolyMesh mesh = testing_support::single_cell_mesh(poly);
    for (int k = 1; k <= 2; ++k) {
      const LocalVemOps L = build_local_ops(mesh, 0, k, prob);
      Vec loc(L.ndof);
      for (int i = 0; i < L.ndof; ++i) loc[i] = U(rng);
      // local dofs follow the cell's own vertex order
      std::vector<Vec2> pts;
      for (int v : mesh.cells[0]) pts.push_back(mesh.vertices[v]);
      const ProjectorOracle o = projector_oracle(pts, k, loc);
      const Vec cn = L.Pnabla * loc, c0 = L.P0 * loc;
      double scale = 0, en = 0, e0 = 0;
      for (std::size_t q = 0; q < L.quad.size(); ++q) {
        const Vec2 x = L.quad.x[q];
        const Vec m = L.basis.eval(x);
        scale = std::max(scale, std::abs(o.eval(o.pnabla, x)));
        en = std::max(en, std::abs(m.dot(cn) - o.eval(o.pnabla, x)));
        e0 = std::max(e0, std::abs(m.dot(c0) - o.eval(o.p0, x)));
      }
      worst = std::max({worst, en / scale, e0 / scale});
    }
  }
  Outcome o;
  o.fail_if(!(worst <= 1e-6));
  o.detail = "max relative deviation " + fmt(worst);
  return o;
}

/// LocalLagrange round trip, polynomial preservation and FEM elliptic identity.
inline Outcome transfer_round_trips(unsigned seed) {
  std::mt19937 rng(seed);
  ProblemData prob;
  double round = 0, poly_err = 0, fem_id = 0;
  for (int k = 1; k <= 2; ++k) {
    auto m0 = std::make_shared<PolyMesh>(build_uniform_quad_mesh(6));
    AdaptForest& F = *m0->forest;
    std::set<int> marks;
    while (marks.size() < 8) marks.insert(int(rng() % m0->num_cells()));
    auto m1 = std::make_shared<PolyMesh>(refine_cells(*m0, F, marks));
    // coarsen each refined family on its own so that patches cannot mix families
    auto m2 = m1;
    for (int c0 : marks) {
      std::set<int> fam;
      for (int c = 0; c < m2->num_cells(); ++c)
        if (F.nodes[m2->node[c]].parent == m0->node[c0]) fam.insert(c);
      m2 = std::make_shared<PolyMesh>(coarsen_patches(*m2, F, fam).mesh);
    }
    const VemSpace s0(m0, prob, k), s1(m1, prob, k), s2(m2, prob, k);
    Vec v(s0.ndofs);
    for (int i = 0; i < v.size(); ++i) v[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
    const Vec rt = local_transfer(s1, s2, local_transfer(s0, s1, v));
    round = std::max(round, (rt - v).cwiseAbs().maxCoeff());

    // agglomerate a patch of a uniform mesh and refine it back
    std::set<int> patch = {7, 8, 13, 14};
    CoarsenResult ag = coarsen_patches(*m0, F, patch);
    auto m3 = std::make_shared<PolyMesh>(ag.mesh);
    const VemSpace s3(m3, prob, k);
    const RawPoly p = RawPoly::random(rng, k);
    const Vec pi0 = s0.interpolate(p, false);
    poly_err = std::max(poly_err, (local_transfer(s0, s1, pi0) - s1.interpolate(p, false)).cwiseAbs().maxCoeff());
    poly_err = std::max(poly_err, (local_transfer(s0, s3, pi0) - s3.interpolate(p, false)).cwiseAbs().maxCoeff());
    poly_err = std::max(poly_err, (local_transfer(s3, s0, s3.interpolate(p, false)) - pi0).cwiseAbs().maxCoeff());
  }
  {
    const ProblemData hp = hat_problem();
    const FemSpace a(8, WarpMap{}, 0.3, hp), b(8, WarpMap{}, 0.3, hp);
    Vec v = a.interpolate(hp.u0, false);
    for (int i = 0; i < v.size(); ++i) v[i] += 0.1 * std::sin(3.0 * i);
    fem_id = (fem_elliptic_transfer(a, b, v, 0.3) - v).cwiseAbs().maxCoeff();
  }
  Outcome o;
  o.fail_if(!(round <= 1e-10 && poly_err <= 1e-10 && fem_id <= 1e-10));
  o.detail = "round trip " + fmt(round) + ", polynomial " + fmt(poly_err) + ", fem elliptic identity " + fmt(fem_id);
  return o;
}

/// ||beta_r||_{L^q(0,r)} by composite Gauss quadrature.
inline double weight_by_quadrature(int p, double r, double alpha) {
  if (p == 1) {
    double mx = 0;  // sup of exp(alpha (s - r)) sampled densely
    for (int i = 0; i <= 4000; ++i) mx = std::max(mx, std::exp(alpha * (r * i / 4000.0 - r)));
    return mx;
  }
  const double q = p == 2 ? 2.0 : 1.0;
  std::vector<double> gx, gw;
  testing_support::legendre_rule(20, gx, gw);
  const int panels = 200;
  double s = 0;
  for (int j = 0; j < panels; ++j) {
    const double a = r * j / panels, b = r * (j + 1) / panels;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double x = 0.5 * (a + b) + 0.5 * (b - a) * gx[i];
      s += 0.5 * (b - a) * gw[i] * std::pow(std::exp(alpha * (x - r)), q);
    }
  }
  return std::pow(s, 1.0 / q);
}

inline Outcome accumulation_weights(int samples, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  double worst = 0;
  for (int i = 0; i < samples; ++i) {
    const int p = std::array<int, 3>{1, 2, 0}[rng() % 3];
    const double r = 0.05 + 4.95 * U(rng);
    const double lambda = 0.05 + 0.9 * U(rng);
    ProblemData prob;
    set_isotropic(prob, 0.01 + U(rng));
    const double alpha = alpha_lambda(prob, lambda);
    const double c = accumulation_weight(p, r, alpha), ref = weight_by_quadrature(p, r, alpha);
    worst = std::max(worst, std::abs(c - ref) / std::max(1.0, std::abs(ref)));
  }
  Outcome o;
  o.fail_if(!(worst <= 1e-12));
  o.detail = "max deviation " + fmt(worst);
  return o;
}

}  // namespace checks
