#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace pvem;
using Catch::Approx;

namespace {

double sine(const Vec2& x) { return std::sin(kPi * x.x()) * std::sin(kPi * x.y()); }

}  // namespace

TEST_CASE("identity warp gives the primitive mesh", "[fem]") {
  WarpMap w;
  w.amplitude = 0.0;
  const PolyMesh m = warp_mesh(w, 6, 0.3);
  const PolyMesh u = build_uniform_quad_mesh(6);
  REQUIRE(m.num_vertices() == u.num_vertices());
  for (int c = 0; c < m.num_cells(); ++c) CHECK((m.center[c] - u.center[c]).norm() < 1e-15);
}

TEST_CASE("warp is deterministic and fixes the boundary", "[fem]") {
  const WarpMap w;
  const auto a = warp_nodes(w, 16, 0.37), b = warp_nodes(w, 16, 0.37);
  CHECK(a == b);
  const PolyMesh m = warp_mesh(w, 16, 0.0);
  for (int v = 0; v < m.num_vertices(); ++v) {
    if (!m.vertex_on_boundary[v]) continue;
    const Vec2 x = m.vertices[v];
    CHECK(std::min({x.x(), x.y(), 1 - x.x(), 1 - x.y()}) < 1e-15);
  }
  CHECK(std::abs(m.total_area() - 1.0) < 1e-12);
}

TEST_CASE("default warp concentrates cells near the ring", "[fem]") {
  const PolyMesh m = warp_mesh(WarpMap{}, 32, 0.0);
  double hmin_in = 1e9, hmax_out = 0;
  for (int c = 0; c < m.num_cells(); ++c) {
    const double r = m.center[c].norm();
    if (r < 0.2) hmin_in = std::min(hmin_in, m.h_cell[c]);
    if (r > 0.5) hmax_out = std::max(hmax_out, m.h_cell[c]);
  }
  CHECK(hmin_in < hmax_out);
}

TEST_CASE("warped radial map is monotone with positive Jacobians", "[fem][property]") {
  const WarpMap w;
  for (double t : {0.0, 0.5, 1.0, 2.5, 5.0}) {
    double prev = 0;
    for (int i = 1; i <= 2000; ++i) {
      const double r = 1.5 * i / 2000;
      const double rho = w.radial(r, t);
      CHECK(rho > prev);
      prev = rho;
    }
    const ProblemData p;
    CHECK_NOTHROW(FemSpace(16, w, t, p));
  }
}

TEST_CASE("Q1 stiffness stencil on squares", "[fem]") {
  ProblemData p;
  const double alpha = 0.3;
  set_isotropic(p, alpha);
  WarpMap w;
  w.amplitude = 0.0;
  const int n = 5;
  const FemSpace sp(n, w, 0.0, p);
  const int centre = 2 * (n + 1) + 2;
  CHECK(sp.A.coeff(centre, centre) == Approx(8 * alpha / 3).epsilon(1e-13));
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di) {
      if (!di && !dj) continue;
      CHECK(sp.A.coeff(centre, centre + dj * (n + 1) + di) == Approx(-alpha / 3).epsilon(1e-13));
    }
  const double h2 = 1.0 / (n * n);
  CHECK(sp.M.coeff(centre, centre) == Approx(16 * h2 / 36).epsilon(1e-13));
  CHECK(sp.M.coeff(centre, centre + 1) == Approx(4 * h2 / 36).epsilon(1e-13));
}

TEST_CASE("FEM forms are symmetric and definite", "[fem]") {
  const ProblemData p;
  const FemSpace sp(8, WarpMap{}, 0.2, p);
  CHECK((Mat(sp.A) - Mat(sp.A).transpose()).norm() < 1e-12);
  const Vec one = Vec::Ones(sp.ndofs);
  CHECK((sp.A * one).lpNorm<Eigen::Infinity>() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> ea(Mat(sp.Aii)), em(Mat(sp.Mii));
  CHECK(ea.eigenvalues()[0] > 0);
  CHECK(em.eigenvalues()[0] > 0);
}

TEST_CASE("FEM inconsistency indicators vanish", "[fem]") {
  const ProblemData p;
  const FemSpace sp(6, WarpMap{}, 0.1, p);
  std::mt19937 rng(8);
  std::normal_distribution<double> N;
  Vec v(sp.ndofs);
  for (auto& x : v) x = N(rng);
  for (int c = 0; c < sp.num_cells(); ++c) {
    const auto [a, b] = sp.inconsistency(v, c);
    CHECK(a == 0.0);
    CHECK(b == 0.0);
  }
  CHECK(sp.stab_norm(v) == 0.0);
}

TEST_CASE("FEM elliptic transfer", "[fem]") {
  ProblemData p;
  p.u0 = sine;
  const FemSpace a(12, WarpMap{}, 0.0, p);
  const Vec v = a.interpolate(sine);
  SECTION("unchanged mesh is the identity") {
    const Vec tv = fem_elliptic_transfer(a, a, v, 0.0);
    CHECK((tv - v).norm() < 1e-10 * v.norm());
  }
  SECTION("zero function and zero data") {
    const FemSpace b(12, WarpMap{}, 0.3, p);
    CHECK(fem_elliptic_transfer(a, b, Vec::Zero(a.ndofs), 0.0).norm() == 0.0);
  }
  SECTION("transfer tends to the identity with the warp amplitude") {
    std::vector<double> d;
    for (double amp : {0.4, 0.2, 0.1, 0.05}) {
      WarpMap w;
      w.amplitude = amp;
      const FemSpace o(12, w, 0.0, p), nw(12, w, 0.5, p);
      const Vec vo = o.interpolate(sine);
      d.push_back((fem_elliptic_transfer(o, nw, vo, 0.0) - vo).norm());
    }
    for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i] < d[i - 1]);
  }
  SECTION("mismatched topology is rejected") {
    const FemSpace b(10, WarpMap{}, 0.3, p);
    CHECK_THROWS_AS(fem_elliptic_transfer(a, b, v, 0.0), Error);
  }
}
