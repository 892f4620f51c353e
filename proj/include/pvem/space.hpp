#pragma once

#include "pvem/mesh.hpp"
#include "pvem/problem.hpp"
#include "pvem/quadrature.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <functional>
#include <memory>

namespace pvem {

using SpMat = Eigen::SparseMatrix<double>;
using CellField = std::function<double(int, const Vec2&)>;

/// Pointwise access to the computable reconstruction of a discrete function.
class FieldView {
 public:
  virtual ~FieldView() = default;
  virtual double value(int c, const Vec2& x) const = 0;
  /// Gradient used by the discrete bilinear form.
  virtual Vec2 grad(int c, const Vec2& x) const = 0;
  /// Hessian (xx, xy, yy) of the reconstruction.
  virtual Eigen::Vector3d hess(int c, const Vec2& x) const = 0;
};

/// Conforming or virtual discrete space with assembled mass and stiffness forms.
/// Dirichlet dofs are eliminated from the reduced (interior) systems.
class DiscreteSpace {
 public:
  virtual ~DiscreteSpace() = default;

  virtual const PolyMesh& poly_mesh() const = 0;
  virtual bool is_vem() const = 0;
  virtual int degree() const = 0;
  virtual Vec interpolate(const ScalarField& f, bool zero_boundary = true) const = 0;
  /// (g, Pi phi_j) for all dofs j, with Pi the value projection of the space.
  virtual Vec load(const CellField& g) const = 0;
  virtual std::unique_ptr<FieldView> view(const Vec& u) const = 0;
  virtual const QuadratureRule& cell_quadrature(int c) const = 0;
  /// Projection of a field onto the local polynomial space, evaluated at the
  /// points of cell_quadrature(c). Identity for conforming spaces.
  virtual Vec project_at_quad(const CellField& g, int c) const = 0;
  /// Local inconsistency indicators (L2 type, energy type); zero when conforming.
  virtual std::pair<double, double> inconsistency(const Vec&, int) const { return {0.0, 0.0}; }
  /// ||(I - Pi) u||_h over the mesh; zero when conforming.
  virtual double stab_norm(const Vec&) const { return 0.0; }

  const ProblemData* prob = nullptr;
  int ndofs = 0;
  std::vector<char> boundary;
  std::vector<int> interior;
  std::vector<int> to_interior;
  SpMat M, A;
  SpMat Mii, Aii;

  int num_cells() const { return poly_mesh().num_cells(); }
  int num_interior() const { return int(interior.size()); }

  Vec boundary_values(const ScalarField& f) const {
    Vec u = interpolate(f, false);
    for (int i = 0; i < ndofs; ++i)
      if (!boundary[i]) u[i] = 0.0;
    return u;
  }

  SpMat restrict_interior(const SpMat& S) const {
    std::vector<Eigen::Triplet<double>> t;
    for (int col = 0; col < S.outerSize(); ++col)
      for (SpMat::InnerIterator it(S, col); it; ++it) {
        const int i = to_interior[it.row()], j = to_interior[it.col()];
        if (i >= 0 && j >= 0) t.emplace_back(i, j, it.value());
      }
    SpMat R(num_interior(), num_interior());
    R.setFromTriplets(t.begin(), t.end());
    return R;
  }

  /// Interior-by-boundary block of S applied to the boundary part of u.
  Vec coupling(const SpMat& S, const Vec& u) const {
    Vec ub = u;
    for (int i = 0; i < ndofs; ++i)
      if (!boundary[i]) ub[i] = 0.0;
    return to_reduced(S * ub);
  }

  Vec to_reduced(const Vec& u) const {
    Vec r(num_interior());
    for (int i = 0; i < num_interior(); ++i) r[i] = u[interior[i]];
    return r;
  }

  Vec from_reduced(const Vec& r, const Vec* boundary_src = nullptr) const {
    Vec u = Vec::Zero(ndofs);
    if (boundary_src)
      for (int i = 0; i < ndofs; ++i)
        if (boundary[i]) u[i] = (*boundary_src)[i];
    for (int i = 0; i < num_interior(); ++i) u[interior[i]] = r[i];
    return u;
  }

  const Eigen::SimplicialLDLT<SpMat>& mass_solver() const {
    if (!mass_solver_) {
      mass_solver_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(Mii);
      if (mass_solver_->info() != Eigen::Success) throw Error("SolverFail: mass factorization");
    }
    return *mass_solver_;
  }

  const Eigen::SimplicialLDLT<SpMat>& stiffness_solver() const {
    if (!stiff_solver_) {
      stiff_solver_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(Aii);
      if (stiff_solver_->info() != Eigen::Success) throw Error("SolverFail: stiffness factorization");
    }
    return *stiff_solver_;
  }

  /// Factorization of M/tau + A on the interior, cached per step size.
  const Eigen::SimplicialLDLT<SpMat>& step_solver(double tau) const {
    if (!step_solver_ || step_tau_ != tau) {
      SpMat S = Mii / tau + Aii;
      step_solver_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(S);
      if (step_solver_->info() != Eigen::Success) throw Error("SolverFail: step factorization");
      step_tau_ = tau;
    }
    return *step_solver_;
  }

  /// x with m_h(x, phi) = rhs(phi) for interior phi, zero on the boundary.
  Vec solve_mass(const Vec& rhs_full) const {
    if (num_interior() == 0) return Vec::Zero(ndofs);
    return from_reduced(mass_solver().solve(to_reduced(rhs_full)));
  }

  /// -m_h(L_h v, phi) = a_h(v, phi) for interior phi.
  Vec discrete_laplacian(const Vec& v) const { return solve_mass(-(A * v)); }

  /// Discrete L2 projection P~ g of a field.
  Vec l2_recon(const CellField& g) const { return solve_mass(load(g)); }

  double mass_norm2(const Vec& u) const { return u.dot(M * u); }
  double energy_norm2(const Vec& u) const { return u.dot(A * u); }

 protected:
  void setup_dofs() {
    to_interior.assign(ndofs, -1);
    interior.clear();
    for (int i = 0; i < ndofs; ++i)
      if (!boundary[i]) {
        to_interior[i] = int(interior.size());
        interior.push_back(i);
      }
  }
  void finish_forms() {
    Mii = restrict_interior(M);
    Aii = restrict_interior(A);
  }

 private:
  mutable std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> mass_solver_, stiff_solver_, step_solver_;
  mutable double step_tau_ = -1.0;
};

}  // namespace pvem
