#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mesh.hpp"

namespace lodelast {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Vec2 = std::array<double, 2>;

/// Dof index of component `comp` (0 = x, 1 = y) at `node`.
inline int dof(int node, int comp) { return 2 * node + comp; }

/**
 * Isotropic Lame parameters, constant on the cells of a Cartesian grid of
 * width 1/grid_n over the unit square. Cell (i, j) has index j*grid_n+i.
 */
class CoefficientField {
 public:
  CoefficientField(int grid_n, std::vector<double> mu, std::vector<double> lambda)
      : grid_n_(grid_n), mu_(std::move(mu)), lambda_(std::move(lambda)) {
    if (grid_n_ < 1) throw std::invalid_argument("coefficient grid size must be positive");
    const auto cells = static_cast<std::size_t>(grid_n_) * grid_n_;
    if (mu_.size() != cells || lambda_.size() != cells)
      throw std::invalid_argument("coefficient arrays must have grid_n^2 entries");
    for (std::size_t c = 0; c < cells; ++c)
      if (!(mu_[c] > 0.0) || !(lambda_[c] > 0.0))
        throw std::invalid_argument("Lame parameters must be positive (cell " + std::to_string(c) + ")");
  }

  int grid_n() const { return grid_n_; }
  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& lambda() const { return lambda_; }

  int cell_at(const Point& x) const {
    auto clamp = [this](double s) { return std::min(grid_n_ - 1, std::max(0, static_cast<int>(std::floor(s * grid_n_)))); };
    return clamp(x[1]) * grid_n_ + clamp(x[0]);
  }
  double mu_at(const Point& x) const { return mu_[cell_at(x)]; }
  double lambda_at(const Point& x) const { return lambda_[cell_at(x)]; }

  double min_mu() const { return *std::min_element(mu_.begin(), mu_.end()); }
  double max_mu() const { return *std::max_element(mu_.begin(), mu_.end()); }
  double max_lambda() const { return *std::max_element(lambda_.begin(), lambda_.end()); }

  bool resolved_by(const Mesh& mesh) const { return mesh.level_size() % grid_n_ == 0; }

  bool operator==(const CoefficientField&) const = default;

 private:
  int grid_n_;
  std::vector<double> mu_;
  std::vector<double> lambda_;
};

/// Free / Dirichlet-constrained partition of the 2*num_nodes dofs.
struct DofMap {
  std::vector<int> free;           // global dof indices, increasing
  std::vector<int> free_index;     // global dof -> position in `free`, -1 if constrained
  std::size_t num_dofs = 0;

  explicit DofMap(const Mesh& mesh) {
    num_dofs = 2 * mesh.num_nodes();
    free_index.assign(num_dofs, -1);
    for (int v = 0; v < static_cast<int>(mesh.num_nodes()); ++v) {
      if (mesh.is_dirichlet(v)) continue;
      for (int c = 0; c < 2; ++c) {
        free_index[dof(v, c)] = static_cast<int>(free.size());
        free.push_back(dof(v, c));
      }
    }
  }

  std::size_t num_free() const { return free.size(); }
  bool is_free(int d) const { return free_index[d] >= 0; }

  Vector restrict(const Vector& full) const {
    Vector r(free.size());
    for (std::size_t i = 0; i < free.size(); ++i) r[i] = full[free[i]];
    return r;
  }
  Vector extend(const Vector& reduced) const {
    Vector f = Vector::Zero(num_dofs);
    for (std::size_t i = 0; i < free.size(); ++i) f[free[i]] = reduced[i];
    return f;
  }
};

/// Gradients of the three barycentric coordinates of triangle t.
inline std::array<Vec2, 3> barycentric_gradients(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangle(t);
  const double two_area = 2.0 * mesh.signed_area(t);
  std::array<Vec2, 3> g;
  for (int a = 0; a < 3; ++a) {
    const Point& pb = mesh.node(tri[(a + 1) % 3]);
    const Point& pc = mesh.node(tri[(a + 2) % 3]);
    g[a] = {(pb[1] - pc[1]) / two_area, (pc[0] - pb[0]) / two_area};
  }
  return g;
}

using ElementMatrix = Eigen::Matrix<double, 6, 6>;

/// Local stiffness of 2 mu eps(u):eps(v) + lambda div u div v, local dof 2*a+i.
inline ElementMatrix element_stiffness(const Mesh& mesh, int t, double mu, double lambda) {
  const auto g = barycentric_gradients(mesh, t);
  const double area = mesh.signed_area(t);
  ElementMatrix k;
  for (int a = 0; a < 3; ++a)
    for (int i = 0; i < 2; ++i)
      for (int b = 0; b < 3; ++b)
        for (int j = 0; j < 2; ++j) {
          const double dot = g[a][0] * g[b][0] + g[a][1] * g[b][1];
          k(2 * a + i, 2 * b + j) =
              area * (mu * ((i == j ? dot : 0.0) + g[a][j] * g[b][i]) + lambda * g[a][i] * g[b][j]);
        }
  return k;
}

inline ElementMatrix element_stiffness(const Mesh& mesh, int t, const CoefficientField& coeff) {
  const Point b = mesh.barycenter(t);
  return element_stiffness(mesh, t, coeff.mu_at(b), coeff.lambda_at(b));
}

inline void check_resolution(const Mesh& mesh, const CoefficientField& coeff) {
  if (!coeff.resolved_by(mesh))
    throw std::invalid_argument("mesh level " + std::to_string(mesh.level_size()) +
                                " does not resolve coefficient grid " + std::to_string(coeff.grid_n()));
}

/// Stiffness over all 2*num_nodes dofs, Dirichlet dofs included.
inline SparseMatrix assemble_full_stiffness(const Mesh& mesh, const CoefficientField& coeff) {
  check_resolution(mesh, coeff);
  std::vector<Triplet> trip;
  trip.reserve(36 * mesh.num_triangles());
  for (int t = 0; t < static_cast<int>(mesh.num_triangles()); ++t) {
    const ElementMatrix k = element_stiffness(mesh, t, coeff);
    const auto& tri = mesh.triangle(t);
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) trip.emplace_back(dof(tri[a / 2], a % 2), dof(tri[b / 2], b % 2), k(a, b));
  }
  const auto n = static_cast<Eigen::Index>(2 * mesh.num_nodes());
  SparseMatrix K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

/// Rows/columns of `full` indexed by `keep` (increasing, distinct).
inline SparseMatrix principal_submatrix(const SparseMatrix& full, const std::vector<int>& keep) {
  std::vector<int> map(full.rows(), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) map[keep[i]] = static_cast<int>(i);
  std::vector<Triplet> trip;
  for (std::size_t jc = 0; jc < keep.size(); ++jc)
    for (SparseMatrix::InnerIterator it(full, keep[jc]); it; ++it)
      if (map[it.row()] >= 0) trip.emplace_back(map[it.row()], static_cast<int>(jc), it.value());
  const auto n = static_cast<Eigen::Index>(keep.size());
  SparseMatrix sub(n, n);
  sub.setFromTriplets(trip.begin(), trip.end());
  return sub;
}

/// Stiffness restricted to free dofs (symmetric elimination of Dirichlet dofs).
inline SparseMatrix assemble_stiffness(const Mesh& mesh, const CoefficientField& coeff, const DofMap& dofs) {
  return principal_submatrix(assemble_full_stiffness(mesh, coeff), dofs.free);
}

/// Action w -> B(v, w)_T over the fine elements whose coarse parent is T.
inline Vector assemble_elementwise_rhs(const Mesh& fine, const CoefficientField& coeff,
                                       const std::vector<int>& fine_elements_of_T, const Vector& v) {
  Vector r = Vector::Zero(static_cast<Eigen::Index>(2 * fine.num_nodes()));
  for (int t : fine_elements_of_T) {
    const auto& tri = fine.triangle(t);
    Eigen::Matrix<double, 6, 1> local;
    for (int a = 0; a < 6; ++a) local[a] = v[dof(tri[a / 2], a % 2)];
    const Eigen::Matrix<double, 6, 1> kv = element_stiffness(fine, t, coeff) * local;
    for (int a = 0; a < 6; ++a) r[dof(tri[a / 2], a % 2)] += kv[a];
  }
  return r;
}

inline Vector assemble_elementwise_rhs(const Mesh& fine, const CoefficientField& coeff, int T_coarse,
                                       const Vector& v) {
  if (!fine.has_parent_map()) throw std::invalid_argument("elementwise rhs needs a parent map");
  check_resolution(fine, coeff);
  std::vector<int> elems;
  for (int t = 0; t < static_cast<int>(fine.num_triangles()); ++t)
    if (fine.parent(t) == T_coarse) elems.push_back(t);
  return assemble_elementwise_rhs(fine, coeff, elems, v);
}

using VectorFunction = std::function<Vec2(const Point&)>;

/// Body force: either a constant vector (integrated exactly) or a function.
using BodyForce = std::variant<Vec2, VectorFunction>;

/// Consistent P1 load (f, phi_i). Non-constant f uses the 3-point degree-2 rule.
inline Vector assemble_load(const Mesh& mesh, const BodyForce& f) {
  Vector r = Vector::Zero(static_cast<Eigen::Index>(2 * mesh.num_nodes()));
  for (int t = 0; t < static_cast<int>(mesh.num_triangles()); ++t) {
    const auto& tri = mesh.triangle(t);
    const double area = mesh.signed_area(t);
    if (const auto* c = std::get_if<Vec2>(&f)) {
      for (int a = 0; a < 3; ++a)
        for (int i = 0; i < 2; ++i) r[dof(tri[a], i)] += (*c)[i] * area / 3.0;
      continue;
    }
    const auto& fn = std::get<VectorFunction>(f);
    const Point& p0 = mesh.node(tri[0]);
    const Point& p1 = mesh.node(tri[1]);
    const Point& p2 = mesh.node(tri[2]);
    for (int q = 0; q < 3; ++q) {
      std::array<double, 3> bary{1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
      bary[q] = 2.0 / 3.0;
      const Point x{bary[0] * p0[0] + bary[1] * p1[0] + bary[2] * p2[0],
                    bary[0] * p0[1] + bary[1] * p1[1] + bary[2] * p2[1]};
      const Vec2 fx = fn(x);
      for (int a = 0; a < 3; ++a)
        for (int i = 0; i < 2; ++i) r[dof(tri[a], i)] += area / 3.0 * fx[i] * bary[a];
    }
  }
  return r;
}

/// (b, phi_i) over Neumann edges, 2-point Gauss per edge. With a non-empty
/// `owner_filter`, only edges whose owning triangle passes the filter count.
inline Vector assemble_neumann_load(const Mesh& mesh, const VectorFunction& b,
                                    const std::function<bool(int)>& owner_filter = {}) {
  Vector r = Vector::Zero(static_cast<Eigen::Index>(2 * mesh.num_nodes()));
  if (!b) return r;
  const double gp = 0.5 / std::sqrt(3.0);
  for (const auto& e : mesh.neumann_edges()) {
    if (owner_filter && !owner_filter(e.triangle)) continue;
    const Point& p = mesh.node(e.nodes[0]);
    const Point& q = mesh.node(e.nodes[1]);
    const double len = std::hypot(q[0] - p[0], q[1] - p[1]);
    for (double s : {0.5 - gp, 0.5 + gp}) {
      const Point x{p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])};
      const Vec2 bx = b(x);
      for (int i = 0; i < 2; ++i) {
        r[dof(e.nodes[0], i)] += 0.5 * len * bx[i] * (1.0 - s);
        r[dof(e.nodes[1], i)] += 0.5 * len * bx[i] * s;
      }
    }
  }
  return r;
}

/// Data of a linear elasticity boundary value problem on the unit square.
struct ProblemSpec {
  CoefficientField coefficient;
  BodyForce body_force = Vec2{0.0, 0.0};
  VectorFunction neumann_data;            // empty: b = 0
  std::optional<Vector> dirichlet_data;   // full fine vector g_h, zero at free nodes; empty: g_h = 0
};

/// g_h on `mesh`, or zero when absent. Validates that g_h vanishes at free dofs.
inline Vector dirichlet_lift(const ProblemSpec& problem, const Mesh& mesh, const DofMap& dofs) {
  Vector g = Vector::Zero(static_cast<Eigen::Index>(dofs.num_dofs));
  if (!problem.dirichlet_data) return g;
  if (problem.dirichlet_data->size() != g.size())
    throw std::invalid_argument("Dirichlet data has wrong length for this mesh");
  g = *problem.dirichlet_data;
  for (int d : dofs.free)
    if (g[d] != 0.0) throw std::invalid_argument("Dirichlet data must vanish at free dofs");
  (void)mesh;
  return g;
}

/// Sparse SPD solve with a relative residual check.
inline Vector solve_spd(const SparseMatrix& A, const Vector& rhs, double tol = 1e-10) {
  if (rhs.size() == 0) return rhs;
  Eigen::SimplicialLLT<SparseMatrix> chol(A);
  if (chol.info() != Eigen::Success) throw std::runtime_error("Cholesky factorization failed: matrix is not SPD");
  Vector x = chol.solve(rhs);
  const double rn = rhs.norm();
  if (rn == 0.0) return x;
  // A few steps of iterative refinement for ill-conditioned (nearly incompressible) systems.
  Vector r = rhs - A * x;
  for (int step = 0; step < 3 && r.norm() > tol * rn; ++step) {
    x += chol.solve(r);
    r = rhs - A * x;
  }
  if (r.norm() > tol * rn)
    throw std::runtime_error("linear solve residual " + std::to_string(r.norm() / rn) + " above tolerance");
  return x;
}

/// Reference P1 solution u_h = u_{h,0} + g_h as a full fine vector.
inline Vector solve_fem(const ProblemSpec& problem, const Mesh& mesh) {
  const DofMap dofs(mesh);
  const SparseMatrix K = assemble_full_stiffness(mesh, problem.coefficient);
  const Vector g = dirichlet_lift(problem, mesh, dofs);
  Vector rhs = assemble_load(mesh, problem.body_force) + assemble_neumann_load(mesh, problem.neumann_data) - K * g;
  const Vector u0 = solve_spd(principal_submatrix(K, dofs.free), dofs.restrict(rhs));
  return dofs.extend(u0) + g;
}

/// Integral of |grad v|^2 over triangle t.
inline double element_gradient_energy(const Mesh& mesh, int t, const Vector& v) {
  const auto g = barycentric_gradients(mesh, t);
  const auto& tri = mesh.triangle(t);
  double local = 0.0;
  for (int i = 0; i < 2; ++i) {
    double gx = 0.0, gy = 0.0;
    for (int a = 0; a < 3; ++a) {
      gx += v[dof(tri[a], i)] * g[a][0];
      gy += v[dof(tri[a], i)] * g[a][1];
    }
    local += gx * gx + gy * gy;
  }
  return mesh.signed_area(t) * local;
}

/// ||grad v||_{L2} summed over both components.
inline double h1_seminorm(const Mesh& mesh, const Vector& v) {
  double s = 0.0;
  for (int t = 0; t < static_cast<int>(mesh.num_triangles()); ++t) s += element_gradient_energy(mesh, t, v);
  return std::sqrt(s);
}

inline double energy_norm(const SparseMatrix& K, const Vector& v) {
  return std::sqrt(std::max(0.0, v.dot(K * v)));
}

}  // namespace lodelast
