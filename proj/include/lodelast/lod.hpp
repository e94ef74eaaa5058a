#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "fem.hpp"
#include "interpolation.hpp"
#include "mesh.hpp"

namespace lodelast {

/// Patch layer count k = ceil(0.8 ln(1/H)), at least 1.
inline int localization_schedule(double H) {
  if (!(H > 0.0)) throw std::invalid_argument("coarse mesh width must be positive");
  return std::max(1, static_cast<int>(std::ceil(0.8 * std::log(1.0 / H))));
}

/**
 * Immutable data shared by all corrector computations on a nested
 * coarse/fine mesh pair: fine stiffness over all dofs, the quasi-interpolation
 * and the coarse-to-fine element map.
 */
class MultiscaleContext {
 public:
  MultiscaleContext(Mesh coarse, Mesh fine, CoefficientField coeff)
      : coarse_(std::move(coarse)),
        fine_(std::move(fine)),
        coeff_(std::move(coeff)),
        fine_dofs_(fine_),
        interp_(build_interpolation(coarse_, fine_)) {
    if (!fine_.has_parent_map()) throw std::invalid_argument("fine mesh must carry a parent map");
    if (fine_.level_size() % coarse_.level_size() != 0 || !(fine_.boundary() == coarse_.boundary()))
      throw std::invalid_argument("fine mesh is not a refinement of the coarse mesh");
    children_ = children_of(coarse_, fine_);
    stiffness_ = assemble_full_stiffness(fine_, coeff_);
  }

  const Mesh& coarse() const { return coarse_; }
  const Mesh& fine() const { return fine_; }
  const CoefficientField& coefficient() const { return coeff_; }
  const std::vector<std::vector<int>>& children() const { return children_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const DofMap& fine_dofs() const { return fine_dofs_; }
  const DofMap& coarse_dofs() const { return interp_.coarse_dofs; }
  const InterpolationOperator& interpolation() const { return interp_; }

  /// Layer count at which every patch covers the whole coarse mesh. Vertex
  /// paths against the diagonal take two steps per cell, so n layers are
  /// not always enough; 2n always is.
  int saturation_k() const { return 2 * coarse_.level_size(); }

  Patch patch(int T, int k) const { return element_patch(coarse_, fine_, children_, T, k); }

  /// Full fine vector w -> B(v, w)_T.
  Vector element_rhs(int T, const Vector& v) const { return assemble_elementwise_rhs(fine_, coeff_, children_[T], v); }

 private:
  Mesh coarse_;
  Mesh fine_;
  CoefficientField coeff_;
  DofMap fine_dofs_;
  InterpolationOperator interp_;
  std::vector<std::vector<int>> children_;
  SparseMatrix stiffness_;
};

/**
 * Constrained Ritz solve on a patch: find w in span(interior dofs) with
 * C w = 0 and K w - f orthogonal to ker C, where C holds the rows of I_H for
 * the patch constraint nodes. Solved through the Schur complement
 * C K^{-1} C^T of the SPD patch stiffness.
 */
class PatchSolver {
 public:
  PatchSolver(const MultiscaleContext& ctx, Patch patch) : patch_(std::move(patch)) {
    const auto& dofs = patch_.interior_fine_dofs;
    local_.assign(ctx.fine_dofs().num_dofs, -1);
    for (std::size_t i = 0; i < dofs.size(); ++i) local_[dofs[i]] = static_cast<int>(i);

    stiffness_ = principal_submatrix(ctx.stiffness(), dofs);

    const auto& I = ctx.interpolation().matrix;
    const auto& cdofs = ctx.coarse_dofs();
    std::vector<std::vector<std::pair<int, double>>> rows;
    double max_norm = 0.0;
    std::vector<double> norms;
    for (int z : patch_.constraint_nodes)
      for (int c = 0; c < 2; ++c) {
        const int r = cdofs.free_index[dof(z, c)];
        std::vector<std::pair<int, double>> row;
        double nrm = 0.0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(I, r); it; ++it)
          if (local_[it.col()] >= 0 && it.value() != 0.0) {
            row.emplace_back(local_[it.col()], it.value());
            nrm += it.value() * it.value();
          }
        norms.push_back(std::sqrt(nrm));
        max_norm = std::max(max_norm, norms.back());
        rows.push_back(std::move(row));
      }
    std::vector<Triplet> trip;
    int m = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].empty() || norms[r] <= 1e-12 * max_norm) continue;
      for (const auto& [col, val] : rows[r]) trip.emplace_back(m, col, val);
      ++m;
    }
    constraints_.resize(m, static_cast<Eigen::Index>(dofs.size()));
    constraints_.setFromTriplets(trip.begin(), trip.end());

    if (dofs.empty()) return;
    llt_.compute(stiffness_);
    if (llt_.info() != Eigen::Success) throw std::runtime_error("patch stiffness is not SPD");
    if (m > 0) {
      if (m > static_cast<int>(dofs.size()))
        throw std::runtime_error("more constraints than patch dofs: dependent constraints");
      const Eigen::MatrixXd ct = Eigen::MatrixXd(constraints_.transpose());
      kinv_ct_ = llt_.solve(ct);
      const Eigen::MatrixXd schur = constraints_ * kinv_ct_;
      schur_.compute(schur);
      if (schur_.info() != Eigen::Success) throw std::runtime_error("singular KKT system: dependent constraints");
      // LLT on a near-singular matrix can succeed; reject tiny pivots relative to the largest.
      const Eigen::VectorXd diag = Eigen::MatrixXd(schur_.matrixL()).diagonal();
      if (diag.minCoeff() <= 1e-7 * diag.maxCoeff())
        throw std::runtime_error("singular KKT system: dependent constraints");
    }
  }

  const Patch& patch() const { return patch_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const SparseMatrix& constraints() const { return constraints_; }
  Eigen::Index num_constraints() const { return constraints_.rows(); }
  int local_index(int fine_dof) const { return local_[fine_dof]; }

  /// Solves for every column of `rhs` (indexed by patch interior dofs).
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
    if (rhs.rows() == 0) return rhs;
    Eigen::MatrixXd x = llt_.solve(rhs);
    Eigen::MatrixXd mult = Eigen::MatrixXd::Zero(constraints_.rows(), rhs.cols());
    if (constraints_.rows() > 0) {
      mult = schur_.solve(constraints_ * x);
      x -= kinv_ct_ * mult;
    }
    const Eigen::MatrixXd res = stiffness_ * x + constraints_.transpose() * mult - rhs;
    for (Eigen::Index j = 0; j < rhs.cols(); ++j) {
      const double rn = rhs.col(j).norm();
      if (rn > 0.0 && res.col(j).norm() > 1e-9 * rn)
        throw std::runtime_error("patch KKT residual above tolerance");
    }
    return x;
  }

  /// Gathers a full fine vector onto the patch interior dofs.
  Vector gather(const Vector& full) const {
    Vector r(static_cast<Eigen::Index>(patch_.interior_fine_dofs.size()));
    for (std::size_t i = 0; i < patch_.interior_fine_dofs.size(); ++i) r[static_cast<Eigen::Index>(i)] = full[patch_.interior_fine_dofs[i]];
    return r;
  }

  Vector scatter(const Vector& local, std::size_t num_dofs) const {
    Vector f = Vector::Zero(static_cast<Eigen::Index>(num_dofs));
    for (std::size_t i = 0; i < patch_.interior_fine_dofs.size(); ++i) f[patch_.interior_fine_dofs[i]] = local[static_cast<Eigen::Index>(i)];
    return f;
  }

 private:
  Patch patch_;
  std::vector<int> local_;
  SparseMatrix stiffness_;
  SparseMatrix constraints_;
  Eigen::SimplicialLLT<SparseMatrix> llt_;
  Eigen::MatrixXd kinv_ct_;
  Eigen::LLT<Eigen::MatrixXd> schur_;
};

/// R^T_{f,k} v as a full fine vector (zero outside omega_k(T)).
inline Vector solve_element_corrector(const MultiscaleContext& ctx, int T, const Vector& v, int k) {
  const PatchSolver solver(ctx, ctx.patch(T, k));
  const Vector rhs = solver.gather(ctx.element_rhs(T, v));
  if (rhs.size() == 0) return Vector::Zero(static_cast<Eigen::Index>(ctx.fine_dofs().num_dofs));
  return solver.scatter(solver.solve(rhs), ctx.fine_dofs().num_dofs);
}

/// Global Ritz projection R_f v onto ker I_H in one solve.
inline Vector ritz_projection(const MultiscaleContext& ctx, const Vector& v) {
  const PatchSolver solver(ctx, ctx.patch(0, ctx.saturation_k()));
  const Vector rhs = solver.gather(ctx.stiffness() * v);
  if (rhs.size() == 0) return Vector::Zero(static_cast<Eigen::Index>(ctx.fine_dofs().num_dofs));
  return solver.scatter(solver.solve(rhs), ctx.fine_dofs().num_dofs);
}

/// Fine-grid correctors Q_k lambda_{z,i} for every coarse free dof.
struct CorrectorSet {
  int k = 0;
  int coarse_level = 0;
  int fine_level = 0;
  SparseMatrix correctors;  // full fine dofs x coarse free dofs

  Eigen::Index size() const { return correctors.cols(); }
  Vector corrector(Eigen::Index a) const { return Vector(correctors.col(a)); }
};

namespace detail {

using SparseColumn = std::vector<std::pair<int, double>>;

// acc += (idx, val), both sorted by index.
inline void merge_into(SparseColumn& acc, const std::vector<int>& idx, const Eigen::Ref<const Vector>& val) {
  SparseColumn out;
  out.reserve(acc.size() + idx.size());
  std::size_t i = 0, j = 0;
  while (i < acc.size() || j < idx.size()) {
    if (j == idx.size() || (i < acc.size() && acc[i].first < idx[j])) {
      out.push_back(acc[i++]);
    } else if (i == acc.size() || idx[j] < acc[i].first) {
      out.emplace_back(idx[j], val[static_cast<Eigen::Index>(j)]);
      ++j;
    } else {
      out.emplace_back(idx[j], acc[i].second + val[static_cast<Eigen::Index>(j)]);
      ++i;
      ++j;
    }
  }
  acc = std::move(out);
}

}  // namespace detail

/**
 * Sums R^T_{f,k} lambda_{z,i} over the coarse elements T containing z.
 * Elements are processed in index order so the floating-point accumulation
 * order is fixed.
 */
inline CorrectorSet build_corrector_set(const MultiscaleContext& ctx, int k) {
  const Mesh& coarse = ctx.coarse();
  const Mesh& fine = ctx.fine();
  const auto& cdofs = ctx.coarse_dofs();
  std::vector<detail::SparseColumn> columns(cdofs.num_free());

  for (int T = 0; T < static_cast<int>(coarse.num_triangles()); ++T) {
    // Local basis functions (vertex j, component c) of T that belong to V_H.
    std::vector<int> targets;
    std::vector<std::pair<int, int>> local_basis;
    for (int j = 0; j < 3; ++j)
      for (int c = 0; c < 2; ++c) {
        const int a = cdofs.free_index[dof(coarse.triangle(T)[j], c)];
        if (a < 0) continue;
        targets.push_back(a);
        local_basis.emplace_back(j, c);
      }
    if (targets.empty()) continue;

    const PatchSolver solver(ctx, ctx.patch(T, k));
    const auto n_p = static_cast<Eigen::Index>(solver.patch().interior_fine_dofs.size());
    if (n_p == 0) continue;

    // rhs = B(lambda_{z,c}, phi)_T, assembled directly on the children of T.
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n_p, static_cast<Eigen::Index>(targets.size()));
    for (int t : ctx.children()[T]) {
      const auto& tri = fine.triangle(t);
      const ElementMatrix ke = element_stiffness(fine, t, ctx.coefficient());
      std::array<std::array<double, 3>, 3> lam;
      for (int b = 0; b < 3; ++b) lam[b] = barycentric_coordinates(coarse, T, fine.node(tri[b]));
      for (std::size_t col = 0; col < local_basis.size(); ++col) {
        const auto [j, c] = local_basis[col];
        Eigen::Matrix<double, 6, 1> u = Eigen::Matrix<double, 6, 1>::Zero();
        for (int b = 0; b < 3; ++b) u[2 * b + c] = lam[b][j];
        const Eigen::Matrix<double, 6, 1> ku = ke * u;
        for (int a = 0; a < 6; ++a) {
          const int li = solver.local_index(dof(tri[a / 2], a % 2));
          if (li >= 0) rhs(li, static_cast<Eigen::Index>(col)) += ku[a];
        }
      }
    }
    const Eigen::MatrixXd sol = solver.solve(rhs);
    for (std::size_t j = 0; j < targets.size(); ++j)
      detail::merge_into(columns[targets[j]], solver.patch().interior_fine_dofs, sol.col(static_cast<Eigen::Index>(j)));
  }

  CorrectorSet set;
  set.k = k;
  set.coarse_level = coarse.level_size();
  set.fine_level = fine.level_size();
  std::size_t nnz = 0;
  for (const auto& col : columns) nnz += col.size();
  std::vector<Triplet> trip;
  trip.reserve(nnz);
  for (std::size_t a = 0; a < columns.size(); ++a)
    for (const auto& [row, val] : columns[a]) trip.emplace_back(row, static_cast<int>(a), val);
  set.correctors.resize(static_cast<Eigen::Index>(ctx.fine_dofs().num_dofs), static_cast<Eigen::Index>(columns.size()));
  set.correctors.setFromTriplets(trip.begin(), trip.end());
  return set;
}

/// Localized Neumann corrector b_{f,k} = sum over boundary elements T.
inline Vector solve_neumann_corrector(const MultiscaleContext& ctx, const VectorFunction& b, int k) {
  const auto n = ctx.fine_dofs().num_dofs;
  Vector total = Vector::Zero(static_cast<Eigen::Index>(n));
  if (!b) return total;
  const Mesh& fine = ctx.fine();
  std::vector<int> owners;
  for (const auto& e : fine.neumann_edges()) owners.push_back(fine.parent(e.triangle));
  std::sort(owners.begin(), owners.end());
  owners.erase(std::unique(owners.begin(), owners.end()), owners.end());
  for (int T : owners) {
    const Vector load = assemble_neumann_load(fine, b, [&](int t) { return fine.parent(t) == T; });
    const PatchSolver solver(ctx, ctx.patch(T, k));
    const Vector rhs = solver.gather(load);
    if (rhs.size() == 0 || rhs.norm() == 0.0) continue;
    total += solver.scatter(solver.solve(rhs), n);
  }
  return total;
}

/// Localized Dirichlet corrector R_{f,k} g_h.
inline Vector build_dirichlet_corrector(const MultiscaleContext& ctx, const Vector& g_h, int k) {
  const auto n = ctx.fine_dofs().num_dofs;
  Vector total = Vector::Zero(static_cast<Eigen::Index>(n));
  if (g_h.size() == 0 || g_h.norm() == 0.0) return total;
  for (int T = 0; T < static_cast<int>(ctx.coarse().num_triangles()); ++T) {
    const Vector load = ctx.element_rhs(T, g_h);
    if (load.norm() == 0.0) continue;
    const PatchSolver solver(ctx, ctx.patch(T, k));
    const Vector rhs = solver.gather(load);
    if (rhs.size() == 0 || rhs.norm() == 0.0) continue;
    total += solver.scatter(solver.solve(rhs), n);
  }
  return total;
}

/// Multiscale basis {lambda_a - Q_k lambda_a} as columns over full fine dofs.
inline SparseMatrix multiscale_basis(const MultiscaleContext& ctx, const CorrectorSet& set) {
  SparseMatrix basis = ctx.interpolation().prolongation - set.correctors;
  basis.prune(0.0);
  return basis;
}

struct GfemResult {
  Vector solution;      // u_{ms,k} on the fine grid
  Vector coefficients;  // in the multiscale basis
  SparseMatrix basis;
  int k = 0;
};

/// Localized GFEM solve with a precomputed corrector set.
inline GfemResult solve_gfem(const ProblemSpec& problem, const MultiscaleContext& ctx, const CorrectorSet& set) {
  const Mesh& fine = ctx.fine();
  const SparseMatrix& K = ctx.stiffness();
  const Vector g = dirichlet_lift(problem, fine, ctx.fine_dofs());
  const Vector boundary_part = solve_neumann_corrector(ctx, problem.neumann_data, set.k) + g -
                               build_dirichlet_corrector(ctx, g, set.k);
  const Vector load = assemble_load(fine, problem.body_force) + assemble_neumann_load(fine, problem.neumann_data) -
                      K * boundary_part;

  GfemResult out;
  out.k = set.k;
  out.basis = multiscale_basis(ctx, set);
  const SparseMatrix KB = K * out.basis;
  const SparseMatrix M = SparseMatrix(out.basis.transpose()) * KB;
  const Vector rhs = out.basis.transpose() * load;
  try {
    out.coefficients = solve_spd(M, rhs);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string("multiscale system: ") + e.what());
  }
  out.solution = out.basis * out.coefficients + boundary_part;
  return out;
}

inline GfemResult solve_gfem(const ProblemSpec& problem, const Mesh& coarse, const Mesh& fine, int k) {
  const MultiscaleContext ctx(coarse, fine, problem.coefficient);
  return solve_gfem(problem, ctx, build_corrector_set(ctx, k));
}

/// Classical P1 Galerkin solution in V_H (exact coefficient integration
/// through the fine stiffness), prolonged to the fine grid.
inline Vector solve_coarse_fem(const ProblemSpec& problem, const MultiscaleContext& ctx) {
  const Vector g = dirichlet_lift(problem, ctx.fine(), ctx.fine_dofs());
  if (g.norm() != 0.0) throw std::invalid_argument("coarse P1 solve supports homogeneous Dirichlet data only");
  const SparseMatrix& P = ctx.interpolation().prolongation;
  const Vector load = assemble_load(ctx.fine(), problem.body_force) + assemble_neumann_load(ctx.fine(), problem.neumann_data);
  const SparseMatrix M = SparseMatrix(P.transpose()) * (ctx.stiffness() * P);
  return P * solve_spd(M, P.transpose() * load);
}

/// Tail energies e_k = ||grad R^T_f v||_{L2(Omega \ omega_k(T))}, k = 0..k_max,
/// of the global element corrector.
inline std::vector<double> measure_corrector_decay(const MultiscaleContext& ctx, int T, const Vector& v, int k_max) {
  const Vector corrector = solve_element_corrector(ctx, T, v, ctx.saturation_k());
  const Mesh& fine = ctx.fine();
  std::vector<double> energy(fine.num_triangles());
  for (int t = 0; t < static_cast<int>(fine.num_triangles()); ++t) energy[t] = element_gradient_energy(fine, t, corrector);
  std::vector<double> tails;
  for (int k = 0; k <= k_max; ++k) {
    std::vector<char> inside(ctx.coarse().num_triangles(), 0);
    for (int ct : coarse_patch_elements(ctx.coarse(), T, k)) inside[ct] = 1;
    double s = 0.0;
    for (int t = 0; t < static_cast<int>(fine.num_triangles()); ++t)
      if (!inside[fine.parent(t)]) s += energy[t];
    tails.push_back(std::sqrt(s));
  }
  return tails;
}

}  // namespace lodelast
