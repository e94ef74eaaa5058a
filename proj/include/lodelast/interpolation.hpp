#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fem.hpp"
#include "mesh.hpp"

namespace lodelast {

/// Vertex values of the local L2 projection onto P1(T), as a linear map of
/// the fine nodal values of a scalar field restricted to T.
struct ElementProjection {
  int coarse_element = -1;
  std::vector<int> fine_nodes;  // sorted
  Eigen::MatrixXd weights;      // 3 x fine_nodes.size()
};

/// Elementwise L2 projection of fine P1 scalars onto P1(T_H) (discontinuous).
struct L2Projection {
  std::vector<ElementProjection> elements;

  /// Per coarse element, the three vertex values of the projection.
  std::vector<std::array<double, 3>> apply(const Vector& fine_scalar) const {
    std::vector<std::array<double, 3>> out(elements.size());
    for (std::size_t T = 0; T < elements.size(); ++T) {
      const auto& e = elements[T];
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (std::size_t m = 0; m < e.fine_nodes.size(); ++m) s += e.weights(j, static_cast<Eigen::Index>(m)) * fine_scalar[e.fine_nodes[m]];
        out[T][j] = s;
      }
    }
    return out;
  }
};

/// Barycentric coordinates of x with respect to coarse triangle T.
inline std::array<double, 3> barycentric_coordinates(const Mesh& mesh, int T, const Point& x) {
  const auto g = barycentric_gradients(mesh, T);
  const auto& tri = mesh.triangle(T);
  std::array<double, 3> lam;
  for (int a = 0; a < 3; ++a) {
    // lambda_a vanishes at the opposite vertex (a+1).
    const Point& pb = mesh.node(tri[(a + 1) % 3]);
    lam[a] = g[a][0] * (x[0] - pb[0]) + g[a][1] * (x[1] - pb[1]);
  }
  return lam;
}

inline L2Projection build_l2_projection(const Mesh& coarse, const Mesh& fine) {
  if (!fine.has_parent_map()) throw std::invalid_argument("L2 projection needs a fine mesh with parent map");
  const auto children = children_of(coarse, fine);
  L2Projection proj;
  proj.elements.resize(coarse.num_triangles());
  for (int T = 0; T < static_cast<int>(coarse.num_triangles()); ++T) {
    auto& e = proj.elements[T];
    e.coarse_element = T;
    for (int t : children[T])
      for (int v : fine.triangle(t)) e.fine_nodes.push_back(v);
    std::sort(e.fine_nodes.begin(), e.fine_nodes.end());
    e.fine_nodes.erase(std::unique(e.fine_nodes.begin(), e.fine_nodes.end()), e.fine_nodes.end());
    auto column_of = [&](int v) {
      return static_cast<Eigen::Index>(std::lower_bound(e.fine_nodes.begin(), e.fine_nodes.end(), v) - e.fine_nodes.begin());
    };

    // rhs(j, m) = integral over T of phi_m * lambda_j, exact since lambda_j is
    // affine on every child.
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(e.fine_nodes.size()));
    for (int t : children[T]) {
      const auto& tri = fine.triangle(t);
      const double area = fine.signed_area(t);
      std::array<std::array<double, 3>, 3> lam_at;  // lam_at[b][j] = lambda_j(x_b)
      for (int b = 0; b < 3; ++b) lam_at[b] = barycentric_coordinates(coarse, T, fine.node(tri[b]));
      for (int a = 0; a < 3; ++a)
        for (int j = 0; j < 3; ++j) {
          double s = 0.0;
          for (int b = 0; b < 3; ++b) s += lam_at[b][j] * area / 12.0 * (a == b ? 2.0 : 1.0);
          rhs(j, column_of(tri[a])) += s;
        }
    }
    Eigen::Matrix3d mass;
    mass << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    mass *= coarse.signed_area(T) / 12.0;
    e.weights = mass.inverse() * rhs;
  }
  return proj;
}

/// Nodal averaging E_H from P1(T_H) to the conforming space V_H.
struct Averaging {
  std::vector<int> cardinality;  // coarse elements containing each node

  Vector apply(const Mesh& coarse, const std::vector<std::array<double, 3>>& element_values) const {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(coarse.num_nodes()));
    for (int T = 0; T < static_cast<int>(coarse.num_triangles()); ++T)
      for (int j = 0; j < 3; ++j) out[coarse.triangle(T)[j]] += element_values[T][j];
    for (int z = 0; z < static_cast<int>(coarse.num_nodes()); ++z)
      out[z] = coarse.is_dirichlet(z) ? 0.0 : out[z] / cardinality[z];
    return out;
  }
};

inline Averaging build_averaging(const Mesh& coarse) {
  Averaging avg;
  avg.cardinality.resize(coarse.num_nodes());
  for (int z = 0; z < static_cast<int>(coarse.num_nodes()); ++z)
    avg.cardinality[z] = static_cast<int>(coarse.node_triangles(z).size());
  return avg;
}

/**
 * I_H = E_H o Pi_H applied componentwise, as explicit sparse matrices.
 *
 * `matrix` maps full fine dof vectors (2 * fine nodes) to coarse free dofs;
 * it is applied to vectors vanishing on the Dirichlet boundary.
 * `prolongation` embeds coarse free dofs into full fine dof vectors.
 */
struct InterpolationOperator {
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
  SparseMatrix prolongation;
  DofMap coarse_dofs;

  Vector apply(const Vector& fine) const { return matrix * fine; }
  Vector prolong(const Vector& coarse_free) const { return prolongation * coarse_free; }
};

inline SparseMatrix build_prolongation(const Mesh& coarse, const Mesh& fine, const DofMap& coarse_dofs) {
  if (!fine.has_parent_map()) throw std::invalid_argument("prolongation needs a fine mesh with parent map");
  std::vector<Triplet> trip;
  for (int v = 0; v < static_cast<int>(fine.num_nodes()); ++v) {
    const int T = fine.parent(fine.node_triangles(v).front());
    const auto lam = barycentric_coordinates(coarse, T, fine.node(v));
    for (int a = 0; a < 3; ++a) {
      double w = lam[a];
      if (std::abs(w) < 1e-13) continue;
      if (std::abs(w - 1.0) < 1e-13) w = 1.0;
      const int z = coarse.triangle(T)[a];
      for (int c = 0; c < 2; ++c) {
        const int cd = coarse_dofs.free_index[dof(z, c)];
        if (cd >= 0) trip.emplace_back(dof(v, c), cd, w);
      }
    }
  }
  SparseMatrix P(static_cast<Eigen::Index>(2 * fine.num_nodes()), static_cast<Eigen::Index>(coarse_dofs.num_free()));
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

inline InterpolationOperator build_interpolation(const Mesh& coarse, const Mesh& fine) {
  const L2Projection proj = build_l2_projection(coarse, fine);
  const Averaging avg = build_averaging(coarse);
  InterpolationOperator op{{}, {}, DofMap(coarse)};
  std::vector<Triplet> trip;
  for (int T = 0; T < static_cast<int>(coarse.num_triangles()); ++T) {
    const auto& e = proj.elements[T];
    for (int j = 0; j < 3; ++j) {
      const int z = coarse.triangle(T)[j];
      if (coarse.is_dirichlet(z)) continue;
      const double scale = 1.0 / avg.cardinality[z];
      for (std::size_t m = 0; m < e.fine_nodes.size(); ++m) {
        const double w = scale * e.weights(j, static_cast<Eigen::Index>(m));
        for (int c = 0; c < 2; ++c)
          trip.emplace_back(op.coarse_dofs.free_index[dof(z, c)], dof(e.fine_nodes[m], c), w);
      }
    }
  }
  op.matrix.resize(static_cast<Eigen::Index>(op.coarse_dofs.num_free()), static_cast<Eigen::Index>(2 * fine.num_nodes()));
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.prolongation = build_prolongation(coarse, fine, op.coarse_dofs);
  return op;
}

}  // namespace lodelast
