#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lodelast {

using Point = std::array<double, 2>;
using Triangle = std::array<int, 3>;

enum class BoundaryKind { dirichlet, neumann };

/// Boundary condition type per side of the unit square.
struct BoundarySpec {
  BoundaryKind left = BoundaryKind::dirichlet;
  BoundaryKind right = BoundaryKind::dirichlet;
  BoundaryKind bottom = BoundaryKind::dirichlet;
  BoundaryKind top = BoundaryKind::dirichlet;

  static BoundarySpec all_dirichlet() { return {}; }

  bool operator==(const BoundarySpec&) const = default;

  bool has_dirichlet_side() const {
    return left == BoundaryKind::dirichlet || right == BoundaryKind::dirichlet ||
           bottom == BoundaryKind::dirichlet || top == BoundaryKind::dirichlet;
  }
};

/// Boundary edge lying on a Neumann side, together with its owning triangle.
struct BoundaryEdge {
  std::array<int, 2> nodes;
  int triangle;
};

/**
 * Uniform triangulation of the unit square with n x n squares, each split
 * along its lower-left to upper-right diagonal.
 *
 * Node (i, j) sits at (i/n, j/n) and has index j*(n+1)+i. Square (i, j) has
 * index s = j*n+i and owns triangles 2s (lower) and 2s+1 (upper), both
 * counterclockwise.
 */
class Mesh {
 public:
  int level_size() const { return n_; }
  double mesh_width() const { return std::sqrt(2.0) / n_; }
  const BoundarySpec& boundary() const { return boundary_; }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }

  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Point& node(int i) const { return nodes_[i]; }
  const Triangle& triangle(int t) const { return triangles_[t]; }

  bool is_dirichlet(int node) const { return dirichlet_mask_[node]; }
  const std::vector<int>& dirichlet_nodes() const { return dirichlet_nodes_; }
  const std::vector<BoundaryEdge>& neumann_edges() const { return neumann_edges_; }

  /// Triangles incident to a node, in increasing index order.
  const std::vector<int>& node_triangles(int node) const { return node_triangles_[node]; }

  bool has_parent_map() const { return parent_of_.has_value(); }
  int parent(int fine_triangle) const {
    if (!parent_of_) throw std::logic_error("mesh has no parent map");
    return (*parent_of_)[fine_triangle];
  }
  const std::optional<std::vector<int>>& parent_map() const { return parent_of_; }

  double signed_area(int t) const {
    const auto& [a, b, c] = triangles_[t];
    const Point& p = nodes_[a];
    const Point& q = nodes_[b];
    const Point& r = nodes_[c];
    return 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]));
  }

  Point barycenter(int t) const {
    const auto& [a, b, c] = triangles_[t];
    return {(nodes_[a][0] + nodes_[b][0] + nodes_[c][0]) / 3.0,
            (nodes_[a][1] + nodes_[b][1] + nodes_[c][1]) / 3.0};
  }

  int node_index(int i, int j) const { return j * (n_ + 1) + i; }

 private:
  friend Mesh build_uniform_mesh(int n, const BoundarySpec& boundary);
  friend Mesh refine_to(const Mesh& coarse, int n_fine);

  int n_ = 0;
  BoundarySpec boundary_;
  std::vector<Point> nodes_;
  std::vector<Triangle> triangles_;
  std::vector<bool> dirichlet_mask_;
  std::vector<int> dirichlet_nodes_;
  std::vector<BoundaryEdge> neumann_edges_;
  std::vector<std::vector<int>> node_triangles_;
  std::optional<std::vector<int>> parent_of_;
};

inline Mesh build_uniform_mesh(int n, const BoundarySpec& boundary = {}) {
  if (n < 1) throw std::invalid_argument("mesh level size must be positive, got " + std::to_string(n));
  if (!boundary.has_dirichlet_side())
    throw std::invalid_argument("boundary spec needs at least one Dirichlet side");

  Mesh m;
  m.n_ = n;
  m.boundary_ = boundary;
  m.nodes_.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.nodes_.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});

  m.triangles_.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int ll = m.node_index(i, j), lr = m.node_index(i + 1, j);
      const int ul = m.node_index(i, j + 1), ur = m.node_index(i + 1, j + 1);
      m.triangles_.push_back({ll, lr, ur});
      m.triangles_.push_back({ll, ur, ul});
    }
  }

  m.node_triangles_.assign(m.nodes_.size(), {});
  for (int t = 0; t < static_cast<int>(m.triangles_.size()); ++t)
    for (int v : m.triangles_[t]) m.node_triangles_[v].push_back(t);

  // Side classification. A node is Dirichlet if it lies on the closure of a
  // Dirichlet side; corners shared with a Neumann side are Dirichlet.
  m.dirichlet_mask_.assign(m.nodes_.size(), false);
  auto mark = [&](BoundaryKind kind, auto&& node_of) {
    if (kind != BoundaryKind::dirichlet) return;
    for (int s = 0; s <= n; ++s) m.dirichlet_mask_[node_of(s)] = true;
  };
  mark(boundary.bottom, [&](int s) { return m.node_index(s, 0); });
  mark(boundary.top, [&](int s) { return m.node_index(s, n); });
  mark(boundary.left, [&](int s) { return m.node_index(0, s); });
  mark(boundary.right, [&](int s) { return m.node_index(n, s); });
  for (int v = 0; v < static_cast<int>(m.nodes_.size()); ++v)
    if (m.dirichlet_mask_[v]) m.dirichlet_nodes_.push_back(v);

  // Boundary edges of the structured split: bottom edges belong to lower
  // triangles, top edges to upper ones, left edges to upper, right to lower.
  auto tri_of = [n](int i, int j, bool upper) { return 2 * (j * n + i) + (upper ? 1 : 0); };
  for (int s = 0; s < n; ++s) {
    if (boundary.bottom == BoundaryKind::neumann)
      m.neumann_edges_.push_back({{m.node_index(s, 0), m.node_index(s + 1, 0)}, tri_of(s, 0, false)});
    if (boundary.right == BoundaryKind::neumann)
      m.neumann_edges_.push_back({{m.node_index(n, s), m.node_index(n, s + 1)}, tri_of(n - 1, s, false)});
    if (boundary.top == BoundaryKind::neumann)
      m.neumann_edges_.push_back({{m.node_index(s + 1, n), m.node_index(s, n)}, tri_of(s, n - 1, true)});
    if (boundary.left == BoundaryKind::neumann)
      m.neumann_edges_.push_back({{m.node_index(0, s + 1), m.node_index(0, s)}, tri_of(0, s, true)});
  }
  return m;
}

/// Uniform refinement of `coarse` with the parent map populated.
inline Mesh refine_to(const Mesh& coarse, int n_fine) {
  const int nc = coarse.level_size();
  if (n_fine < 1 || n_fine % nc != 0)
    throw std::invalid_argument("fine level " + std::to_string(n_fine) +
                                " is not a positive multiple of coarse level " + std::to_string(nc));
  Mesh fine = build_uniform_mesh(n_fine, coarse.boundary());
  const int ratio = n_fine / nc;
  std::vector<int> parent(fine.num_triangles());
  for (int j = 0; j < n_fine; ++j) {
    for (int i = 0; i < n_fine; ++i) {
      const int ci = i / ratio, cj = j / ratio;
      const int coarse_square = cj * nc + ci;
      for (int upper = 0; upper < 2; ++upper) {
        const int t = 2 * (j * n_fine + i) + upper;
        const Point b = fine.barycenter(t);
        // Position relative to the coarse square; lower triangle is below the diagonal.
        const double lx = b[0] * nc - ci, ly = b[1] * nc - cj;
        parent[t] = 2 * coarse_square + (ly < lx ? 0 : 1);
      }
    }
  }
  fine.parent_of_ = std::move(parent);
  return fine;
}

/// Fine triangles grouped by coarse parent.
inline std::vector<std::vector<int>> children_of(const Mesh& coarse, const Mesh& fine) {
  if (!fine.has_parent_map()) throw std::invalid_argument("fine mesh has no parent map");
  std::vector<std::vector<int>> children(coarse.num_triangles());
  for (int t = 0; t < static_cast<int>(fine.num_triangles()); ++t) children[fine.parent(t)].push_back(t);
  return children;
}

/// Element neighbourhood omega_k(T) and the index sets it induces.
struct Patch {
  int center_element = -1;
  int k = 0;
  std::vector<int> coarse_elements;     // sorted
  std::vector<int> fine_elements;       // sorted
  std::vector<int> interior_fine_nodes; // sorted; zero on the patch boundary away from Neumann sides
  std::vector<int> interior_fine_dofs;  // 2*node + component, sorted
  std::vector<int> constraint_nodes;    // free coarse vertices of patch elements, sorted

  bool contains_coarse(int t) const {
    return std::binary_search(coarse_elements.begin(), coarse_elements.end(), t);
  }
};

/// k rounds of vertex-adjacency growth starting from {T}.
inline std::vector<int> coarse_patch_elements(const Mesh& coarse, int T, int k) {
  if (T < 0 || T >= static_cast<int>(coarse.num_triangles()))
    throw std::out_of_range("coarse element index out of range");
  if (k < 0) throw std::invalid_argument("patch layer count must be nonnegative");
  std::vector<char> in(coarse.num_triangles(), 0);
  std::vector<int> current{T};
  in[T] = 1;
  for (int layer = 0; layer < k; ++layer) {
    std::vector<int> next = current;
    for (int t : current)
      for (int v : coarse.triangle(t))
        for (int nb : coarse.node_triangles(v))
          if (!in[nb]) {
            in[nb] = 1;
            next.push_back(nb);
          }
    if (next.size() == current.size()) break;
    current = std::move(next);
  }
  std::sort(current.begin(), current.end());
  return current;
}

inline Patch element_patch(const Mesh& coarse, const Mesh& fine,
                           const std::vector<std::vector<int>>& children, int T, int k) {
  Patch p;
  p.center_element = T;
  p.k = k;
  p.coarse_elements = coarse_patch_elements(coarse, T, k);

  std::vector<char> fine_in(fine.num_triangles(), 0);
  for (int ct : p.coarse_elements)
    for (int ft : children[ct]) {
      fine_in[ft] = 1;
      p.fine_elements.push_back(ft);
    }
  std::sort(p.fine_elements.begin(), p.fine_elements.end());

  std::vector<char> seen(fine.num_nodes(), 0);
  for (int ft : p.fine_elements)
    for (int v : fine.triangle(ft)) {
      if (seen[v]) continue;
      seen[v] = 1;
      if (fine.is_dirichlet(v)) continue;
      const auto& inc = fine.node_triangles(v);
      if (std::all_of(inc.begin(), inc.end(), [&](int t) { return fine_in[t] != 0; }))
        p.interior_fine_nodes.push_back(v);
    }
  std::sort(p.interior_fine_nodes.begin(), p.interior_fine_nodes.end());
  p.interior_fine_dofs.reserve(2 * p.interior_fine_nodes.size());
  for (int v : p.interior_fine_nodes) {
    p.interior_fine_dofs.push_back(2 * v);
    p.interior_fine_dofs.push_back(2 * v + 1);
  }

  for (int ct : p.coarse_elements)
    for (int v : coarse.triangle(ct))
      if (!coarse.is_dirichlet(v)) p.constraint_nodes.push_back(v);
  std::sort(p.constraint_nodes.begin(), p.constraint_nodes.end());
  p.constraint_nodes.erase(std::unique(p.constraint_nodes.begin(), p.constraint_nodes.end()),
                           p.constraint_nodes.end());
  return p;
}

inline Patch element_patch(const Mesh& coarse, const Mesh& fine, int T, int k) {
  return element_patch(coarse, fine, children_of(coarse, fine), T, k);
}

}  // namespace lodelast
