#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "lodelast/mesh.hpp"

using namespace lodelast;

TEST(UniformMesh, MinimalSplit) {
  const Mesh m = build_uniform_mesh(1);
  EXPECT_EQ(m.num_triangles(), 2u);
  EXPECT_EQ(m.num_nodes(), 4u);
}

TEST(UniformMesh, CountsAndAreas) {
  for (int n : {1, 2, 3, 8}) {
    const Mesh m = build_uniform_mesh(n);
    EXPECT_EQ(m.num_nodes(), static_cast<std::size_t>((n + 1) * (n + 1)));
    EXPECT_EQ(m.num_triangles(), static_cast<std::size_t>(2 * n * n));
    for (int t = 0; t < static_cast<int>(m.num_triangles()); ++t)
      EXPECT_NEAR(m.signed_area(t), 1.0 / (2.0 * n * n), 1e-15);
  }
  EXPECT_NEAR(build_uniform_mesh(2).signed_area(0), 0.125, 1e-16);
}

TEST(UniformMesh, MeshWidth) {
  EXPECT_DOUBLE_EQ(build_uniform_mesh(64).mesh_width(), std::sqrt(2.0) * std::pow(2.0, -6));
}

TEST(UniformMesh, RejectsZero) {
  EXPECT_THROW(build_uniform_mesh(0), std::invalid_argument);
  BoundarySpec all_neumann{BoundaryKind::neumann, BoundaryKind::neumann, BoundaryKind::neumann, BoundaryKind::neumann};
  EXPECT_THROW(build_uniform_mesh(2, all_neumann), std::invalid_argument);
}

TEST(UniformMesh, DiagonalRunsLowerLeftToUpperRight) {
  const Mesh m = build_uniform_mesh(1);
  const auto& lower = m.triangle(0);
  EXPECT_TRUE(std::find(lower.begin(), lower.end(), m.node_index(0, 0)) != lower.end());
  EXPECT_TRUE(std::find(lower.begin(), lower.end(), m.node_index(1, 1)) != lower.end());
  EXPECT_TRUE(std::find(lower.begin(), lower.end(), m.node_index(0, 1)) == lower.end());
}

TEST(UniformMesh, BoundaryPartition) {
  const Mesh all_d = build_uniform_mesh(4);
  EXPECT_EQ(all_d.dirichlet_nodes().size(), 16u);
  EXPECT_TRUE(all_d.neumann_edges().empty());

  BoundarySpec spec;
  spec.right = BoundaryKind::neumann;
  spec.top = BoundaryKind::neumann;
  const Mesh m = build_uniform_mesh(4, spec);
  EXPECT_EQ(m.neumann_edges().size(), 8u);
  // Boundary edges on the 4 sides: 16 total, 8 Neumann, so 8 Dirichlet.
  for (const auto& e : m.neumann_edges()) {
    const auto& tri = m.triangle(e.triangle);
    for (int v : e.nodes) EXPECT_TRUE(std::find(tri.begin(), tri.end(), v) != tri.end());
    const Point& p = m.node(e.nodes[0]);
    const Point& q = m.node(e.nodes[1]);
    const bool on_right = p[0] == 1.0 && q[0] == 1.0;
    const bool on_top = p[1] == 1.0 && q[1] == 1.0;
    EXPECT_TRUE(on_right != on_top);
  }
  // Corner shared with the Dirichlet left side stays Dirichlet.
  EXPECT_TRUE(m.is_dirichlet(m.node_index(0, 4)));
  EXPECT_FALSE(m.is_dirichlet(m.node_index(4, 4)));
  EXPECT_TRUE(m.is_dirichlet(m.node_index(4, 0)));
}

TEST(Refinement, ChildrenAndParentConsistency) {
  const Mesh coarse = build_uniform_mesh(2);
  const Mesh fine = refine_to(coarse, 4);
  const auto children = children_of(coarse, fine);
  for (int T = 0; T < static_cast<int>(coarse.num_triangles()); ++T) {
    EXPECT_EQ(children[T].size(), 4u);
    double area = 0.0;
    for (int t : children[T]) {
      area += fine.signed_area(t);
      // containment: every child vertex has nonnegative barycentric coordinates
      for (int v : fine.triangle(t)) {
        const Point& x = fine.node(v);
        const auto& tri = coarse.triangle(T);
        const Point& a = coarse.node(tri[0]);
        const Point& b = coarse.node(tri[1]);
        const Point& c = coarse.node(tri[2]);
        auto cross = [](const Point& p, const Point& q, const Point& r) {
          return (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
        };
        EXPECT_GE(cross(a, b, x), -1e-14);
        EXPECT_GE(cross(b, c, x), -1e-14);
        EXPECT_GE(cross(c, a, x), -1e-14);
      }
    }
    EXPECT_NEAR(area, coarse.signed_area(T), 1e-14);
  }
}

TEST(Refinement, IdentityAndErrors) {
  const Mesh coarse = build_uniform_mesh(2);
  const Mesh same = refine_to(coarse, 2);
  for (int t = 0; t < static_cast<int>(same.num_triangles()); ++t) EXPECT_EQ(same.parent(t), t);
  EXPECT_THROW(refine_to(coarse, 3), std::invalid_argument);
  EXPECT_THROW(build_uniform_mesh(3).parent(0), std::logic_error);
}

TEST(Patch, ZeroLayersIsTheElement) {
  const Mesh coarse = build_uniform_mesh(4);
  const Mesh fine = refine_to(coarse, 8);
  const Patch p = element_patch(coarse, fine, 9, 0);
  EXPECT_EQ(p.coarse_elements, std::vector<int>{9});
  EXPECT_EQ(p.fine_elements.size(), 4u);
  // Only the midpoint-free nodes strictly inside T: none for a 2x refinement of a triangle.
  EXPECT_TRUE(p.interior_fine_nodes.empty());
}

TEST(Patch, SaturatesAtFullMesh) {
  const Mesh coarse = build_uniform_mesh(4);
  const Mesh fine = refine_to(coarse, 8);
  for (int T : {0, 13, 31}) {
    const Patch p = element_patch(coarse, fine, T, 4);
    EXPECT_EQ(p.coarse_elements.size(), coarse.num_triangles());
    EXPECT_EQ(p.interior_fine_nodes.size(), 49u);
  }
}

TEST(Patch, TwiceLevelSizeSaturatesEveryElement) {
  const Mesh coarse = build_uniform_mesh(4);
  int worst = 0;
  for (int T = 0; T < 32; ++T) {
    EXPECT_EQ(coarse_patch_elements(coarse, T, 8).size(), 32u);
    int k = 0;
    while (coarse_patch_elements(coarse, T, k).size() < 32u) ++k;
    worst = std::max(worst, k);
  }
  // Upper triangle of square (1, 3) needs two extra layers to reach the lower right corner.
  EXPECT_EQ(coarse_patch_elements(coarse, 27, 4).size(), 28u);
  EXPECT_EQ(worst, 7);
}

TEST(Patch, OneLayerMatchesBruteForceVertexAdjacency) {
  const Mesh coarse = build_uniform_mesh(4);
  // Interior element: lower triangle of square (1, 1).
  const int T = 2 * (1 * 4 + 1);
  std::vector<int> expected;
  const auto& tv = coarse.triangle(T);
  for (int t = 0; t < 32; ++t) {
    bool shares = false;
    for (int a : coarse.triangle(t))
      for (int b : tv) shares |= (a == b);
    if (shares) expected.push_back(t);
  }
  EXPECT_EQ(coarse_patch_elements(coarse, T, 1), expected);
}

TEST(Patch, NestedAndTranslationSymmetric) {
  const Mesh coarse = build_uniform_mesh(8);
  const Mesh fine = refine_to(coarse, 16);
  for (int T : {0, 27, 70, 127})
    for (int k = 0; k < 6; ++k) {
      const auto a = coarse_patch_elements(coarse, T, k);
      const auto b = coarse_patch_elements(coarse, T, k + 1);
      EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
  // Square (3,3) vs (4,3): patches with k = 2 stay interior, so they translate by one square.
  const int T1 = 2 * (3 * 8 + 3), T2 = 2 * (3 * 8 + 4);
  auto p1 = coarse_patch_elements(coarse, T1, 2);
  const auto p2 = coarse_patch_elements(coarse, T2, 2);
  for (int& t : p1) t += 2;
  EXPECT_EQ(p1, p2);
}

TEST(Patch, InteriorDofsStayInsidePatch) {
  BoundarySpec spec;
  spec.bottom = BoundaryKind::neumann;
  const Mesh coarse = build_uniform_mesh(4, spec);
  const Mesh fine = refine_to(coarse, 12);
  const Patch p = element_patch(coarse, fine, 2, 1);
  std::set<int> patch_nodes;
  for (int t : p.fine_elements)
    for (int v : fine.triangle(t)) patch_nodes.insert(v);
  bool has_neumann_node = false;
  for (int v : p.interior_fine_nodes) {
    EXPECT_TRUE(patch_nodes.count(v));
    EXPECT_FALSE(fine.is_dirichlet(v));
    for (int t : fine.node_triangles(v)) EXPECT_TRUE(std::binary_search(p.fine_elements.begin(), p.fine_elements.end(), t));
    has_neumann_node |= fine.node(v)[1] == 0.0;
  }
  // Free nodes on the Neumann side remain patch unknowns.
  EXPECT_TRUE(has_neumann_node);
  EXPECT_EQ(p.interior_fine_dofs.size(), 2 * p.interior_fine_nodes.size());
}
