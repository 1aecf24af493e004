// mesh.hpp
// Structured conforming simplicial meshes of the unit square/cube.
// Squares are split along the lower-left to upper-right diagonal; cubes use
// the 6-tet Kuhn subdivision. Both choices keep uniform refinement nested
// (every coarse vertex and every coarse cell interface survives refinement),
// which the inter-mesh transfer relies on.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "okflow/types.hpp"

namespace okflow {

struct SimplicialMesh {
  int dim = 2;        // 2 or 3
  int n = 1;          // subdivisions per axis
  int level = 0;      // refinement level tag
  std::vector<std::array<double, 3>> vertices;   // z = 0 in 2D
  std::vector<std::array<int, 4>> cells;         // dim+1 vertex ids per cell

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
  int verts_per_cell() const { return dim + 1; }
  // Mesh size: diameter of the largest cell (the cube/square diagonal).
  double h() const { return std::sqrt(static_cast<double>(dim)) / n; }
};

namespace detail {

inline int grid_vertex_id(int n, int i, int j, int k) {
  // lexicographic by (z, y, x)
  return i + (n + 1) * (j + (n + 1) * k);
}

// Positive-orientation permutations of the Kuhn subdivision, in a fixed
// deterministic order. Each entry lists the axis order along the cube path.
inline const std::array<std::array<int, 3>, 6>& kuhn_permutations() {
  static const std::array<std::array<int, 3>, 6> perms = {{
      {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  return perms;
}

inline int perm_sign(const std::array<int, 3>& p) {
  int inv = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      if (p[a] > p[b]) ++inv;
  return inv % 2 == 0 ? 1 : -1;
}

}  // namespace detail

inline SimplicialMesh build_structured_mesh(int dim, int n, int level = 0) {
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("build_structured_mesh: dim must be 2 or 3");
  if (n < 1) throw std::invalid_argument("build_structured_mesh: n must be >= 1");

  SimplicialMesh mesh;
  mesh.dim = dim;
  mesh.n = n;
  mesh.level = level;

  const int nk = dim == 3 ? n : 0;
  mesh.vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1) * (nk + 1));
  for (int k = 0; k <= nk; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        mesh.vertices.push_back({double(i) / n, double(j) / n,
                                 dim == 3 ? double(k) / n : 0.0});

  if (dim == 2) {
    mesh.cells.reserve(static_cast<std::size_t>(2) * n * n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int v00 = detail::grid_vertex_id(n, i, j, 0);
        const int v10 = detail::grid_vertex_id(n, i + 1, j, 0);
        const int v01 = detail::grid_vertex_id(n, i, j + 1, 0);
        const int v11 = detail::grid_vertex_id(n, i + 1, j + 1, 0);
        mesh.cells.push_back({v00, v10, v11, -1});  // below the diagonal
        mesh.cells.push_back({v00, v11, v01, -1});  // above the diagonal
      }
  } else {
    mesh.cells.reserve(static_cast<std::size_t>(6) * n * n * n);
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const std::array<int, 3> base = {i, j, k};
          for (const auto& perm : detail::kuhn_permutations()) {
            std::array<int, 3> p = base;
            std::array<int, 4> cell;
            cell[0] = detail::grid_vertex_id(n, p[0], p[1], p[2]);
            p[perm[0]] += 1;
            cell[1] = detail::grid_vertex_id(n, p[0], p[1], p[2]);
            p[perm[1]] += 1;
            cell[2] = detail::grid_vertex_id(n, p[0], p[1], p[2]);
            p[perm[2]] += 1;
            cell[3] = detail::grid_vertex_id(n, p[0], p[1], p[2]);
            if (detail::perm_sign(perm) < 0) std::swap(cell[2], cell[3]);
            mesh.cells.push_back(cell);
          }
        }
  }
  return mesh;
}

inline SimplicialMesh refine_uniform(const SimplicialMesh& mesh) {
  return build_structured_mesh(mesh.dim, 2 * mesh.n, mesh.level + 1);
}

struct CellGeometry {
  std::array<Eigen::Vector3d, 4> gradients;  // of the dim+1 barycentric coords
  double volume;
};

inline CellGeometry barycentric_gradients(const SimplicialMesh& mesh,
                                          int cell_index) {
  const auto& cell = mesh.cells[cell_index];
  const int d = mesh.dim;
  const auto& p0 = mesh.vertices[cell[0]];
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  for (int c = 0; c < d; ++c)
    for (int r = 0; r < d; ++r)
      D(r, c) = mesh.vertices[cell[c + 1]][r] - p0[r];
  const double det = D.determinant();
  const double factorial = d == 2 ? 2.0 : 6.0;
  const double volume = det / factorial;
  if (!(volume > 0.0))
    throw GeometryError("barycentric_gradients: cell " +
                        std::to_string(cell_index) +
                        " has non-positive volume");
  const Eigen::Matrix3d Dinv = D.inverse();
  CellGeometry geom;
  geom.volume = volume;
  geom.gradients[0].setZero();
  for (int i = 1; i <= d; ++i) {
    geom.gradients[i] = Dinv.row(i - 1).transpose();
    if (d == 2) geom.gradients[i][2] = 0.0;
    geom.gradients[0] -= geom.gradients[i];
  }
  return geom;
}

// P1 evaluation of a nodal field at an arbitrary point of [0,1]^dim.
// Uses the grid structure directly: locate the cube, sort the fractional
// coordinates to pick the Kuhn simplex, and combine the path vertices.
inline double evaluate_p1(const SimplicialMesh& mesh, const Vec& nodal,
                          const std::array<double, 3>& x) {
  const int n = mesh.n, d = mesh.dim;
  std::array<int, 3> cell = {0, 0, 0};
  std::array<double, 3> f = {0.0, 0.0, 0.0};
  for (int a = 0; a < d; ++a) {
    double s = x[a] * n;
    int c = static_cast<int>(std::floor(s));
    c = std::clamp(c, 0, n - 1);
    cell[a] = c;
    f[a] = s - c;
  }
  // axes sorted by descending fractional coordinate (stable for ties)
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.begin() + d,
                   [&](int a, int b) { return f[a] > f[b]; });
  double value = 0.0;
  std::array<int, 3> p = cell;
  double prev = 1.0;
  for (int s = 0; s < d; ++s) {
    const double lam = prev - f[order[s]];
    value += lam * nodal[detail::grid_vertex_id(
                       n, p[0], p[1], d == 3 ? p[2] : 0)];
    prev = f[order[s]];
    p[order[s]] += 1;
  }
  value += prev * nodal[detail::grid_vertex_id(n, p[0], p[1], d == 3 ? p[2] : 0)];
  return value;
}

}  // namespace okflow
