#include <catch2/catch_amalgamated.hpp>
#include <map>
#include <random>
#include <set>

#include "okflow/mesh.hpp"

using namespace okflow;

namespace {

double total_volume(const SimplicialMesh& mesh) {
  // Kahan summation: the tiling check is tighter than naive accumulation.
  double vol = 0.0, comp = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const double y = barycentric_gradients(mesh, c).volume - comp;
    const double t = vol + y;
    comp = (t - vol) - y;
    vol = t;
  }
  return vol;
}

// Facet incidence: interior facets belong to exactly two cells, boundary
// facets to exactly one.
void check_conformity(const SimplicialMesh& mesh) {
  std::map<std::vector<int>, int> facet_count;
  const int vpc = mesh.verts_per_cell();
  for (const auto& cell : mesh.cells)
    for (int drop = 0; drop < vpc; ++drop) {
      std::vector<int> facet;
      for (int i = 0; i < vpc; ++i)
        if (i != drop) facet.push_back(cell[i]);
      std::sort(facet.begin(), facet.end());
      facet_count[facet]++;
    }
  auto is_boundary = [&mesh](const std::vector<int>& facet) {
    for (int axis = 0; axis < mesh.dim; ++axis) {
      bool all_zero = true, all_one = true;
      for (int v : facet) {
        all_zero = all_zero && mesh.vertices[v][axis] == 0.0;
        all_one = all_one && mesh.vertices[v][axis] == 1.0;
      }
      if (all_zero || all_one) return true;
    }
    return false;
  };
  for (const auto& [facet, count] : facet_count)
    REQUIRE(count == (is_boundary(facet) ? 1 : 2));
}

}  // namespace

TEST_CASE("structured mesh counts") {
  const auto m21 = build_structured_mesh(2, 1);
  REQUIRE(m21.n_vertices() == 4);
  REQUIRE(m21.n_cells() == 2);

  const auto m24 = build_structured_mesh(2, 4);
  REQUIRE(m24.n_vertices() == 25);
  REQUIRE(m24.n_cells() == 32);

  const auto m31 = build_structured_mesh(3, 1);
  REQUIRE(m31.n_vertices() == 8);
  REQUIRE(m31.n_cells() == 6);
}

TEST_CASE("invalid arguments are rejected") {
  REQUIRE_THROWS_AS(build_structured_mesh(1, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(build_structured_mesh(4, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(build_structured_mesh(2, 0), std::invalid_argument);
}

TEST_CASE("cells tile the domain at every level") {
  for (int dim : {2, 3}) {
    auto mesh = build_structured_mesh(dim, dim == 2 ? 3 : 2);
    for (int level = 0; level < 3; ++level) {
      REQUIRE_THAT(total_volume(mesh),
                   Catch::Matchers::WithinAbs(1.0, 1e-14));
      if (level < 2) mesh = refine_uniform(mesh);
    }
  }
}

TEST_CASE("uniform refinement matches direct construction") {
  const auto coarse = build_structured_mesh(2, 1);
  const auto fine = refine_uniform(coarse);
  REQUIRE(fine.n == 2);
  REQUIRE(fine.level == coarse.level + 1);
  REQUIRE(fine.n_vertices() == 9);

  auto twice = refine_uniform(refine_uniform(build_structured_mesh(2, 2)));
  REQUIRE(twice.n_cells() == 2 * 8 * 8);
}

TEST_CASE("refinement is nested: coarse vertices persist exactly") {
  for (int dim : {2, 3}) {
    const auto coarse = build_structured_mesh(dim, dim == 2 ? 3 : 2);
    const auto fine = refine_uniform(coarse);
    std::set<std::array<double, 3>> fine_vertices(fine.vertices.begin(),
                                                  fine.vertices.end());
    for (const auto& v : coarse.vertices)
      REQUIRE(fine_vertices.count(v) == 1);
  }
}

TEST_CASE("meshes are conforming") {
  check_conformity(build_structured_mesh(2, 3));
  check_conformity(build_structured_mesh(3, 2));
}

TEST_CASE("barycentric gradients") {
  SECTION("hand-checked unit right triangle") {
    SimplicialMesh tri;
    tri.dim = 2;
    tri.n = 1;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.cells = {{0, 1, 2, -1}};
    const auto geom = barycentric_gradients(tri, 0);
    REQUIRE_THAT(geom.volume, Catch::Matchers::WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(geom.gradients[0][0], Catch::Matchers::WithinAbs(-1.0, 1e-15));
    REQUIRE_THAT(geom.gradients[0][1], Catch::Matchers::WithinAbs(-1.0, 1e-15));
    REQUIRE_THAT(geom.gradients[1][0], Catch::Matchers::WithinAbs(1.0, 1e-15));
    REQUIRE_THAT(geom.gradients[1][1], Catch::Matchers::WithinAbs(0.0, 1e-15));
    REQUIRE_THAT(geom.gradients[2][0], Catch::Matchers::WithinAbs(0.0, 1e-15));
    REQUIRE_THAT(geom.gradients[2][1], Catch::Matchers::WithinAbs(1.0, 1e-15));
  }

  SECTION("gradients sum to zero and volumes are positive") {
    for (int dim : {2, 3}) {
      const auto mesh = build_structured_mesh(dim, 2);
      for (int c = 0; c < mesh.n_cells(); ++c) {
        const auto geom = barycentric_gradients(mesh, c);
        REQUIRE(geom.volume > 0.0);
        Eigen::Vector3d sum = Eigen::Vector3d::Zero();
        for (int i = 0; i <= dim; ++i) sum += geom.gradients[i];
        REQUIRE(sum.norm() < 1e-13);
      }
    }
  }

  SECTION("degenerate cell is rejected") {
    SimplicialMesh bad;
    bad.dim = 2;
    bad.n = 1;
    bad.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    bad.cells = {{0, 1, 2, -1}};
    REQUIRE_THROWS_AS(barycentric_gradients(bad, 0), GeometryError);
  }
}

TEST_CASE("mesh size") {
  REQUIRE_THAT(build_structured_mesh(2, 4).h(),
               Catch::Matchers::WithinAbs(std::sqrt(2.0) / 4.0, 1e-15));
  REQUIRE_THAT(build_structured_mesh(3, 2).h(),
               Catch::Matchers::WithinAbs(std::sqrt(3.0) / 2.0, 1e-15));
}

TEST_CASE("P1 evaluation reproduces linear functions") {
  for (int dim : {2, 3}) {
    const auto mesh = build_structured_mesh(dim, 3);
    Vec nodal(mesh.n_vertices());
    auto linear = [dim](const std::array<double, 3>& x) {
      return 0.3 + 1.7 * x[0] - 0.9 * x[1] + (dim == 3 ? 0.45 * x[2] : 0.0);
    };
    for (int v = 0; v < mesh.n_vertices(); ++v)
      nodal[v] = linear(mesh.vertices[v]);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::array<double, 3> x = {U(rng), U(rng), dim == 3 ? U(rng) : 0.0};
      REQUIRE_THAT(evaluate_p1(mesh, nodal, x),
                   Catch::Matchers::WithinAbs(linear(x), 1e-13));
    }
  }
}
