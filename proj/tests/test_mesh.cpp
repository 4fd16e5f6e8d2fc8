#include "mesh.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "errors.hpp"

using namespace eigenflow;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << body;
  return path;
}

constexpr const char* kTriangleOff =
    "OFF\n"
    "3 1 0\n"
    "0 0 0\n"
    "1 0 0\n"
    "0.5 0.8660254037844386 0\n"
    "3 0 1 2\n";

}  // namespace

TEST_CASE("mesh: OFF triangle parses with one boundary loop") {
  const auto path = write_temp("ef_tri.off", kTriangleOff);
  const TriMesh m = TriMesh::load_off(path);
  CHECK(m.vertex_count() == 3);
  CHECK(m.triangle_count() == 1);
  CHECK(m.edge_count() == 3);
  REQUIRE(m.boundary_loops().size() == 1);
  CHECK(m.boundary_loops()[0].size() == 3);
  CHECK(m.euler_characteristic() == 1);
  CHECK(m.genus() == 0);
  CHECK(m.total_area() == doctest::Approx(std::sqrt(3.0) / 4.0).epsilon(1e-12));
}

TEST_CASE("mesh: OFF rejects malformed input") {
  CHECK_THROWS_WITH_AS(TriMesh::load_off(write_temp("ef_quad.off",
                                                    "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n"
                                                    "4 0 1 2 3\n")),
                       doctest::Contains("only triangle"), Error);
  CHECK_THROWS_AS(TriMesh::load_off(write_temp("ef_trunc.off", "OFF\n5 2 0\n0 0 0\n")), Error);
  CHECK_THROWS_AS(TriMesh::load_off(write_temp("ef_idx.off",
                                               "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n")),
                  Error);
  CHECK_THROWS_AS(TriMesh::load_off("/nonexistent/mesh.off"), Error);
}

TEST_CASE("mesh: octahedron is a closed genus-0 surface") {
  const TriMesh m = TriMesh::octahedron();
  CHECK(m.vertex_count() == 6);
  CHECK(m.edge_count() == 12);
  CHECK(m.triangle_count() == 8);
  CHECK(m.euler_characteristic() == 2);
  CHECK(m.genus() == 0);
  CHECK_FALSE(m.has_boundary());
}

TEST_CASE("mesh: duplicate face is rejected") {
  std::vector<Eigen::Vector3d> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  std::vector<std::array<int, 3>> f = {{0, 1, 2}, {2, 1, 3}, {0, 1, 2}};
  CHECK_THROWS_WITH_AS(TriMesh::from_data(v, f), doctest::Contains("halfedge"), Error);
}

TEST_CASE("mesh: edge shared by three triangles is rejected") {
  std::vector<Eigen::Vector3d> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, -1, 0}};
  std::vector<std::array<int, 3>> f = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
  CHECK_THROWS_AS(TriMesh::from_data(v, f), Error);
}

TEST_CASE("mesh: bowtie vertex link is rejected") {
  std::vector<Eigen::Vector3d> v = {{0, 0, 0},  {1, 0, 0},  {1, 1, 0},
                                    {-1, 0, 0}, {-1, -1, 0}};
  std::vector<std::array<int, 3>> f = {{0, 1, 2}, {0, 3, 4}};
  CHECK_THROWS_WITH_AS(TriMesh::from_data(v, f), doctest::Contains("non-manifold"), Error);
}

TEST_CASE("mesh: disconnected mesh is rejected") {
  std::vector<Eigen::Vector3d> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0},
                                    {5, 0, 0}, {6, 0, 0}, {5, 1, 0}};
  std::vector<std::array<int, 3>> f = {{0, 1, 2}, {3, 4, 5}};
  CHECK_THROWS_WITH_AS(TriMesh::from_data(v, f), doctest::Contains("connected"), Error);
}

TEST_CASE("mesh: zero-area triangle is rejected") {
  std::vector<Eigen::Vector3d> v = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  std::vector<std::array<int, 3>> f = {{0, 1, 2}};
  CHECK_THROWS_AS(TriMesh::from_data(v, f), Error);
}

TEST_CASE("mesh: refinement counts and projection") {
  const TriMesh oct = TriMesh::octahedron();
  const TriMesh r = oct.refined(1, false);
  CHECK(r.vertex_count() == 18);
  CHECK(r.triangle_count() == 32);
  CHECK(r.euler_characteristic() == 2);

  const TriMesh s = TriMesh::icosahedron().refined(3, true);
  CHECK(s.vertex_count() == 642);
  for (const auto& p : s.vertices()) CHECK(std::abs(p.norm() - 1.0) < 1e-12);

  CHECK(oct.refined(0, false).vertex_count() == 6);
}

TEST_CASE("mesh: square with hole has chi 0 and two boundary loops") {
  const TriMesh m = TriMesh::square_with_hole();
  CHECK(m.euler_characteristic() == 0);
  CHECK(m.genus() == 0);
  REQUIRE(m.boundary_loops().size() == 2);
  // Each boundary edge sits in exactly one loop.
  std::set<std::pair<int, int>> loop_edges;
  std::size_t total = 0;
  for (const auto& loop : m.boundary_loops()) {
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const int a = loop[i], b = loop[(i + 1) % loop.size()];
      loop_edges.insert({std::min(a, b), std::max(a, b)});
      ++total;
    }
  }
  CHECK(loop_edges.size() == total);
  std::size_t boundary_edge_count = 0;
  for (const auto& e : m.edges()) {
    if (loop_edges.count({e[0], e[1]})) ++boundary_edge_count;
  }
  CHECK(boundary_edge_count == total);
}

TEST_CASE("mesh: flat torus realizes the unit-square metric") {
  const int n = 8;
  const TriMesh m = TriMesh::flat_torus(n);
  CHECK(m.vertex_count() == n * n);
  CHECK(m.triangle_count() == 2 * n * n);
  CHECK(m.edge_count() == 3 * n * n);
  CHECK(m.euler_characteristic() == 0);
  CHECK(m.genus() == 1);
  CHECK_FALSE(m.has_boundary());
  for (int t = 0; t < m.triangle_count(); ++t)
    CHECK(m.triangle_area(t) == doctest::Approx(0.5 / (n * n)).epsilon(1e-10));
  const double h = 1.0 / n;
  for (const auto& e : m.edges()) {
    const double len = (m.vertices()[e[0]] - m.vertices()[e[1]]).norm();
    const bool axis = std::abs(len - h) < 1e-12;
    const bool diag = std::abs(len - std::sqrt(2.0) * h) < 1e-12;
    CHECK((axis || diag));
  }
  CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(TriMesh::flat_torus(7), Error);
}

TEST_CASE("mesh: unit disk rings") {
  const int K = 5;
  const TriMesh m = TriMesh::unit_disk(K);
  CHECK(m.vertex_count() == 1 + 3 * K * (K + 1));
  CHECK(m.triangle_count() == 6 * K * K);
  CHECK(m.euler_characteristic() == 1);
  REQUIRE(m.boundary_loops().size() == 1);
  CHECK(m.boundary_loops()[0].size() == static_cast<std::size_t>(6 * K));
  for (int v : m.boundary_vertices())
    CHECK(m.vertices()[v].norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mesh: OFF round trip") {
  const TriMesh m = TriMesh::unit_disk(3);
  const auto path = (std::filesystem::temp_directory_path() / "ef_rt.off").string();
  m.save_off(path);
  const TriMesh r = TriMesh::load_off(path);
  REQUIRE(r.vertex_count() == m.vertex_count());
  REQUIRE(r.triangle_count() == m.triangle_count());
  for (int v = 0; v < m.vertex_count(); ++v)
    CHECK((r.vertices()[v] - m.vertices()[v]).norm() == doctest::Approx(0.0).epsilon(1e-16));
}

TEST_CASE("mesh: geodesic balls") {
  const TriMesh s = TriMesh::icosphere(2);
  const int n = s.vertex_count();

  // Radius beyond any graph distance captures every vertex.
  const auto all = s.geodesic_ball(0, 10.0);
  CHECK(static_cast<int>(all.size()) == n);

  // Half the shortest incident edge catches nothing but the center.
  double emin = 1e9;
  for (int w : s.neighbors()[0]) emin = std::min(emin, (s.vertices()[0] - s.vertices()[w]).norm());
  CHECK_THROWS_AS(s.geodesic_ball(0, 0.5 * emin), Error);

  // Graph distance dominates great-circle distance.
  const auto near = s.geodesic_ball(0, 0.8);
  for (int v : near) {
    const double exact = std::acos(std::clamp(s.vertices()[0].dot(s.vertices()[v]), -1.0, 1.0));
    CHECK(exact <= 0.8 + 1e-12);
  }

  // Scaling the density by c^2 scales distances by c.
  const TriMesh t = TriMesh::flat_torus(8);
  ConformalFactor f4 = uniform_factor(t, FactorSupport::area);
  f4.values *= 4.0;
  const auto b1 = t.geodesic_ball(3, 0.30);
  const auto b2 = t.geodesic_ball(3, 0.60, &f4);
  CHECK(b1 == b2);

  CHECK_THROWS_AS(t.geodesic_ball(-1, 1.0), Error);
  CHECK_THROWS_AS(t.geodesic_ball(0, -1.0), Error);
}

TEST_CASE("mesh: perturbed factor is positive and deterministic") {
  const TriMesh s = TriMesh::icosphere(1);
  const ConformalFactor a = perturbed_factor(s, FactorSupport::area, 0.3, 7);
  const ConformalFactor b = perturbed_factor(s, FactorSupport::area, 0.3, 7);
  const ConformalFactor c = perturbed_factor(s, FactorSupport::area, 0.3, 8);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  CHECK(a.values.minCoeff() > 0.0);
  CHECK(a.values.maxCoeff() <= 1.3 + 1e-12);
  CHECK(a.values.minCoeff() >= 0.7 - 1e-12);

  const TriMesh d = TriMesh::unit_disk(4);
  const ConformalFactor bd = perturbed_factor(d, FactorSupport::boundary, 0.2, 3);
  CHECK(bd.values.size() == static_cast<Eigen::Index>(d.boundary_vertices().size()));
  CHECK(bd.values.minCoeff() > 0.0);
}
