#include "fem.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "errors.hpp"
#include "mesh.hpp"
#include "rng.hpp"

using namespace eigenflow;

namespace {

TriMesh single_triangle(Eigen::Vector3d a, Eigen::Vector3d b, Eigen::Vector3d c) {
  return TriMesh::from_data({a, b, c}, {{0, 1, 2}});
}

TriMesh equilateral() {
  return single_triangle({0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0});
}

// Independent Dirichlet-energy oracle: per-triangle constant gradients of the
// hat basis, summed as sum_T area_T |sum_c u_c grad phi_c|^2.
double dirichlet_energy(const TriMesh& mesh, const Eigen::VectorXd& u) {
  double total = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const Eigen::Vector3d& pa = mesh.vertices()[tri[0]];
    const Eigen::Vector3d& pb = mesh.vertices()[tri[1]];
    const Eigen::Vector3d& pc = mesh.vertices()[tri[2]];
    const Eigen::Vector3d nrm = (pb - pa).cross(pc - pa);
    const double two_area = nrm.norm();
    const Eigen::Vector3d nhat = nrm / two_area;
    const Eigen::Vector3d ga = nhat.cross(pc - pb) / two_area;
    const Eigen::Vector3d gb = nhat.cross(pa - pc) / two_area;
    const Eigen::Vector3d gc = nhat.cross(pb - pa) / two_area;
    const Eigen::Vector3d g = u[tri[0]] * ga + u[tri[1]] * gb + u[tri[2]] * gc;
    total += 0.5 * two_area * g.squaredNorm();
  }
  return total;
}

}  // namespace

TEST_CASE("fem: equilateral triangle stiffness entries") {
  const auto K = assemble_stiffness(equilateral());
  const double w = 0.5 / std::tan(M_PI / 3.0);  // cot(60 deg)/2
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double want = (i == j) ? 2.0 * w : -w;
      CHECK(K.coeff(i, j) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  CHECK(K.coeff(0, 1) == doctest::Approx(-0.288675134594813).epsilon(1e-12));
}

TEST_CASE("fem: stiffness row sums are exactly zero") {
  const TriMesh s = TriMesh::icosphere(2);
  const auto K = assemble_stiffness(s);
  const Eigen::VectorXd r = K * Eigen::VectorXd::Ones(s.vertex_count());
  CHECK(r.cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("fem: right angle kills the hypotenuse weight") {
  const auto K = assemble_stiffness(single_triangle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}));
  CHECK(K.coeff(1, 2) == 0.0);
  CHECK(K.coeff(0, 1) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("fem: needle triangle is rejected") {
  const TriMesh m = single_triangle({0, 0, 0}, {1, 0, 0}, {2, 1e-9, 0});
  CHECK_THROWS_WITH_AS(assemble_stiffness(m), doctest::Contains("1e-8"), Error);
}

TEST_CASE("fem: stiffness never sees the conformal factor") {
  const TriMesh s = TriMesh::icosphere(1);
  const auto K1 = assemble_stiffness(s);
  const auto K2 = assemble_stiffness(s);
  REQUIRE(K1.nonZeros() == K2.nonZeros());
  for (int i = 0; i < K1.nonZeros(); ++i)
    CHECK(K1.valuePtr()[i] == K2.valuePtr()[i]);  // bitwise
}

TEST_CASE("fem: lumped mass") {
  const TriMesh tri = equilateral();
  const ConformalFactor one = uniform_factor(tri, FactorSupport::area);
  const auto M = assemble_mass(tri, one);
  const double third = std::sqrt(3.0) / 4.0 / 3.0;
  for (int i = 0; i < 3; ++i) CHECK(M.coeff(i, i) == doctest::Approx(third).epsilon(1e-12));

  const TriMesh s = TriMesh::icosphere(2);
  const ConformalFactor ones = uniform_factor(s, FactorSupport::area);
  const auto Ms = assemble_mass(s, ones);
  double trace = 0.0;
  for (int i = 0; i < s.vertex_count(); ++i) trace += Ms.coeff(i, i);
  CHECK(trace == doctest::Approx(s.total_area()).epsilon(1e-12));

  ConformalFactor twice = ones;
  twice.values *= 2.0;
  const auto M2 = assemble_mass(s, twice);
  for (int i = 0; i < s.vertex_count(); ++i)
    CHECK(M2.coeff(i, i) == doctest::Approx(2.0 * Ms.coeff(i, i)).epsilon(1e-14));

  ConformalFactor bad = ones;
  bad.values[0] = 0.0;
  CHECK_THROWS_AS(assemble_mass(s, bad), Error);
}

TEST_CASE("fem: boundary mass") {
  const int K = 5;
  const TriMesh d = TriMesh::unit_disk(K);
  const ConformalFactor one = uniform_factor(d, FactorSupport::boundary);
  const auto B = assemble_boundary_mass(d, one);
  double trace = 0.0;
  for (int i = 0; i < d.vertex_count(); ++i) trace += B.coeff(i, i);
  const int N = 6 * K;
  CHECK(trace == doctest::Approx(N * 2.0 * std::sin(M_PI / N)).epsilon(1e-12));

  for (int v = 0; v < d.vertex_count(); ++v) {
    if (!d.is_boundary_vertex(v)) CHECK(B.coeff(v, v) == 0.0);
    else CHECK(B.coeff(v, v) > 0.0);
  }

  // Doubling one vertex value rescales exactly one diagonal entry.
  ConformalFactor f = one;
  f.values[3] *= 2.0;
  const auto B2 = assemble_boundary_mass(d, f);
  const int v3 = d.boundary_vertices()[3];
  for (int v : d.boundary_vertices()) {
    const double want = (v == v3) ? 2.0 * B.coeff(v, v) : B.coeff(v, v);
    CHECK(B2.coeff(v, v) == doctest::Approx(want).epsilon(1e-14));
  }

  CHECK_THROWS_AS(assemble_boundary_mass(TriMesh::icosphere(1),
                                         ConformalFactor{FactorSupport::boundary,
                                                         Eigen::VectorXd::Ones(1)}),
                  Error);
}

TEST_CASE("fem: Galerkin energy matches per-triangle gradient oracle") {
  for (const TriMesh& m : {TriMesh::icosphere(1), TriMesh::unit_disk(3)}) {
    const auto K = assemble_stiffness(m);
    Rng rng(42);
    Eigen::VectorXd u(m.vertex_count());
    for (int i = 0; i < m.vertex_count(); ++i) u[i] = rng.normal();
    const double via_matrix = u.dot(K * u);
    const double via_oracle = dirichlet_energy(m, u);
    CHECK(via_matrix == doctest::Approx(via_oracle).epsilon(1e-12));

    // Single hat functions too.
    for (int v : {0, m.vertex_count() / 2}) {
      Eigen::VectorXd hat = Eigen::VectorXd::Zero(m.vertex_count());
      hat[v] = 1.0;
      CHECK(hat.dot(K * hat) == doctest::Approx(dirichlet_energy(m, hat)).epsilon(1e-12));
    }
  }
}

TEST_CASE("fem: build_problem bundles measure and support") {
  const TriMesh d = TriMesh::unit_disk(4);
  const auto pa = build_problem(d, uniform_factor(d, FactorSupport::area));
  CHECK(pa.kind == ProblemKind::laplace);
  CHECK(pa.total_measure == doctest::Approx(d.total_area()).epsilon(1e-12));
  CHECK(pa.active.size() == static_cast<std::size_t>(d.vertex_count()));
  CHECK(pa.mass.minCoeff() > 0.0);

  const auto pb = build_problem(d, uniform_factor(d, FactorSupport::boundary));
  CHECK(pb.kind == ProblemKind::steklov);
  CHECK(pb.active.size() == d.boundary_vertices().size());
  const int N = 24;
  CHECK(pb.total_measure == doctest::Approx(N * 2.0 * std::sin(M_PI / N)).epsilon(1e-12));
}

TEST_CASE("fem: matrix market dump") {
  const TriMesh m = equilateral();
  const auto K = assemble_stiffness(m);
  const auto path = (std::filesystem::temp_directory_path() / "ef_K.mtx").string();
  write_matrix_market(K, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "%%MatrixMarket matrix coordinate real general");
  int rows = 0, cols = 0, nnz = 0;
  in >> rows >> cols >> nnz;
  CHECK(rows == 3);
  CHECK(nnz == K.nonZeros());
}
