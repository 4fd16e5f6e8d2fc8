#include "fem.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "errors.hpp"

namespace eigenflow {

Eigen::SparseMatrix<double> assemble_stiffness(const TriMesh& mesh) {
  const int n = mesh.vertex_count();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.triangle_count()) * 12);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);

  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    for (int c = 0; c < 3; ++c) {
      const int a = tri[c], b = tri[(c + 1) % 3], o = tri[(c + 2) % 3];
      const Eigen::Vector3d u = mesh.vertices()[a] - mesh.vertices()[o];
      const Eigen::Vector3d v = mesh.vertices()[b] - mesh.vertices()[o];
      const double cross = u.cross(v).norm();
      // Angle at `o` below 1e-8 rad: the cotangent has no usable precision.
      if (cross < 1e-8 * u.norm() * v.norm() && u.dot(v) > 0.0)
        throw Error::degenerate_triangle("triangle angle below 1e-8 rad");
      const double w = 0.5 * u.dot(v) / cross;
      trip.emplace_back(a, b, -w);
      trip.emplace_back(b, a, -w);
      diag[a] += w;
      diag[b] += w;
    }
  }
  for (int v = 0; v < n; ++v) trip.emplace_back(v, v, diag[v]);

  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  K.makeCompressed();
  return K;
}

Eigen::VectorXd lumped_area_weights(const TriMesh& mesh) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.vertex_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const double a = mesh.triangle_area(t) / 3.0;
    for (int c = 0; c < 3; ++c) m[mesh.triangles()[t][c]] += a;
  }
  return m;
}

Eigen::VectorXd boundary_length_weights(const TriMesh& mesh) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.vertex_count());
  for (const auto& loop : mesh.boundary_loops()) {
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const int p = loop[i], q = loop[(i + 1) % loop.size()];
      const double len = (mesh.vertices()[p] - mesh.vertices()[q]).norm();
      b[p] += 0.5 * len;
      b[q] += 0.5 * len;
    }
  }
  return b;
}

namespace {

Eigen::SparseMatrix<double> diagonal_sparse(const Eigen::VectorXd& d) {
  const auto n = d.size();
  Eigen::SparseMatrix<double> m(n, n);
  m.reserve(Eigen::VectorXi::Ones(static_cast<int>(n)));
  for (Eigen::Index i = 0; i < n; ++i) m.insert(i, i) = d[i];
  m.makeCompressed();
  return m;
}

void check_factor(const TriMesh& mesh, const ConformalFactor& f, FactorSupport want) {
  if (f.support != want) throw Error::invalid("conformal factor has the wrong support");
  const auto n = static_cast<Eigen::Index>(mesh.support_vertices(want).size());
  if (f.values.size() != n) throw Error::invalid("conformal factor size mismatch");
  if (!(f.values.minCoeff() > 0.0)) throw Error::invalid("conformal factor must be positive");
}

}  // namespace

Eigen::SparseMatrix<double> assemble_mass(const TriMesh& mesh, const ConformalFactor& f) {
  check_factor(mesh, f, FactorSupport::area);
  const Eigen::VectorXd d = lumped_area_weights(mesh).cwiseProduct(f.values);
  return diagonal_sparse(d);
}

Eigen::SparseMatrix<double> assemble_boundary_mass(const TriMesh& mesh,
                                                   const ConformalFactor& f) {
  if (!mesh.has_boundary()) throw Error::no_boundary("boundary mass needs a mesh with boundary");
  check_factor(mesh, f, FactorSupport::boundary);
  Eigen::VectorXd d = boundary_length_weights(mesh);
  const auto& bv = mesh.boundary_vertices();
  for (std::size_t i = 0; i < bv.size(); ++i) d[bv[i]] *= f.values[static_cast<Eigen::Index>(i)];
  return diagonal_sparse(d);
}

SpectralProblem build_problem(const TriMesh& mesh, const ConformalFactor& f) {
  SpectralProblem p;
  p.kind = (f.support == FactorSupport::area) ? ProblemKind::laplace : ProblemKind::steklov;
  p.stiffness = assemble_stiffness(mesh);
  if (p.kind == ProblemKind::laplace) {
    p.mass = lumped_area_weights(mesh).cwiseProduct(f.values);
  } else {
    check_factor(mesh, f, FactorSupport::boundary);
    p.mass = boundary_length_weights(mesh);
    const auto& bv = mesh.boundary_vertices();
    for (std::size_t i = 0; i < bv.size(); ++i)
      p.mass[bv[i]] *= f.values[static_cast<Eigen::Index>(i)];
  }
  p.total_measure = p.mass.sum();
  p.active = mesh.support_vertices(f.support);
  return p;
}

void write_matrix_market(const Eigen::SparseMatrix<double>& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error::io("cannot write matrix file: " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  char buf[64];
  for (int k = 0; k < m.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(it.row() + 1),
                    static_cast<long>(it.col() + 1), it.value());
      out << buf;
    }
  }
  if (!out) throw Error::io("failed writing matrix file: " + path);
}

}  // namespace eigenflow
