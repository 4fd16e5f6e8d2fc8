#pragma once

#include <Eigen/Sparse>
#include <string>

#include "mesh.hpp"

namespace eigenflow {

enum class ProblemKind { laplace, steklov };

// Discrete generalized eigenproblem K phi = lambda * diag(mass) phi.  The
// mass diagonal is full vertex length; for Steklov it vanishes at interior
// vertices.  total_measure plays the role of Area(f) or Length(f) in the
// renormalized eigenvalues.
struct SpectralProblem {
  ProblemKind kind = ProblemKind::laplace;
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd mass;  // diagonal
  double total_measure = 0.0;
  std::vector<int> active;  // vertices carrying measure, ascending
};

// Cotangent-weight stiffness; independent of any conformal factor (2-D
// conformal invariance).  Row sums are exactly zero: the diagonal is
// accumulated as the negated off-diagonal sum.
Eigen::SparseMatrix<double> assemble_stiffness(const TriMesh& mesh);

// Bare lumped vertex measures with f = 1: one third of incident triangle
// area, resp. half of incident boundary edge length (zero at interior
// vertices).
Eigen::VectorXd lumped_area_weights(const TriMesh& mesh);
Eigen::VectorXd boundary_length_weights(const TriMesh& mesh);

// Lumped mass diag(m_v * f_v) as a sparse matrix (diagonal).
Eigen::SparseMatrix<double> assemble_mass(const TriMesh& mesh, const ConformalFactor& f);
// Boundary lumped mass diag(b_v * f_v); zero rows at interior vertices.
Eigen::SparseMatrix<double> assemble_boundary_mass(const TriMesh& mesh,
                                                   const ConformalFactor& f);

// Bundle stiffness and the measure selected by f.support.
SpectralProblem build_problem(const TriMesh& mesh, const ConformalFactor& f);

// Coordinate MatrixMarket dump (symmetric general pattern) for debugging.
void write_matrix_market(const Eigen::SparseMatrix<double>& m, const std::string& path);

}  // namespace eigenflow
