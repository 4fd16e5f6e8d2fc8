#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fem.hpp"

namespace eigenflow {

struct SolveOptions {
  double eig_tol = 1e-9;       // relative residual target per pair
  double cluster_tol = 1e-3;   // relative gap that merges eigenvalues
  int max_iterations = 600;
  std::uint64_t seed = 0x5eedULL;
};

// Lowest eigenpairs of K phi = lambda * diag(mass) phi, ascending.  Vectors
// are mass-orthonormal columns over the full vertex set (for Steklov they are
// the harmonic extensions, orthonormal in the boundary measure).  Index 0 is
// the constant mode, pinned to eigenvalue exactly 0.
struct EigenPackage {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  std::vector<std::vector<int>> clusters;
  Eigen::VectorXd renormalized;  // values * total_measure
  Eigen::VectorXd residuals;     // ||K phi - lambda M phi|| / max(1, lambda)
  double total_measure = 0.0;
};

EigenPackage solve_laplace(const SpectralProblem& problem, int count,
                           const SolveOptions& opts = {});
EigenPackage solve_steklov(const SpectralProblem& problem, int count,
                           const SolveOptions& opts = {});
// Dispatch on problem.kind.
EigenPackage solve_spectrum(const SpectralProblem& problem, int count,
                            const SolveOptions& opts = {});

// Consecutive indices join a cluster iff the gap is at most
// cluster_tol * max(1, upper value); transitive closure.
std::vector<std::vector<int>> cluster_eigenvalues(const Eigen::VectorXd& values,
                                                  double cluster_tol);

}  // namespace eigenflow
