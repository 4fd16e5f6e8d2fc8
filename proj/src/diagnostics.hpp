#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "functional.hpp"

namespace eigenflow {

// Health report for the sphere-map structure at a (near-)critical factor.
// The eigenfunction clusters touched by the evaluated indices are assembled
// into a map Phi whose coordinates are scaled by per-coordinate weights t
// with sum_j lambda_j t_j = 1 (mass-normalized measure).  At a critical point
// of an eigenvalue combination, omega = |Phi|_Lambda is pointwise ~1 and
// Phi/omega is a near-harmonic map into the ellipsoid, so every field below
// measures distance from that structure.
struct SphereMapReport {
  std::vector<int> members;  // eigen indices used as map coordinates
  Eigen::VectorXd t;         // per-coordinate mass weights; sum lambda*t = 1
  Eigen::VectorXd omega;     // per-vertex |Phi|_Lambda
  double delta = 0.0;              // max_v |omega_v^2 - 1|
  double omega_energy = 0.0;       // discrete integral of |grad omega|^2/omega
  double harmonic_residual = 0.0;  // max row norm of K*(Phi/omega) over
                                   // vertices carrying little measure
  double measure_integral = 0.0;   // normalized measure total (exactly ~1)
  double mass_integral = 0.0;      // integral |Phi|^2_Lambda dmu        (~1)
  double energy_integral = 0.0;    // integral |grad Phi|^2              (~1)
};

// Laplace problems only: the map lives on the closed surface.  Throws
// NormalizationFailure when the gradient weights cannot scale the map
// (all-zero d or vanishing eigenvalues) and InvalidArgument for
// boundary-supported factors.
SphereMapReport sphere_map_report(const TriMesh& mesh, const Evaluation& eval);

// Galerkin identity on the scaled map: integral |grad Phi|^2 should equal
// sum_j t_j lambda_j; the relative gap is pure solver residual and grows
// proportionally when the eigensolve is truncated early.
struct EnergyIdentity {
  double dirichlet_energy = 0.0;   // integral |grad Phi|^2
  double mass_weighted_sum = 0.0;  // sum_j t_j lambda_j (recomputed mass norms)
  double gap = 0.0;                // |difference| / max(1, dirichlet_energy)
};
EnergyIdentity energy_identity_check(const Evaluation& eval);

// One clamped-ball solve: the first Dirichlet eigenvalue of the problem
// restricted to the geodesic ball, every vertex outside clamped to zero.
struct BallSolveRecord {
  int center = 0;
  double radius = 0.0;
  double lambda_star = 0.0;
  int interior_count = 0;
  bool hit = false;  // lambda_star <= lambda_{k_m} of the whole surface
};

struct BadPointReport {
  std::vector<int> centers;
  std::vector<double> radii;
  // One record per (center, radius), center-major, radii ascending.
  std::vector<BallSolveRecord> balls;
  int k_m = 0;
  double lambda_reference = 0.0;  // lambda_{k_m}, unnormalized
  // Greedy extraction of pairwise vertex-disjoint hit balls (smallest hit
  // radius per center, strongest concentration first); indices into `balls`.
  std::vector<std::size_t> disjoint_hits;
  bool count_bound_ok = true;  // disjoint hit count <= k_m (violation is
                               // reported, not fatal)
};

// Concentration scan: flags geodesic balls whose clamped first eigenvalue
// falls to (or below) lambda_{k_m} of the whole surface, the discrete
// signature of measure concentrating at a point.  Balls use the background
// metric; radii must be positive ascending.  Centers are every vertex on
// meshes up to 3000 vertices, else a farthest-point sample of max_centers.
// Throws BallTooSmall when a requested ball has fewer than 4 interior
// vertices.  Laplace problems only.
BadPointReport bad_point_scan(const TriMesh& mesh, const ConformalFactor& f,
                              const EigenPackage& pkg, int k_m,
                              const std::vector<double>& radii,
                              int max_centers = 256);

}  // namespace eigenflow
