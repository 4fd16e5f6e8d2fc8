#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "functional.hpp"

namespace eigenflow {

// One extreme-point density of the subdifferential approximation:
//   psi = sum_i d_i * lambda_bar_i * (1 - measure * phi_i^2)
// for an orthonormal eigenfunction assignment (phi_1,...,phi_m).  Stored
// over the measure-carrying (active) vertex set, in the same order as the
// conformal factor's values, so psi pairs coordinate-wise with directions.
struct Subgradient {
  Eigen::VectorXd psi;
  std::string provenance;  // "canonical", "haar#<k>", or "symmetrized"
};

// Finite approximation of the subdifferential at an evaluation point.  The
// exact set is the closed convex hull over all eigenspace frames; we keep
// extreme points only, so criticality gaps can only be overestimated (the
// safe direction for descent).
struct SubgradientSet {
  std::vector<Subgradient> candidates;
  Eigen::VectorXd pairing_weights;  // conformal vertex measure / total, sums to 1
  std::vector<int> active;          // vertex ids the coordinates refer to
  double scale = 0.0;               // max_i |d_i| * lambda_bar_i, for tolerances
};

struct GenerateOptions {
  int samples = 32;          // Haar frames drawn per generation (joint over clusters)
  std::uint64_t seed = 0x5eedULL;
  int max_cluster = 8;       // refuse eigenvalue clusters larger than this
};

// Emits the canonical computed-basis candidate; when any requested index
// sits in a multidimensional eigenvalue cluster, also `samples` random
// orthonormal in-cluster frames and the rotation-averaged (projector
// diagonal) candidate.  With an all-simple spectrum every frame gives the
// same psi, so exactly one candidate is returned.
// Every candidate satisfies sum_v w_v psi_v = 0 within 1e-8 by construction.
SubgradientSet generate_candidates(const Evaluation& eval, const GenerateOptions& opts = {});

// |dE(f)| = -min over vertex probability measures tau of the worst candidate
// pairing max_a <tau, psi_a>, computed as a zero-sum matrix game.
struct PseudoNormResult {
  double value = 0.0;         // >= -1e-9 * scale by the zero-mean invariant
  Eigen::VectorXd tau;        // optimal probability over active vertices
  Eigen::VectorXd worst_mix;  // convex candidate weights attaining the inner max
  double duality_gap = 0.0;   // certified bracket width from the two LP solves
};

PseudoNormResult pseudo_norm(const SubgradientSet& set);

// Criticality test with certificates: below `tol` the point is declared
// critical and `mix` carries convex weights minimizing the sup-norm of the
// mixed density (zero in the hull); above, `tau` witnesses descent.
struct CriticalityReport {
  bool critical = false;
  double value = 0.0;         // the pseudo-norm
  double duality_gap = 0.0;
  Eigen::VectorXd tau;
  Eigen::VectorXd mix;        // min sup-norm mixture when critical, else worst_mix
  double mix_residual = 0.0;  // sup-norm of the mixed density for `mix`
  bool nonneg_member = false; // some mixture is entrywise >= -tol
};

CriticalityReport is_critical(const SubgradientSet& set, double tol);

// Support function max_a <h, psi_a> against the pairing measure: the least
// right derivative of E along the relative direction h among all candidate
// branches.  Intended for h >= 0 with <w, h> = 1; no validation beyond size.
double support_function(const SubgradientSet& set, const Eigen::VectorXd& h);

}  // namespace eigenflow
