#include "subgradient.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include "errors.hpp"
#include "game.hpp"
#include "lp.hpp"
#include "rng.hpp"

namespace eigenflow {

namespace {

// Haar-distributed orthonormal frame: QR of a Gaussian block with the sign
// ambiguity fixed by R's diagonal.
Eigen::MatrixXd haar_frame(int p, Rng& rng) {
  Eigen::MatrixXd g(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd r = qr.matrixQR();
  for (int j = 0; j < p; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

// One requested cluster: eigenvector block restricted to active rows, plus
// the (in-cluster position, d_i * lambda_bar_i) terms attached to it.
struct ClusterBlock {
  Eigen::MatrixXd phi;
  std::vector<std::pair<int, double>> terms;
  bool multi = false;
};

}  // namespace

SubgradientSet generate_candidates(const Evaluation& eval, const GenerateOptions& opts) {
  if (!eval.eigen || !eval.problem)
    throw Error::invalid("evaluation carries no solver state");
  const EigenPackage& pkg = *eval.eigen;
  const SpectralProblem& prob = *eval.problem;
  const auto m = static_cast<Eigen::Index>(eval.indices.size());
  if (m == 0 || eval.d.size() != m || eval.lambda_bar.size() != m)
    throw Error::invalid("evaluation index/coefficient data inconsistent");
  if (opts.samples < 0 || opts.max_cluster < 1)
    throw Error::invalid("bad candidate generation options");

  SubgradientSet set;
  set.active = prob.active;
  const int n = static_cast<int>(set.active.size());
  set.pairing_weights.resize(n);
  for (int i = 0; i < n; ++i)
    set.pairing_weights[i] = prob.mass[set.active[i]] / prob.total_measure;

  std::vector<int> cluster_of(pkg.values.size(), -1);
  for (std::size_t c = 0; c < pkg.clusters.size(); ++c)
    for (int k : pkg.clusters[c]) cluster_of[k] = static_cast<int>(c);

  std::map<int, ClusterBlock> blocks;
  for (Eigen::Index r = 0; r < m; ++r) {
    const int k = eval.indices[static_cast<std::size_t>(r)];
    if (k < 1 || k >= pkg.values.size())
      throw Error::invalid("spectral index outside the computed window");
    const auto& cluster = pkg.clusters[cluster_of[k]];
    const int p = static_cast<int>(cluster.size());
    if (p > opts.max_cluster)
      throw Error::cluster_too_large("eigenvalue cluster of dimension " + std::to_string(p) +
                                     " exceeds the configured maximum " +
                                     std::to_string(opts.max_cluster));
    ClusterBlock& block = blocks[cluster_of[k]];
    if (block.phi.size() == 0) {
      block.phi.resize(n, p);
      for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) block.phi(i, j) = pkg.vectors(set.active[i], cluster[j]);
      block.multi = p > 1;
    }
    const int pos =
        static_cast<int>(std::find(cluster.begin(), cluster.end(), k) - cluster.begin());
    block.terms.emplace_back(pos, eval.d[r] * eval.lambda_bar[r]);
    set.scale = std::max(set.scale, std::abs(eval.d[r]) * std::abs(eval.lambda_bar[r]));
  }

  const double measure = prob.total_measure;
  enum class Frame { canonical, haar, symmetrized };

  auto emit = [&](Frame mode, Rng* rng, std::string name) {
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
    for (auto& [cid, block] : blocks) {
      (void)cid;
      const int p = static_cast<int>(block.phi.cols());
      if (mode == Frame::symmetrized && block.multi) {
        // The projector diagonal is what phi^2 averages to over rotations.
        const Eigen::ArrayXd diag = block.phi.array().square().rowwise().sum() / p;
        for (const auto& [pos, weight] : block.terms) {
          (void)pos;
          psi.array() += weight * (1.0 - measure * diag);
        }
        continue;
      }
      Eigen::MatrixXd basis = block.phi;
      if (mode == Frame::haar && block.multi) basis = block.phi * haar_frame(p, *rng);
      for (const auto& [pos, weight] : block.terms)
        psi.array() += weight * (1.0 - measure * basis.col(pos).array().square());
    }
    const double mean = set.pairing_weights.dot(psi);
    if (std::abs(mean) > 1e-8 * std::max(1.0, psi.cwiseAbs().maxCoeff()))
      throw Error::normalization("candidate density has mean " + std::to_string(mean));
    set.candidates.push_back({std::move(psi), std::move(name)});
  };

  bool any_multi = false;
  for (const auto& [cid, block] : blocks) {
    (void)cid;
    any_multi = any_multi || block.multi;
  }

  emit(Frame::canonical, nullptr, "canonical");
  if (any_multi) {
    // With every requested eigenvalue simple, frames differ only by signs
    // and psi is even in phi, so the canonical candidate is the whole set.
    Rng rng(opts.seed);
    for (int s = 0; s < opts.samples; ++s)
      emit(Frame::haar, &rng, "haar#" + std::to_string(s));
    emit(Frame::symmetrized, nullptr, "symmetrized");
  }
  return set;
}

PseudoNormResult pseudo_norm(const SubgradientSet& set) {
  if (set.candidates.empty()) throw Error::invalid("no subgradient candidates");
  const int r = static_cast<int>(set.candidates.size());
  const int n = static_cast<int>(set.pairing_weights.size());
  Eigen::MatrixXd payoff(r, n);
  for (int a = 0; a < r; ++a) {
    if (set.candidates[a].psi.size() != n)
      throw Error::invalid("candidate/weight size mismatch");
    payoff.row(a) = set.candidates[a].psi.transpose();
  }
  const GameSolution game = solve_matrix_game(payoff);
  const double scale = std::max(1.0, payoff.cwiseAbs().maxCoeff());
  if (game.duality_gap > 1e-9 * scale)
    throw Error::lp_failure("pseudo-norm uncertified: duality gap " +
                            std::to_string(game.duality_gap));
  PseudoNormResult res;
  res.value = -game.value;
  res.tau = game.col_mix;
  res.worst_mix = game.row_mix;
  res.duality_gap = game.duality_gap;
  return res;
}

CriticalityReport is_critical(const SubgradientSet& set, double tol) {
  if (!(tol >= 0.0)) throw Error::invalid("criticality tolerance must be nonnegative");
  const PseudoNormResult pn = pseudo_norm(set);
  const int r = static_cast<int>(set.candidates.size());
  const int n = static_cast<int>(set.pairing_weights.size());

  CriticalityReport rep;
  rep.value = pn.value;
  rep.duality_gap = pn.duality_gap;
  rep.tau = pn.tau;
  rep.critical = pn.value <= tol;

  // The maximizing mixture guarantees <tau, mixed> >= -value for every tau,
  // so its entrywise floor decides membership of a nonnegative density.
  Eigen::VectorXd mixed = Eigen::VectorXd::Zero(n);
  for (int a = 0; a < r; ++a) mixed += pn.worst_mix[a] * set.candidates[a].psi;
  rep.nonneg_member = mixed.minCoeff() >= -tol;

  if (!rep.critical) {
    rep.mix = pn.worst_mix;
    rep.mix_residual = mixed.cwiseAbs().maxCoeff();
    return rep;
  }

  // Certificate for 0 in the hull: minimize t with |sum_a c_a psi_a| <= t
  // entrywise over the candidate simplex; variables (c, t), all >= 0.
  Eigen::MatrixXd A(2 * n + 2, r + 1);
  Eigen::VectorXd b(2 * n + 2);
  for (int v = 0; v < n; ++v) {
    for (int a = 0; a < r; ++a) {
      A(v, a) = set.candidates[a].psi[v];
      A(n + v, a) = -set.candidates[a].psi[v];
    }
    A(v, r) = -1.0;
    A(n + v, r) = -1.0;
    b[v] = 0.0;
    b[n + v] = 0.0;
  }
  A.row(2 * n).setOnes();
  A(2 * n, r) = 0.0;
  b[2 * n] = 1.0;
  A.row(2 * n + 1) = -A.row(2 * n);
  b[2 * n + 1] = -1.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(r + 1);
  c[r] = -1.0;

  const LpResult lp = solve_lp(A, b, c);
  if (lp.status != LpStatus::optimal)
    throw Error::lp_failure("sup-norm mixture certificate LP did not solve");
  rep.mix = lp.x.head(r);
  mixed.setZero();
  for (int a = 0; a < r; ++a) mixed += rep.mix[a] * set.candidates[a].psi;
  rep.mix_residual = mixed.cwiseAbs().maxCoeff();
  return rep;
}

double support_function(const SubgradientSet& set, const Eigen::VectorXd& h) {
  if (set.candidates.empty()) throw Error::invalid("no subgradient candidates");
  if (h.size() != set.pairing_weights.size())
    throw Error::invalid("direction size mismatch");
  const Eigen::VectorXd paired = set.pairing_weights.cwiseProduct(h);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& cand : set.candidates) best = std::max(best, paired.dot(cand.psi));
  return best;
}

}  // namespace eigenflow
