#include "game.hpp"

#include <cmath>

#include "errors.hpp"
#include "lp.hpp"

namespace eigenflow {

GameSolution solve_matrix_game(const Eigen::MatrixXd& payoff) {
  const int r = static_cast<int>(payoff.rows());
  const int c = static_cast<int>(payoff.cols());
  if (r == 0 || c == 0) throw Error::invalid("empty game matrix");

  // Normalize scale and shift entries to >= 1 so the classic reduction
  // (positive game value) applies; both transforms are undone by evaluating
  // the recovered strategies against the raw payoff.
  const double scale = std::max(1.0, payoff.cwiseAbs().maxCoeff());
  Eigen::MatrixXd G = payoff / scale;
  const double shift = 1.0 - G.minCoeff();
  G.array() += shift;

  // Column player: min_q max over rows. With x = q / value, the LP reads
  // max 1^T x s.t. G x <= 1, x >= 0, optimum 1/value.
  const LpResult lq = solve_lp(G, Eigen::VectorXd::Ones(r), Eigen::VectorXd::Ones(c));
  if (lq.status != LpStatus::optimal || !(lq.value > 0.0))
    throw Error::lp_failure("column-player LP did not reach a positive optimum");

  // Row player: max_p min over columns; with y = p / value the LP is
  // min 1^T y s.t. G^T y >= 1, here as max -1^T y, -G^T y <= -1.
  const LpResult lp = solve_lp(-G.transpose(), -Eigen::VectorXd::Ones(c),
                               -Eigen::VectorXd::Ones(r));
  if (lp.status != LpStatus::optimal || !(lp.value < 0.0))
    throw Error::lp_failure("row-player LP did not reach a negative optimum");

  GameSolution sol;
  sol.col_mix = lq.x / lq.x.sum();
  sol.row_mix = lp.x / lp.x.sum();
  // Clean tiny simplex violations from pivoting arithmetic.
  sol.col_mix = sol.col_mix.cwiseMax(0.0);
  sol.col_mix /= sol.col_mix.sum();
  sol.row_mix = sol.row_mix.cwiseMax(0.0);
  sol.row_mix /= sol.row_mix.sum();

  const double upper = (payoff * sol.col_mix).maxCoeff();
  const double lower = (payoff.transpose() * sol.row_mix).minCoeff();
  sol.value = upper;
  sol.duality_gap = upper - lower;
  if (!(sol.duality_gap >= -1e-12) || !std::isfinite(sol.duality_gap))
    throw Error::lp_failure("inconsistent game certificates");
  return sol;
}

}  // namespace eigenflow
