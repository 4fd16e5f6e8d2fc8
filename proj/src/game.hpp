#pragma once

#include <Eigen/Dense>

namespace eigenflow {

// Value and optimal mixed strategies of the zero-sum matrix game with payoff
// P(i, j) to the row player: rows maximize, columns minimize.
//   value = min_q max_i (P q)_i = max_p min_j (P^T p)_j.
// Both strategies are recovered from independent LP solves; duality_gap =
// max_i (P col_mix)_i - min_j (P^T row_mix)_j brackets the reported value.
struct GameSolution {
  double value = 0.0;          // max_i (P col_mix)_i, the certified upper bound
  Eigen::VectorXd row_mix;     // maximizer mixture, simplex of rows
  Eigen::VectorXd col_mix;     // minimizer mixture, simplex of columns
  double duality_gap = 0.0;
};

GameSolution solve_matrix_game(const Eigen::MatrixXd& payoff);

}  // namespace eigenflow
