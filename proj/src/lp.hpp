#pragma once

#include <Eigen/Dense>

namespace eigenflow {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::optimal;
  double value = 0.0;      // objective at the optimum
  Eigen::VectorXd x;       // primal point (size = #variables)
};

// Dense two-phase simplex for
//     maximize c^T x   subject to   A x <= b,  x >= 0.
// Tableau keeps slack variables implicit, so memory is (m+2) x (n+2).
// Lexicographic (value, variable-id) pivot selection avoids cycling.
LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c);

}  // namespace eigenflow
