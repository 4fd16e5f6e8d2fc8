#include "lp.hpp"

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace eigenflow {

namespace {

constexpr double kEps = 1e-9;

// Full-tableau simplex over the nonbasic space.  Row m carries the real
// objective, row m+1 the auxiliary one used to drive the artificial variable
// out when the all-slack basis is infeasible.  Column n is the artificial
// variable, column n+1 the right-hand side.
class Tableau {
 public:
  Tableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c)
      : m_(static_cast<int>(A.rows())),
        n_(static_cast<int>(A.cols())),
        N_(n_ + 1),
        B_(m_),
        D_(m_ + 2, std::vector<double>(n_ + 2, 0.0)) {
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < n_; ++j) D_[i][j] = A(i, j);
      B_[i] = n_ + i;
      D_[i][n_] = -1.0;
      D_[i][n_ + 1] = b[i];
    }
    for (int j = 0; j < n_; ++j) {
      N_[j] = j;
      D_[m_][j] = -c[j];
    }
    N_[n_] = -1;
    D_[m_ + 1][n_] = 1.0;
  }

  double solve(Eigen::VectorXd& x) {
    int r = 0;
    for (int i = 1; i < m_; ++i)
      if (D_[i][n_ + 1] < D_[r][n_ + 1]) r = i;
    if (D_[r][n_ + 1] < -kEps) {
      pivot(r, n_);
      if (!optimize(2) || D_[m_ + 1][n_ + 1] < -kEps)
        return -std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        if (B_[i] != -1) continue;
        int s = 0;
        for (int j = 1; j <= n_; ++j)
          if (better(i, j, s)) s = j;
        pivot(i, s);
      }
    }
    const bool bounded = optimize(1);
    x = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < m_; ++i)
      if (B_[i] < n_) x[B_[i]] = D_[i][n_ + 1];
    return bounded ? D_[m_][n_ + 1] : std::numeric_limits<double>::infinity();
  }

 private:
  bool better(int row, int j, int s) const {
    return std::pair(D_[row][j], N_[j]) < std::pair(D_[row][s], N_[s]);
  }

  void pivot(int r, int s) {
    double* a = D_[r].data();
    const double inv = 1.0 / a[s];
    for (int i = 0; i < m_ + 2; ++i) {
      if (i == r || std::abs(D_[i][s]) <= kEps) continue;
      double* b = D_[i].data();
      const double f = b[s] * inv;
      for (int j = 0; j < n_ + 2; ++j) b[j] -= a[j] * f;
      b[s] = a[s] * f;  // restore so the column scaling below is uniform
    }
    for (int j = 0; j < n_ + 2; ++j)
      if (j != s) D_[r][j] *= inv;
    for (int i = 0; i < m_ + 2; ++i)
      if (i != r) D_[i][s] *= -inv;
    D_[r][s] = inv;
    std::swap(B_[r], N_[s]);
  }

  // Optimizes objective row m (phase 1) or m+1 (phase 2).  Returns false on
  // an unbounded ray.
  bool optimize(int phase) {
    const int row = m_ + phase - 1;
    for (;;) {
      int s = -1;
      for (int j = 0; j <= n_; ++j) {
        if (N_[j] == -phase) continue;  // artificial stays out in phase 1
        if (s == -1 || better(row, j, s)) s = j;
      }
      if (D_[row][s] >= -kEps) return true;
      int r = -1;
      for (int i = 0; i < m_; ++i) {
        if (D_[i][s] <= kEps) continue;
        if (r == -1 ||
            std::pair(D_[i][n_ + 1] / D_[i][s], B_[i]) <
                std::pair(D_[r][n_ + 1] / D_[r][s], B_[r]))
          r = i;
      }
      if (r == -1) return false;
      pivot(r, s);
    }
  }

  int m_, n_;
  std::vector<int> N_, B_;
  std::vector<std::vector<double>> D_;
};

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c) {
  Tableau t(A, b, c);
  LpResult res;
  const double v = t.solve(res.x);
  if (v == -std::numeric_limits<double>::infinity()) {
    res.status = LpStatus::infeasible;
  } else if (v == std::numeric_limits<double>::infinity()) {
    res.status = LpStatus::unbounded;
  } else {
    res.value = v;
  }
  return res;
}

}  // namespace eigenflow
