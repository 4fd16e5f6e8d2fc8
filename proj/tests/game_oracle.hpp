#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "rng.hpp"

// Brute-force game value for tests: maximize min_j (P^T p)_j over the row
// simplex by exhaustive grid search refined with local pattern steps (axis
// pairs plus seeded random zero-sum directions, halving step sizes).
// Approaches the true value from below through feasible evaluations only.
namespace eigenflow::oracle {

inline Eigen::VectorXd project_simplex(Eigen::VectorXd v) {
  // Euclidean projection onto {p >= 0, sum p = 1}.
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, tau = 0.0;
  int k = 0;
  for (int i = 0; i < n; ++i) {
    css += u[i];
    const double t = (css - 1.0) / (i + 1);
    if (u[i] - t > 0.0) {
      tau = t;
      k = i + 1;
    }
  }
  (void)k;
  for (int i = 0; i < n; ++i) v[i] = std::max(0.0, v[i] - tau);
  return v;
}

inline double game_value_brute_force(const Eigen::MatrixXd& P, int grid = 6,
                                     std::uint64_t seed = 1234) {
  const int r = static_cast<int>(P.rows());
  auto eval = [&](const Eigen::VectorXd& p) { return (P.transpose() * p).minCoeff(); };

  // Exhaustive compositions of `grid` over r parts.
  Eigen::VectorXd best_p = Eigen::VectorXd::Constant(r, 1.0 / r);
  double best = eval(best_p);
  std::vector<std::pair<double, Eigen::VectorXd>> top;
  std::vector<int> comp(r, 0);
  auto consider = [&](const Eigen::VectorXd& p) {
    const double v = eval(p);
    top.emplace_back(v, p);
    if (v > best) {
      best = v;
      best_p = p;
    }
  };
  // Iterative composition enumeration.
  comp.assign(r, 0);
  comp[0] = grid;
  for (;;) {
    Eigen::VectorXd p(r);
    for (int i = 0; i < r; ++i) p[i] = static_cast<double>(comp[i]) / grid;
    consider(p);
    // next composition in colex order
    int i = 0;
    while (i < r - 1 && comp[i] == 0) ++i;
    if (i == r - 1) break;
    const int take = comp[i];
    comp[i] = 0;
    comp[0] = take - 1;
    comp[i + 1] += 1;
  }
  std::sort(top.begin(), top.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  top.resize(std::min<std::size_t>(top.size(), 3));

  // Local refinement from the leading grid points.
  Rng rng(seed);
  std::vector<Eigen::VectorXd> dirs;
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      if (i == j) continue;
      Eigen::VectorXd d = Eigen::VectorXd::Zero(r);
      d[i] = 1.0;
      d[j] = -1.0;
      dirs.push_back(d);
    }
  }
  for (int k = 0; k < 64; ++k) {
    Eigen::VectorXd d(r);
    for (int i = 0; i < r; ++i) d[i] = rng.normal();
    d.array() -= d.mean();
    const double n = d.norm();
    if (n > 1e-12) dirs.push_back(d / n);
  }

  // The objective is concave piecewise linear, so the ellipsoid method over
  // the simplex (in affine coordinates y with p = (y, 1 - sum y)) converges
  // to the global optimum; pattern steps alone can stall on the nonsmooth
  // min.  Subgradient cuts at feasible points, constraint cuts outside.
  auto ellipsoid_best = [&]() {
    if (r == 1) return eval(Eigen::VectorXd::Ones(1));
    if (r == 2) {  // concave in one variable: ternary search
      double lo = 0.0, hi = 1.0;
      Eigen::VectorXd p(2);
      for (int it = 0; it < 200; ++it) {
        const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
        p << a, 1.0 - a;
        const double va = eval(p);
        p << b, 1.0 - b;
        const double vb = eval(p);
        if (va < vb) lo = a;
        else hi = b;
      }
      p << 0.5 * (lo + hi), 1.0 - 0.5 * (lo + hi);
      return eval(p);
    }
    const int n = r - 1;
    Eigen::VectorXd y = Eigen::VectorXd::Constant(n, 1.0 / r);
    Eigen::MatrixXd H = 2.0 * Eigen::MatrixXd::Identity(n, n);
    double found = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < 6000; ++it) {
      Eigen::VectorXd cut(n);
      bool feasible = true;
      for (int i = 0; i < n; ++i) {
        if (y[i] < 0.0) {
          cut = -Eigen::VectorXd::Unit(n, i);
          feasible = false;
          break;
        }
      }
      if (feasible && y.sum() > 1.0) {
        cut = Eigen::VectorXd::Ones(n);
        feasible = false;
      }
      if (feasible) {
        Eigen::VectorXd p(r);
        p.head(n) = y;
        p[n] = 1.0 - y.sum();
        const Eigen::VectorXd q = P.transpose() * p;
        int jmin = 0;
        const double v = q.minCoeff(&jmin);
        found = std::max(found, v);
        // keep the half-space where the supergradient ascends
        cut = -(P.col(jmin).head(n).array() - P(n, jmin)).matrix();
      }
      const double denom = cut.dot(H * cut);
      if (!(denom > 1e-300)) break;
      const Eigen::VectorXd Hg = H * cut / std::sqrt(denom);
      y -= Hg / (n + 1);
      H = (static_cast<double>(n) * n / (n * n - 1.0)) *
          (H - (2.0 / (n + 1)) * Hg * Hg.transpose());
      H = 0.5 * (H + H.transpose());
    }
    return found;
  };
  best = std::max(best, ellipsoid_best());

  for (auto& [v0, start] : top) {
    (void)v0;
    Eigen::VectorXd p = start;
    double val = eval(p);
    for (double step = 0.25; step > 1e-11; step *= 0.5) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (const auto& d : dirs) {
          const Eigen::VectorXd q = project_simplex(p + step * d);
          const double v = eval(q);
          if (v > val + 1e-15) {
            val = v;
            p = q;
            improved = true;
          }
        }
      }
    }
    if (val > best) best = val;
  }
  return best;
}

}  // namespace eigenflow::oracle
