#include "eigensolve.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

namespace eigenflow {

namespace {

// Columns below this dimension (or blocks too fat for iteration) go dense.
constexpr int kDenseThreshold = 420;

// In-place M-orthonormalization with rank filtering: S <- S U diag(1/sqrt e)
// over eigenpairs of S^T M S above a relative floor.  Returns the kept width.
int ortho_against_mass(Eigen::MatrixXd& S, const Eigen::VectorXd& mass) {
  if (S.cols() == 0) return 0;
  const Eigen::MatrixXd G = S.transpose() * mass.asDiagonal() * S;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const Eigen::VectorXd& e = es.eigenvalues();
  const double floor = std::max(e.maxCoeff(), 0.0) * 1e-10;
  int kept = 0;
  for (Eigen::Index i = 0; i < e.size(); ++i)
    if (e[i] > floor) ++kept;
  if (kept == 0) {
    S.resize(S.rows(), 0);
    return 0;
  }
  Eigen::MatrixXd Q(S.rows(), kept);
  int c = 0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    if (e[i] > floor) {
      Q.col(c++) = S * es.eigenvectors().col(i) / std::sqrt(e[i]);
    }
  }
  S = std::move(Q);
  return kept;
}

// Scale every column to unit mass-norm; zero columns are left alone and get
// removed by the rank filter that follows.
void normalize_columns(Eigen::MatrixXd& S, const Eigen::VectorXd& mass) {
  for (Eigen::Index j = 0; j < S.cols(); ++j) {
    const double nrm = std::sqrt(S.col(j).dot(mass.cwiseProduct(S.col(j))));
    if (nrm > 0.0) S.col(j) /= nrm;
  }
}

struct IterationResult {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  int iterations = 0;
};

// Blocked preconditioned Rayleigh-Ritz iteration (LOBPCG family) for the
// lowest p pairs of K x = lambda M x orthogonal to the locked block Y
// (M-orthonormal).  The search space is [X, precond residuals, previous
// directions], fully M-orthonormalized each sweep for stability.
IterationResult blocked_eigensolve(const Eigen::SparseMatrix<double>& K,
                                   const Eigen::VectorXd& mass,
                                   const Eigen::MatrixXd& Y, int p, double tol,
                                   int maxit, std::uint64_t seed) {
  const int n = static_cast<int>(K.rows());
  const int guard = std::min(4, n - static_cast<int>(Y.cols()) - p);
  const int pb = p + std::max(0, guard);

  // Shifted factorization as preconditioner; the shift keeps the factor
  // positive definite despite K's constant kernel.
  const double shift = std::max(1e-12, 1e-2 * K.diagonal().sum() / mass.sum());
  Eigen::SparseMatrix<double> Kshift = K;
  for (int v = 0; v < n; ++v) Kshift.coeffRef(v, v) += shift * mass[v];
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> prec(Kshift);
  if (prec.info() != Eigen::Success)
    throw Error::no_convergence("preconditioner factorization failed");

  auto drop_locked = [&](Eigen::MatrixXd& S) {
    if (Y.cols() > 0 && S.cols() > 0)
      S.noalias() -= Y * (Y.transpose() * (mass.asDiagonal() * S));
  };

  Rng rng(seed);
  Eigen::MatrixXd X(n, pb);
  for (int j = 0; j < pb; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = rng.normal();
  drop_locked(X);
  if (ortho_against_mass(X, mass) < pb)
    throw Error::no_convergence("initial block is rank deficient");

  Eigen::MatrixXd P(n, 0);
  Eigen::VectorXd theta;
  double worst = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= maxit; ++it) {
    // Rayleigh-Ritz on the current block.
    Eigen::MatrixXd AX = K * X;
    Eigen::MatrixXd H = X.transpose() * AX;
    H = 0.5 * (H + H.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    theta = es.eigenvalues();
    X = X * es.eigenvectors();
    AX = AX * es.eigenvectors();

    Eigen::MatrixXd R = AX - mass.asDiagonal() * X * theta.asDiagonal();
    worst = 0.0;
    for (int j = 0; j < p; ++j)
      worst = std::max(worst, R.col(j).norm() / std::max(1.0, theta[j]));
    if (worst <= tol) {
      IterationResult out;
      out.values = theta.head(p);
      out.vectors = X.leftCols(p);
      out.iterations = it;
      return out;
    }

    // New directions: preconditioned residuals with everything known
    // projected out, each block renormalized before rank filtering so that
    // small-magnitude (late-stage) corrections survive.
    Eigen::MatrixXd W = prec.solve(R);
    drop_locked(W);
    W.noalias() -= X * (X.transpose() * (mass.asDiagonal() * W));
    normalize_columns(W, mass);
    ortho_against_mass(W, mass);

    if (P.cols() > 0) {
      P.noalias() -= X * (X.transpose() * (mass.asDiagonal() * P));
      if (W.cols() > 0)
        P.noalias() -= W * (W.transpose() * (mass.asDiagonal() * P));
      normalize_columns(P, mass);
      ortho_against_mass(P, mass);
    }

    Eigen::MatrixXd S(n, X.cols() + W.cols() + P.cols());
    S << X, W, P;
    if (S.cols() < pb) throw Error::no_convergence("search space collapsed");

    Eigen::MatrixXd T = S.transpose() * (K * S);
    T = 0.5 * (T + T.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> rr(T);
    const Eigen::MatrixXd C = rr.eigenvectors().leftCols(pb);

    Eigen::MatrixXd Xnew = S * C;
    // Previous-direction block: the part of the update outside span(X).
    Eigen::MatrixXd D = C;
    D.topRows(X.cols()).setZero();
    P = S * D;
    normalize_columns(P, mass);
    if (P.cols() > pb) P = P.leftCols(pb).eval();
    X = std::move(Xnew);
  }

  std::ostringstream os;
  os << "blocked eigensolve: " << maxit << " iterations, worst residual " << worst;
  throw Error::no_convergence(os.str());
}

std::vector<int> complement(const std::vector<int>& sorted, int n) {
  std::vector<int> out;
  out.reserve(n - static_cast<int>(sorted.size()));
  std::size_t k = 0;
  for (int v = 0; v < n; ++v) {
    if (k < sorted.size() && sorted[k] == v) ++k;
    else out.push_back(v);
  }
  return out;
}

void finish_package(EigenPackage& pkg, const SpectralProblem& problem,
                    const SolveOptions& opts) {
  const int count = static_cast<int>(pkg.values.size());
  pkg.total_measure = problem.total_measure;
  pkg.renormalized = pkg.values * problem.total_measure;
  pkg.clusters = cluster_eigenvalues(pkg.values, opts.cluster_tol);
  pkg.residuals.resize(count);
  for (int j = 0; j < count; ++j) {
    const Eigen::VectorXd r = problem.stiffness * pkg.vectors.col(j) -
                              pkg.values[j] * problem.mass.cwiseProduct(pkg.vectors.col(j));
    pkg.residuals[j] = r.norm() / std::max(1.0, pkg.values[j]);
  }
  const double worst = pkg.residuals.maxCoeff();
  if (worst > opts.eig_tol) {
    std::ostringstream os;
    os << "final residual " << worst << " exceeds tolerance " << opts.eig_tol;
    throw Error::no_convergence(os.str());
  }
}

}  // namespace

std::vector<std::vector<int>> cluster_eigenvalues(const Eigen::VectorXd& values,
                                                  double cluster_tol) {
  std::vector<std::vector<int>> clusters;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (i > 0 && values[i] - values[i - 1] <= cluster_tol * std::max(1.0, values[i])) {
      clusters.back().push_back(static_cast<int>(i));
    } else {
      clusters.push_back({static_cast<int>(i)});
    }
  }
  return clusters;
}

EigenPackage solve_laplace(const SpectralProblem& problem, int count,
                           const SolveOptions& opts) {
  if (problem.kind != ProblemKind::laplace)
    throw Error::invalid("solve_laplace needs a Laplace problem");
  const int n = static_cast<int>(problem.stiffness.rows());
  if (count < 1 || count > n) throw Error::invalid("eigenpair count out of range");

  EigenPackage pkg;
  pkg.values.resize(count);
  pkg.vectors.resize(n, count);

  // Constant mode: exact kernel of K by construction; M-normalized.
  const double c0 = 1.0 / std::sqrt(problem.total_measure);
  pkg.values[0] = 0.0;
  pkg.vectors.col(0).setConstant(c0);

  if (count > 1) {
    const int p = count - 1;
    if (n <= kDenseThreshold || p + 1 > n / 8) {
      Eigen::MatrixXd Kd = problem.stiffness;
      Eigen::MatrixXd Md = problem.mass.asDiagonal();
      Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Kd, Md);
      if (es.info() != Eigen::Success) throw Error::no_convergence("dense solve failed");
      pkg.values.tail(p) = es.eigenvalues().segment(1, p);
      pkg.vectors.rightCols(p) = es.eigenvectors().middleCols(1, p);
    } else {
      Eigen::MatrixXd Y = pkg.vectors.col(0);
      const auto res = blocked_eigensolve(problem.stiffness, problem.mass, Y, p,
                                          0.5 * opts.eig_tol, opts.max_iterations, opts.seed);
      pkg.values.tail(p) = res.values;
      pkg.vectors.rightCols(p) = res.vectors;
    }
  }

  finish_package(pkg, problem, opts);
  return pkg;
}

EigenPackage solve_steklov(const SpectralProblem& problem, int count,
                           const SolveOptions& opts) {
  if (problem.kind != ProblemKind::steklov)
    throw Error::invalid("solve_steklov needs a Steklov problem");
  const int n = static_cast<int>(problem.stiffness.rows());
  const auto& bnd = problem.active;
  const int nb = static_cast<int>(bnd.size());
  if (nb == 0) throw Error::no_boundary("Steklov problem without boundary vertices");
  if (count < 1 || count > nb) throw Error::invalid("eigenpair count out of range");

  const std::vector<int> interior = complement(bnd, n);
  const int ni = static_cast<int>(interior.size());
  std::vector<int> where(n, -1);  // global -> position within its block
  for (int i = 0; i < nb; ++i) where[bnd[i]] = i;
  for (int i = 0; i < ni; ++i) where[interior[i]] = i;
  std::vector<char> is_bnd(n, 0);
  for (int v : bnd) is_bnd[v] = 1;

  std::vector<Eigen::Triplet<double>> t_ii, t_ib;
  Eigen::MatrixXd Kbb = Eigen::MatrixXd::Zero(nb, nb);
  for (int k = 0; k < problem.stiffness.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(problem.stiffness, k); it; ++it) {
      const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
      if (is_bnd[r] && is_bnd[c]) Kbb(where[r], where[c]) += it.value();
      else if (!is_bnd[r] && !is_bnd[c]) t_ii.emplace_back(where[r], where[c], it.value());
      else if (!is_bnd[r] && is_bnd[c]) t_ib.emplace_back(where[r], where[c], it.value());
    }
  }

  // Dirichlet-to-Neumann: S = K_bb - K_ib^T K_ii^{-1} K_ib; the interior
  // block is positive definite once the boundary is clamped.
  Eigen::MatrixXd S = Kbb;
  Eigen::MatrixXd lift;  // interior values of the harmonic extension: -K_ii^{-1} K_ib
  if (ni > 0) {
    Eigen::SparseMatrix<double> Kii(ni, ni), Kib(ni, nb);
    Kii.setFromTriplets(t_ii.begin(), t_ii.end());
    Kib.setFromTriplets(t_ib.begin(), t_ib.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Kii);
    if (ldlt.info() != Eigen::Success)
      throw Error::no_convergence("interior factorization failed");
    lift = -ldlt.solve(Eigen::MatrixXd(Kib));
    S.noalias() += Eigen::MatrixXd(Kib).transpose() * lift;
    S = 0.5 * (S + S.transpose());
  }

  Eigen::VectorXd Bb(nb);
  for (int i = 0; i < nb; ++i) Bb[i] = problem.mass[bnd[i]];
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::MatrixXd(Bb.asDiagonal()));
  if (es.info() != Eigen::Success) throw Error::no_convergence("boundary solve failed");

  EigenPackage pkg;
  pkg.values.resize(count);
  pkg.vectors = Eigen::MatrixXd::Zero(n, count);
  pkg.values[0] = 0.0;
  pkg.vectors.col(0).setConstant(1.0 / std::sqrt(problem.total_measure));
  for (int j = 1; j < count; ++j) {
    pkg.values[j] = es.eigenvalues()[j];
    const Eigen::VectorXd phi_b = es.eigenvectors().col(j);
    for (int i = 0; i < nb; ++i) pkg.vectors(bnd[i], j) = phi_b[i];
    if (ni > 0) {
      const Eigen::VectorXd phi_i = lift * phi_b;
      for (int i = 0; i < ni; ++i) pkg.vectors(interior[i], j) = phi_i[i];
    }
  }

  finish_package(pkg, problem, opts);
  return pkg;
}

EigenPackage solve_spectrum(const SpectralProblem& problem, int count,
                            const SolveOptions& opts) {
  return problem.kind == ProblemKind::laplace ? solve_laplace(problem, count, opts)
                                              : solve_steklov(problem, count, opts);
}

}  // namespace eigenflow
