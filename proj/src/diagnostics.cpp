#include "diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"

namespace eigenflow {

namespace {

// Per-coordinate scaling of the map: the |d|-weight of each evaluated index
// is spread uniformly over its eigenvalue cluster (basis-invariant: the sum
// of squared eigenfunctions over a cluster is the projector diagonal), then
// the whole vector is normalized so that sum_j lambda_j t_j = 1.
struct MapScaling {
  std::vector<int> members;  // ascending eigen indices
  Eigen::VectorXd t;
};

const std::vector<int>& cluster_of(const EigenPackage& pkg, int k) {
  for (const auto& cluster : pkg.clusters)
    if (std::find(cluster.begin(), cluster.end(), k) != cluster.end()) return cluster;
  throw Error::invalid("eigen index " + std::to_string(k) +
                       " lies outside the computed clusters");
}

MapScaling map_scaling(const Evaluation& eval) {
  if (!eval.eigen || !eval.problem)
    throw Error::invalid("evaluation carries no eigen data");
  const EigenPackage& pkg = *eval.eigen;

  std::vector<const std::vector<int>*> blocks;
  std::vector<double> block_weight;
  for (std::size_t i = 0; i < eval.indices.size(); ++i) {
    const std::vector<int>& cluster = cluster_of(pkg, eval.indices[i]);
    const auto pos = std::find(blocks.begin(), blocks.end(), &cluster);
    const double w = std::abs(eval.d[static_cast<Eigen::Index>(i)]);
    if (pos == blocks.end()) {
      blocks.push_back(&cluster);
      block_weight.push_back(w);
    } else {
      block_weight[static_cast<std::size_t>(pos - blocks.begin())] += w;
    }
  }

  MapScaling map;
  std::vector<double> u;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const double per_member = block_weight[b] / static_cast<double>(blocks[b]->size());
    for (int k : *blocks[b]) {
      map.members.push_back(k);
      u.push_back(per_member);
    }
  }

  double denom = 0.0;
  for (std::size_t j = 0; j < map.members.size(); ++j)
    denom += u[j] * pkg.renormalized[map.members[j]];
  if (!(denom > 1e-12))
    throw Error::normalization(
        "gradient weights are degenerate; the map cannot reach unit mass");

  map.t.resize(static_cast<Eigen::Index>(u.size()));
  for (std::size_t j = 0; j < u.size(); ++j)
    map.t[static_cast<Eigen::Index>(j)] = u[j] / denom;
  return map;
}

// Columns sqrt(t_j * T) * phi_j: coordinates of the scaled map over the full
// vertex set, orthogonal in the normalized measure with squared norms t_j.
Eigen::MatrixXd scaled_map(const Evaluation& eval, const MapScaling& map) {
  const EigenPackage& pkg = *eval.eigen;
  const double total = eval.problem->total_measure;
  Eigen::MatrixXd phi(pkg.vectors.rows(), static_cast<Eigen::Index>(map.members.size()));
  for (std::size_t j = 0; j < map.members.size(); ++j)
    phi.col(static_cast<Eigen::Index>(j)) =
        std::sqrt(map.t[static_cast<Eigen::Index>(j)] * total) *
        pkg.vectors.col(map.members[j]);
  return phi;
}

bool sets_intersect(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

}  // namespace

SphereMapReport sphere_map_report(const TriMesh& mesh, const Evaluation& eval) {
  if (!eval.eigen || !eval.problem)
    throw Error::invalid("evaluation carries no eigen data");
  if (eval.problem->kind != ProblemKind::laplace)
    throw Error::invalid("sphere map diagnostics require the area measure");
  if (eval.eigen->vectors.rows() != mesh.vertex_count())
    throw Error::invalid("evaluation does not match the mesh");

  const EigenPackage& pkg = *eval.eigen;
  const SpectralProblem& problem = *eval.problem;
  const MapScaling map = map_scaling(eval);
  const Eigen::MatrixXd phi = scaled_map(eval, map);
  const int n = mesh.vertex_count();
  const int m = static_cast<int>(map.members.size());

  SphereMapReport report;
  report.members = map.members;
  report.t = map.t;

  // omega^2 = sum_j lambda_j * phi_j^2 with the lambda of the normalized
  // measure (the renormalized eigenvalue).
  Eigen::VectorXd omega2 = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < m; ++j)
    omega2 += pkg.renormalized[map.members[j]] * phi.col(j).array().square().matrix();
  report.omega = omega2.cwiseMax(0.0).cwiseSqrt();
  report.delta = (omega2.array() - 1.0).abs().maxCoeff();

  const double total = problem.total_measure;
  report.measure_integral = problem.mass.sum() / total;
  double mass_integral = 0.0, energy_integral = 0.0;
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd col = pkg.vectors.col(map.members[j]);
    const double mass_norm = col.dot(problem.mass.cwiseProduct(col));
    const double dirichlet = col.dot(problem.stiffness * col);
    const double tj = map.t[j];
    mass_integral += pkg.renormalized[map.members[j]] * tj * mass_norm;
    energy_integral += tj * total * dirichlet;
  }
  report.mass_integral = mass_integral;
  report.energy_integral = energy_integral;

  // Discrete integral |grad omega|^2 / omega: local cotangent form per
  // triangle times the inverse of the triangle-mean omega.  Background
  // gradients are the right ones: the integrand is conformally invariant.
  double omega_energy = 0.0;
  const auto& pos = mesh.vertices();
  for (const auto& tri : mesh.triangles()) {
    const Eigen::Vector3d& p0 = pos[tri[0]];
    const Eigen::Vector3d& p1 = pos[tri[1]];
    const Eigen::Vector3d& p2 = pos[tri[2]];
    const double w0 = report.omega[tri[0]];
    const double w1 = report.omega[tri[1]];
    const double w2 = report.omega[tri[2]];
    const double mean3 = w0 + w1 + w2;
    if (!(mean3 > 1e-12)) continue;
    const auto cot = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
      return a.dot(b) / a.cross(b).norm();
    };
    const double c0 = cot(p1 - p0, p2 - p0);
    const double c1 = cot(p2 - p1, p0 - p1);
    const double c2 = cot(p0 - p2, p1 - p2);
    const double form = 0.5 * (c0 * (w1 - w2) * (w1 - w2) + c1 * (w2 - w0) * (w2 - w0) +
                               c2 * (w0 - w1) * (w0 - w1));
    omega_energy += form * 3.0 / mean3;
  }
  report.omega_energy = omega_energy;

  // Residual of the harmonic-map equation for Phi/omega, evaluated where the
  // measure is thin (at most 10% of the densest vertex): away from the
  // measure the clamped map should be discretely harmonic.
  Eigen::MatrixXd psi(n, m);
  const Eigen::VectorXd safe = report.omega.cwiseMax(1e-12);
  for (int j = 0; j < m; ++j) psi.col(j) = phi.col(j).cwiseQuotient(safe);
  const Eigen::MatrixXd residual = problem.stiffness * psi;
  const double w_cut = 0.1 * problem.mass.maxCoeff();
  double worst = 0.0;
  for (int v = 0; v < n; ++v)
    if (problem.mass[v] <= w_cut) worst = std::max(worst, residual.row(v).norm());
  report.harmonic_residual = worst;

  if (!std::isfinite(report.delta) || !std::isfinite(report.omega_energy) ||
      !std::isfinite(report.harmonic_residual))
    throw Error(ErrorCode::numeric, "NumericError", "sphere map report is not finite");
  return report;
}

EnergyIdentity energy_identity_check(const Evaluation& eval) {
  if (!eval.eigen || !eval.problem)
    throw Error::invalid("evaluation carries no eigen data");
  const EigenPackage& pkg = *eval.eigen;
  const SpectralProblem& problem = *eval.problem;
  const MapScaling map = map_scaling(eval);

  EnergyIdentity identity;
  const double total = problem.total_measure;
  for (std::size_t j = 0; j < map.members.size(); ++j) {
    const Eigen::VectorXd col = pkg.vectors.col(map.members[j]);
    const double tj = map.t[static_cast<Eigen::Index>(j)];
    identity.dirichlet_energy += tj * total * col.dot(problem.stiffness * col);
    identity.mass_weighted_sum += tj * pkg.renormalized[map.members[j]] *
                                  col.dot(problem.mass.cwiseProduct(col));
  }
  identity.gap = std::abs(identity.dirichlet_energy - identity.mass_weighted_sum) /
                 std::max(1.0, std::abs(identity.dirichlet_energy));
  return identity;
}

BadPointReport bad_point_scan(const TriMesh& mesh, const ConformalFactor& f,
                              const EigenPackage& pkg, int k_m,
                              const std::vector<double>& radii, int max_centers) {
  if (f.support != FactorSupport::area)
    throw Error::invalid("bad point scan requires the area measure");
  if (radii.empty() || radii.front() <= 0.0 ||
      !std::is_sorted(radii.begin(), radii.end()))
    throw Error::config("radius grid must be positive ascending");
  if (k_m < 1 || k_m >= static_cast<int>(pkg.values.size()))
    throw Error::config("spectral index k_m outside the computed window");
  if (max_centers < 1) throw Error::config("max_centers must be positive");

  const SpectralProblem problem = build_problem(mesh, f);
  const int n = mesh.vertex_count();

  BadPointReport report;
  report.k_m = k_m;
  report.lambda_reference = pkg.values[k_m];
  report.radii = radii;

  // Every vertex on small meshes; farthest-point subsample above, so the
  // solve count stays proportional to max_centers.
  if (n <= 3000 || n <= max_centers) {
    report.centers.resize(n);
    for (int v = 0; v < n; ++v) report.centers[v] = v;
  } else {
    const auto& pos = mesh.vertices();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    int pick = 0;
    for (int c = 0; c < max_centers; ++c) {
      report.centers.push_back(pick);
      int far = 0;
      for (int v = 0; v < n; ++v) {
        dist[v] = std::min(dist[v], (pos[v] - pos[pick]).norm());
        if (dist[v] > dist[far]) far = v;
      }
      pick = far;
    }
    std::sort(report.centers.begin(), report.centers.end());
  }

  std::vector<int> local(n, -1);
  for (int center : report.centers) {
    for (double radius : radii) {
      std::vector<int> ball;
      try {
        ball = mesh.geodesic_ball(center, radius);
      } catch (const Error& e) {
        if (e.kind() != "EmptyBall") throw;
        throw Error::ball_too_small("ball at vertex " + std::to_string(center) +
                                    " radius " + std::to_string(radius) +
                                    " has no interior");
      }
      if (ball.size() < 4)
        throw Error::ball_too_small("ball at vertex " + std::to_string(center) +
                                    " radius " + std::to_string(radius) + " has only " +
                                    std::to_string(ball.size()) + " interior vertices");

      // Vertex-clamped Dirichlet restriction: rows/columns of K inside the
      // ball, measure inside the ball; symmetric diagonal scaling turns the
      // pencil into an ordinary symmetric problem.
      const int size = static_cast<int>(ball.size());
      for (int i = 0; i < size; ++i) local[ball[i]] = i;
      Eigen::MatrixXd k_ball = Eigen::MatrixXd::Zero(size, size);
      for (int i = 0; i < size; ++i)
        for (Eigen::SparseMatrix<double>::InnerIterator it(problem.stiffness, ball[i]);
             it; ++it)
          if (local[it.row()] >= 0) k_ball(local[it.row()], i) = it.value();
      Eigen::VectorXd scale(size);
      for (int i = 0; i < size; ++i) scale[i] = 1.0 / std::sqrt(problem.mass[ball[i]]);
      k_ball = scale.asDiagonal() * k_ball * scale.asDiagonal();
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
          k_ball, Eigen::EigenvaluesOnly);
      for (int i = 0; i < size; ++i) local[ball[i]] = -1;

      BallSolveRecord record;
      record.center = center;
      record.radius = radius;
      record.lambda_star = solver.eigenvalues()(0);
      record.interior_count = size;
      record.hit = record.lambda_star <= report.lambda_reference;
      report.balls.push_back(record);
    }
  }

  // Smallest hit radius per center (lambda_star is non-increasing in the
  // radius, so the first hit stands for the center), strongest first.
  std::vector<std::size_t> candidates;
  for (std::size_t b = 0; b < report.balls.size(); ++b) {
    if (!report.balls[b].hit) continue;
    if (!candidates.empty() &&
        report.balls[candidates.back()].center == report.balls[b].center)
      continue;
    candidates.push_back(b);
  }
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    if (report.balls[a].lambda_star != report.balls[b].lambda_star)
      return report.balls[a].lambda_star < report.balls[b].lambda_star;
    return report.balls[a].center < report.balls[b].center;
  });

  std::vector<std::vector<int>> taken;
  for (std::size_t b : candidates) {
    std::vector<int> ball =
        mesh.geodesic_ball(report.balls[b].center, report.balls[b].radius);
    bool disjoint = true;
    for (const auto& other : taken)
      if (sets_intersect(ball, other)) {
        disjoint = false;
        break;
      }
    if (disjoint) {
      report.disjoint_hits.push_back(b);
      taken.push_back(std::move(ball));
    }
  }
  report.count_bound_ok = static_cast<int>(report.disjoint_hits.size()) <= k_m;
  return report;
}

}  // namespace eigenflow
