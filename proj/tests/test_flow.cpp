#include "flow.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "doctest.h"
#include "errors.hpp"

using namespace eigenflow;

namespace {

FunctionalSpec neg_first() {
  FunctionalSpec spec;
  spec.kind = ProblemKind::laplace;
  spec.indices = {1};
  spec.coefficients = Eigen::VectorXd::Ones(1);
  return spec;
}

// Custom two-well objective in the first renormalized eigenvalue:
// F(x) = (x - a)^2 (x - b)^2, minimized exactly on the levels x = a, x = b.
FunctionalSpec two_well(double a, double b) {
  FunctionalSpec spec;
  spec.kind = ProblemKind::laplace;
  spec.form = FunctionalForm::custom;
  spec.indices = {1};
  spec.coefficients = Eigen::VectorXd::Ones(1);
  spec.custom_value = [a, b](const Eigen::VectorXd& x) {
    const double u = x[0] - a, v = x[0] - b;
    return u * u * v * v;
  };
  spec.custom_gradient = [a, b](const Eigen::VectorXd& x) {
    const double u = x[0] - a, v = x[0] - b;
    Eigen::VectorXd g(1);
    g[0] = 2.0 * u * v * (u + v);
    return g;
  };
  return spec;
}

// A concentrating bump family: f = 1 + s * exp(-|p - p0|^2 / width^2).
ConformalFactor bump_factor(const TriMesh& mesh, double s) {
  ConformalFactor f;
  f.support = FactorSupport::area;
  f.values.resize(mesh.vertex_count());
  const Eigen::Vector3d p0 = mesh.vertices()[0];
  for (int v = 0; v < mesh.vertex_count(); ++v)
    f.values[v] = 1.0 + s * std::exp(-(mesh.vertices()[v] - p0).squaredNorm() / 0.6);
  return f;
}

FlowConfig quick_config() {
  FlowConfig cfg;
  cfg.solver.cluster_tol = 0.05;  // near-degenerate pairs count as one cluster
  cfg.candidates.samples = 12;
  return cfg;
}

}  // namespace

TEST_CASE("flow: configuration validation") {
  const TriMesh s = TriMesh::icosphere(1);
  const ConformalFactor f = uniform_factor(s, FactorSupport::area);
  FlowConfig cfg;
  cfg.dt_min = 1.0;
  cfg.dt_init = 0.1;
  CHECK_THROWS_WITH_AS(run_flow(neg_first(), s, f, cfg), doctest::Contains("dt_min"), Error);
  cfg = FlowConfig{};
  cfg.armijo_c = 1.5;
  CHECK_THROWS_WITH_AS(run_flow(neg_first(), s, f, cfg), doctest::Contains("armijo"), Error);
  cfg = FlowConfig{};
  cfg.f_floor = 0.0;
  CHECK_THROWS_WITH_AS(run_flow(neg_first(), s, f, cfg), doctest::Contains("floor"), Error);
}

TEST_CASE("flow: downhill direction is a unit nonnegative density on argmin") {
  const TriMesh s = TriMesh::icosphere(2);
  const ConformalFactor f = perturbed_factor(s, FactorSupport::area, 0.3, 17);
  const Evaluation ev = evaluate(neg_first(), s, f);
  const auto set = generate_candidates(ev);
  REQUIRE(set.candidates.size() == 1);
  const auto pn = pseudo_norm(set);
  const Eigen::VectorXd h = downhill_direction(set, pn);

  CHECK(h.minCoeff() >= 0.0);
  CHECK(set.pairing_weights.dot(h) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(support_function(set, h) <= -pn.value + 1e-8 * set.scale);

  // A single candidate makes the game a plain minimum: the optimal measure
  // can only sit on vertices attaining min psi.
  const auto& psi = set.candidates[0].psi;
  const double lo = psi.minCoeff();
  for (int v = 0; v < h.size(); ++v)
    if (h[v] > 1e-12) CHECK(psi[v] <= lo + 1e-7 * set.scale);
}

TEST_CASE("flow: accepted steps decrease E and keep the factor positive") {
  const TriMesh s = TriMesh::icosphere(2);
  const ConformalFactor f = perturbed_factor(s, FactorSupport::area, 0.3, 17);
  const auto spec = neg_first();
  const Evaluation ev = evaluate(spec, s, f);
  const auto set = generate_candidates(ev);
  const auto pn = pseudo_norm(set);
  const Eigen::VectorXd h = downhill_direction(set, pn);

  FlowConfig cfg;
  const StepOutcome out = flow_step(spec, s, f, ev, pn.value, h, cfg, cfg.dt_init);
  REQUIRE(out.accepted);
  CHECK(out.eval.value <= ev.value - cfg.armijo_c * out.dt_used * pn.value);
  CHECK(out.factor.values.minCoeff() >= cfg.f_floor);

  // The zero direction cannot satisfy any positive decrease target.
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(h.size());
  const StepOutcome stall = flow_step(spec, s, f, ev, pn.value, zero, cfg, cfg.dt_init);
  CHECK_FALSE(stall.accepted);
  CHECK(stall.dt_used == doctest::Approx(cfg.dt_min));
}

TEST_CASE("flow: critical start point stops immediately") {
  const TriMesh t = TriMesh::flat_torus(16);
  const ConformalFactor f = uniform_factor(t, FactorSupport::area);
  FlowConfig cfg = quick_config();
  const FlowTrace trace = run_flow(neg_first(), t, f, cfg);
  CHECK(trace.records.size() == 1);
  CHECK(trace.reached_target);
  CHECK_FALSE(trace.stalled);
  REQUIRE(trace.ps_points.size() == 1);
  CHECK(trace.ps_points[0] == 0);
}

TEST_CASE("flow: descent run raises the first eigenvalue monotonically") {
  const TriMesh s = TriMesh::icosphere(2);
  // Amplitude large enough that the low eigenvalues stay separated at the loose
  // cluster tolerance: a merged cluster at the start would satisfy the stop
  // target immediately and the trace would end at the initial record.
  const ConformalFactor f0 = perturbed_factor(s, FactorSupport::area, 0.6, 17);
  FlowConfig cfg = quick_config();
  cfg.max_steps = 15;
  cfg.smooth_rounds = 1;
  cfg.snapshot_every = 5;
  const FlowTrace trace = run_flow(neg_first(), s, f0, cfg);
  REQUIRE(trace.records.size() >= 2);

  double prev = trace.records[0].energy;
  for (const auto& rec : trace.records) {
    if (!rec.accepted || rec.step == 0) continue;
    CHECK(rec.energy <= prev + 1e-10);
    prev = rec.energy;
  }
  // E = -lambda_bar_1, so descent means the eigenvalue climbed.
  CHECK(trace.final_eval.lambda_bar[0] > -trace.records[0].energy);
  CHECK(trace.records[0].has_snapshot);
  CHECK(trace.records.back().has_snapshot);
  for (const auto& rec : trace.records)
    if (rec.step == 5 && rec.accepted) CHECK(rec.has_snapshot);
}

TEST_CASE("flow: renormalization does not change recorded energies") {
  const TriMesh s = TriMesh::icosphere(1);
  const ConformalFactor f0 = perturbed_factor(s, FactorSupport::area, 0.6, 9);
  FlowConfig cfg = quick_config();
  cfg.max_steps = 8;
  const FlowTrace on = run_flow(neg_first(), s, f0, cfg);
  cfg.renormalize_each_step = false;
  const FlowTrace off = run_flow(neg_first(), s, f0, cfg);

  const std::size_t overlap = std::min(on.records.size(), off.records.size());
  REQUIRE(overlap >= 2);
  for (std::size_t i = 0; i < overlap; ++i) {
    CHECK(on.records[i].energy ==
          doctest::Approx(off.records[i].energy).epsilon(1e-10));
  }
}

TEST_CASE("flow: path construction") {
  const TriMesh s = TriMesh::icosphere(1);
  const ConformalFactor a = uniform_factor(s, FactorSupport::area);
  ConformalFactor b = a;
  b.values *= 2.0;
  const PathFamily fam = make_path(a, b, 3);
  CHECK(fam.interior.size() == 3);
  CHECK(fam.interior[1].values[0] == doctest::Approx(1.5));

  ConformalFactor wrong;
  wrong.support = FactorSupport::boundary;
  wrong.values = Eigen::VectorXd::Ones(4);
  CHECK_THROWS_WITH_AS(make_path(a, wrong, 3), doctest::Contains("support"), Error);
}

TEST_CASE("flow: minmax rejects non-critical endpoints") {
  const TriMesh s = TriMesh::icosphere(1);
  const ConformalFactor f = perturbed_factor(s, FactorSupport::area, 0.3, 17);
  MinmaxConfig cfg;
  cfg.flow = quick_config();
  cfg.flow.solver.cluster_tol = 1e-3;  // keep the perturbed spectrum simple
  const PathFamily fam = make_path(f, f, 2);
  CHECK_THROWS_WITH_AS(minmax_deform(neg_first(), s, fam, cfg),
                       doctest::Contains("EndpointNotCritical"), Error);
}

TEST_CASE("flow: degenerate minmax families") {
  const TriMesh t = TriMesh::flat_torus(16);
  const ConformalFactor f = uniform_factor(t, FactorSupport::area);
  MinmaxConfig cfg;
  cfg.flow = quick_config();
  cfg.sweeps = 3;

  // Identical critical endpoints, no interior: the level is E(f) itself.
  const PathFamily point = make_path(f, f, 0);
  const MinmaxResult res = minmax_deform(neg_first(), t, point, cfg);
  const double e0 = evaluate(neg_first(), t, f, cfg.flow.solver).value;
  CHECK(res.c_estimate == doctest::Approx(e0).epsilon(1e-12));
  CHECK(res.final_nodes.size() == 2);
  CHECK(res.ps_candidates.size() == 2);

  // Endpoints are returned bit-identical.
  CHECK(std::memcmp(res.final_nodes[0].values.data(), f.values.data(),
                    sizeof(double) * f.values.size()) == 0);
}

TEST_CASE("flow: two-well minmax finds the crossing level") {
  const TriMesh s = TriMesh::icosphere(1);
  const auto probe = [&](const ConformalFactor& f) {
    return evaluate(neg_first(), s, f).lambda_bar[0];
  };
  const ConformalFactor fa = bump_factor(s, 2.5);
  const ConformalFactor fb = bump_factor(s, 0.0);
  const double a = probe(fa);
  const double b = probe(fb);
  REQUIRE(a < b);  // the bump lowers the renormalized eigenvalue

  const FunctionalSpec spec = two_well(a, b);
  // Any path between the wells crosses lambda_bar = (a+b)/2, where the
  // two-well profile peaks; that crossing value is the exact min-max level.
  const double mid = 0.5 * (a + b);
  const double c_exact = spec.custom_value((Eigen::VectorXd(1) << mid).finished());

  // Dense scan along the straight path as an independent oracle.
  const PathFamily fam = make_path(fa, fb, 13);
  double c_scan = 0.0;
  for (int g = 0; g <= 60; ++g) {
    ConformalFactor f = fa;
    const double t = g / 60.0;
    f.values = (1.0 - t) * fa.values + t * fb.values;
    c_scan = std::max(c_scan, evaluate(spec, s, f).value);
  }

  MinmaxConfig cfg;
  cfg.flow = quick_config();
  cfg.sweeps = 25;
  const MinmaxResult res = minmax_deform(spec, s, fam, cfg);

  CHECK(res.c_estimate == doctest::Approx(c_scan).epsilon(0.05));
  CHECK(res.c_estimate == doctest::Approx(c_exact).epsilon(0.05));
  REQUIRE(!res.ps_candidates.empty());
  CHECK(res.condition3.size() == res.ps_candidates.size());

  // The best Palais-Smale candidate sits near the crossing level with a
  // pseudo-norm far below the well-to-ridge energy scale.
  const int best = res.ps_candidates.front();
  CHECK(res.final_energy[best] >= res.c_estimate - 0.05 * (1.0 + std::abs(res.c_estimate)));

  // Endpoints never moved.
  CHECK(std::memcmp(res.final_nodes.front().values.data(), fa.values.data(),
                    sizeof(double) * fa.values.size()) == 0);
  CHECK(std::memcmp(res.final_nodes.back().values.data(), fb.values.data(),
                    sizeof(double) * fb.values.size()) == 0);

  // Deformation never raised any node's energy within an accepted step.
  for (const auto& nt : res.node_traces)
    for (const auto& rec : nt.records)
      if (rec.accepted) CHECK(rec.energy <= rec.energy_before + 1e-10);
}
