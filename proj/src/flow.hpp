#pragma once

#include <Eigen/Dense>
#include <vector>

#include "subgradient.hpp"

namespace eigenflow {

struct FlowConfig {
  double dt_init = 0.05;   // relative step size: f <- f .* (1 + dt h)
  double dt_min = 1e-6;
  double dt_max = 2.0;
  double armijo_c = 0.1;   // accept iff E drops by armijo_c * dt * |dE|
  double ps_eps = 0.0;     // absolute Palais-Smale target for |dE|
  double ps_eps_rel = 0.05;  // relative target, scaled by max_i |d_i| lambda_bar_i
  int max_steps = 200;
  double f_floor = 1e-6;   // positivity clamp for factor values
  bool renormalize_each_step = true;  // rescale to unit total measure (E-invariant)
  int smooth_rounds = 0;   // neighbor-averaging of the descent density (0: raw tau)
  int snapshot_every = 0;  // record factor snapshots every k accepted steps (0: ends only)
  GenerateOptions candidates;
  SolveOptions solver;
};

struct FlowRecord {
  int step = 0;
  double energy = 0.0;         // E after this step (same as before when not accepted)
  double energy_before = 0.0;  // E at the step's entry point
  double pseudo_norm = 0.0;
  double ps_target = 0.0;  // the Palais-Smale threshold in force at this record
  double dt = 0.0;
  bool accepted = false;
  bool has_snapshot = false;
  ConformalFactor snapshot;
};

struct FlowTrace {
  std::vector<FlowRecord> records;
  std::vector<int> ps_points;  // record indices with pseudo_norm <= ps_target
  ConformalFactor final_factor;
  Evaluation final_eval;
  bool reached_target = false;
  bool stalled = false;
};

// The optimal vertex measure read as a density against the pairing weights:
// h = tau ./ w, so h >= 0, <w,h> = 1 and max_a <h,psi_a> = -|dE| by duality
// (re-verified; the pairing is the flow's certified descent rate).
Eigen::VectorXd downhill_direction(const SubgradientSet& set, const PseudoNormResult& pn);

// One backtracking step along h from f: trial f .* (1 + dt h) clamped at
// f_floor, accepted on sufficient decrease, dt halved down to dt_min
// otherwise.  Unaccepted outcomes return the inputs unchanged.
struct StepOutcome {
  ConformalFactor factor;
  Evaluation eval;
  double dt_used = 0.0;
  bool accepted = false;
};

StepOutcome flow_step(const FunctionalSpec& spec, const TriMesh& mesh,
                      const ConformalFactor& f, const Evaluation& at_f, double pnorm,
                      const Eigen::VectorXd& h, const FlowConfig& cfg, double dt_start);

// Deformation-lemma descent: iterate evaluate -> candidates -> pseudo-norm ->
// downhill step until |dE| falls under the target, the step stalls at
// dt_min, or max_steps.  E is non-increasing across accepted records.
FlowTrace run_flow(const FunctionalSpec& spec, const TriMesh& mesh,
                   const ConformalFactor& f0, const FlowConfig& cfg);

// Piecewise-linear path of conformal factors with pinned endpoints.
struct PathFamily {
  ConformalFactor f_start;
  ConformalFactor f_end;
  std::vector<ConformalFactor> interior;
};

// Linear interpolation with `interior_nodes` evenly spaced interior factors.
PathFamily make_path(const ConformalFactor& f_start, const ConformalFactor& f_end,
                     int interior_nodes = 15);

struct MinmaxConfig {
  FlowConfig flow;
  int sweeps = 40;
  double level_eps_rel = 0.02;  // band width around c for Palais-Smale candidacy
  bool reparametrize = true;    // arc-length resampling keeps the ridge sampled
  double stall_rtol = 1e-5;     // minimum per-sweep improvement of the path max
  int patience = 6;             // sweeps without improvement before stopping
  // Per-sweep node travel is capped at this fraction of the local node spacing
  // so the string deforms quasi-continuously; uncapped descent drains every
  // node into a basin between resamplings and the ridge crossing goes unsampled.
  double step_over_spacing = 0.5;
  // Rounds of midpoint subdivision around the running maximum of the entry
  // polyline; each round adds two evaluations and tightens the level estimate
  // where point samples straddle the crossing.
  int level_refine = 2;
};

struct MinmaxResult {
  double c_estimate = 0.0;            // min over sweeps of max over nodes of E
  std::vector<double> sweep_max;      // path max after each sweep
  std::vector<FlowTrace> node_traces; // one per interior node
  std::vector<ConformalFactor> final_nodes;  // endpoints + deformed interior
  std::vector<double> final_energy;          // E per final node
  std::vector<double> final_pseudo_norm;     // |dE| per final node
  std::vector<int> ps_candidates;     // final-node indices near the max level,
                                      // sorted by ascending pseudo-norm
  std::vector<double> condition3;     // per candidate: min over candidate
                                      // mixtures of the entrywise max of the
                                      // mixed density (~0 iff some subgradient
                                      // mixture is entrywise <= 0 + tol)
};

// Min-max over the path family: every sweep flows each interior node one
// descent step (endpoints verified critical and never touched), optionally
// resamples the polyline by arc length, and re-estimates the min-max level.
MinmaxResult minmax_deform(const FunctionalSpec& spec, const TriMesh& mesh,
                           const PathFamily& family, const MinmaxConfig& cfg);

}  // namespace eigenflow
