#include "flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "errors.hpp"
#include "game.hpp"

namespace eigenflow {

namespace {

void validate_config(const FlowConfig& cfg) {
  if (!(cfg.dt_min > 0.0) || !(cfg.dt_min <= cfg.dt_init) || !(cfg.dt_init <= cfg.dt_max))
    throw Error::config("need 0 < dt_min <= dt_init <= dt_max");
  if (!(cfg.armijo_c > 0.0) || !(cfg.armijo_c < 1.0))
    throw Error::config("armijo constant must lie in (0,1)");
  if (!(cfg.f_floor > 0.0)) throw Error::config("factor floor must be positive");
  if (cfg.max_steps < 0 || cfg.smooth_rounds < 0 || cfg.snapshot_every < 0)
    throw Error::config("negative flow step counters");
  if (cfg.ps_eps < 0.0 || cfg.ps_eps_rel < 0.0)
    throw Error::config("Palais-Smale targets must be nonnegative");
}

double ps_target(const FlowConfig& cfg, const SubgradientSet& set) {
  return std::max(cfg.ps_eps, cfg.ps_eps_rel * set.scale);
}

[[noreturn]] void rethrow_with_context(const Error& e, const std::string& where) {
  std::string message = e.what();
  const std::string prefix = e.kind() + ": ";
  if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
  throw Error(e.code(), e.kind(), where + ": " + message);
}

// Neighbor averaging of the descent density over the active vertex set,
// kept only when it preserves at least half the certified descent rate
// (the classical vector-field slack <v, psi> < -|dE|/2).
Eigen::VectorXd smoothed_direction(const TriMesh& mesh, const SubgradientSet& set,
                                   const PseudoNormResult& pn, Eigen::VectorXd h,
                                   int rounds) {
  if (rounds <= 0) return h;
  const int n = static_cast<int>(set.active.size());
  std::vector<int> position(mesh.vertex_count(), -1);
  for (int i = 0; i < n; ++i) position[set.active[i]] = i;

  const Eigen::VectorXd raw = h;
  for (int r = 0; r < rounds; ++r) {
    Eigen::VectorXd next(n);
    for (int i = 0; i < n; ++i) {
      double acc = h[i];
      int deg = 1;
      for (int v : mesh.neighbors()[set.active[i]]) {
        if (position[v] < 0) continue;
        acc += h[position[v]];
        ++deg;
      }
      next[i] = acc / deg;
    }
    h = std::move(next);
  }
  const double total = set.pairing_weights.dot(h);
  if (!(total > 0.0)) return raw;
  h /= total;
  if (support_function(set, h) > -0.5 * pn.value) return raw;
  return h;
}

}  // namespace

Eigen::VectorXd downhill_direction(const SubgradientSet& set, const PseudoNormResult& pn) {
  if (pn.tau.size() != set.pairing_weights.size())
    throw Error::invalid("pseudo-norm result does not match the candidate set");
  Eigen::VectorXd h = pn.tau.cwiseQuotient(set.pairing_weights);
  const double slack = 1e-8 * std::max(1.0, set.scale);
  if (support_function(set, h) > -pn.value + slack)
    throw Error::lp_failure("descent direction lost the duality certificate");
  return h;
}

StepOutcome flow_step(const FunctionalSpec& spec, const TriMesh& mesh,
                      const ConformalFactor& f, const Evaluation& at_f, double pnorm,
                      const Eigen::VectorXd& h, const FlowConfig& cfg, double dt_start) {
  validate_config(cfg);
  if (h.size() != f.values.size()) throw Error::invalid("direction size mismatch");

  StepOutcome out;
  out.factor = f;
  out.eval = at_f;

  double dt = std::clamp(dt_start, cfg.dt_min, cfg.dt_max);
  while (true) {
    ConformalFactor trial = f;
    trial.values =
        (f.values.array() * (1.0 + dt * h.array())).cwiseMax(cfg.f_floor).matrix();
    Evaluation ev = evaluate(spec, mesh, trial, cfg.solver);
    if (cfg.renormalize_each_step) {
      trial.values /= ev.problem->total_measure;
      if ((trial.values.array() < cfg.f_floor).any()) {
        trial.values = trial.values.cwiseMax(cfg.f_floor);
        ev = evaluate(spec, mesh, trial, cfg.solver);  // clamp moved the point
      }
      // else: E, candidates and weights are all scale-invariant, ev stays exact.
    }
    out.dt_used = dt;
    if (ev.value <= at_f.value - cfg.armijo_c * dt * pnorm) {
      out.factor = std::move(trial);
      out.eval = std::move(ev);
      out.accepted = true;
      return out;
    }
    if (dt <= cfg.dt_min) return out;
    dt = std::max(cfg.dt_min, 0.5 * dt);
  }
}

FlowTrace run_flow(const FunctionalSpec& spec, const TriMesh& mesh,
                   const ConformalFactor& f0, const FlowConfig& cfg) {
  validate_config(cfg);
  FlowTrace trace;
  ConformalFactor f = f0;

  auto snapshot_due = [&](int step, bool terminal) {
    if (terminal || step == 0) return true;
    return cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0;
  };

  Evaluation ev;
  SubgradientSet set;
  PseudoNormResult pn;
  try {
    ev = evaluate(spec, mesh, f, cfg.solver);
    if (cfg.renormalize_each_step) f.values /= ev.problem->total_measure;
    set = generate_candidates(ev, cfg.candidates);
    pn = pseudo_norm(set);
  } catch (const Error& e) {
    rethrow_with_context(e, "flow start");
  }

  auto record = [&](int step, double dt, bool accepted) {
    FlowRecord rec;
    rec.step = step;
    rec.energy = ev.value;
    rec.energy_before = trace.records.empty() ? ev.value : trace.records.back().energy;
    rec.pseudo_norm = pn.value;
    rec.ps_target = ps_target(cfg, set);
    rec.dt = dt;
    rec.accepted = accepted;
    trace.records.push_back(std::move(rec));
  };

  record(0, 0.0, true);
  double dt = cfg.dt_init;
  for (int step = 1; step <= cfg.max_steps; ++step) {
    if (pn.value <= ps_target(cfg, set)) break;
    try {
      Eigen::VectorXd h = downhill_direction(set, pn);
      h = smoothed_direction(mesh, set, pn, std::move(h), cfg.smooth_rounds);
      StepOutcome out = flow_step(spec, mesh, f, ev, pn.value, h, cfg, dt);
      if (!out.accepted) {
        record(step, out.dt_used, false);
        trace.stalled = true;
        break;
      }
      f = std::move(out.factor);
      ev = std::move(out.eval);
      set = generate_candidates(ev, cfg.candidates);
      pn = pseudo_norm(set);
      record(step, out.dt_used, true);
      if (snapshot_due(step, false)) {
        trace.records.back().has_snapshot = true;
        trace.records.back().snapshot = f;
      }
      dt = std::min(cfg.dt_max, 2.0 * out.dt_used);
    } catch (const Error& e) {
      rethrow_with_context(e, "flow step " + std::to_string(step));
    }
  }

  trace.records.front().has_snapshot = true;
  trace.records.front().snapshot = f0;
  trace.records.back().has_snapshot = true;
  trace.records.back().snapshot = f;

  for (std::size_t i = 0; i < trace.records.size(); ++i)
    if (trace.records[i].pseudo_norm <= trace.records[i].ps_target)
      trace.ps_points.push_back(static_cast<int>(i));
  trace.reached_target =
      !trace.ps_points.empty() &&
      trace.ps_points.back() == static_cast<int>(trace.records.size()) - 1;
  trace.final_factor = std::move(f);
  trace.final_eval = std::move(ev);
  return trace;
}

PathFamily make_path(const ConformalFactor& f_start, const ConformalFactor& f_end,
                     int interior_nodes) {
  if (f_start.support != f_end.support || f_start.values.size() != f_end.values.size())
    throw Error::invalid("path endpoints live on different supports");
  if (interior_nodes < 0) throw Error::invalid("negative interior node count");
  PathFamily fam;
  fam.f_start = f_start;
  fam.f_end = f_end;
  fam.interior.reserve(interior_nodes);
  for (int i = 1; i <= interior_nodes; ++i) {
    const double a = static_cast<double>(i) / (interior_nodes + 1);
    ConformalFactor node = f_start;
    node.values = (1.0 - a) * f_start.values + a * f_end.values;
    fam.interior.push_back(std::move(node));
  }
  return fam;
}

namespace {

// Resample the interior of the polyline at uniform arc length; endpoints
// stay, so the re-noded path is the same curve better sampled.
void reparametrize(std::vector<Eigen::VectorXd>& nodes) {
  const int count = static_cast<int>(nodes.size());
  if (count < 3) return;
  std::vector<double> cum(count, 0.0);
  for (int i = 1; i < count; ++i) cum[i] = cum[i - 1] + (nodes[i] - nodes[i - 1]).norm();
  const double total = cum.back();
  if (!(total > 0.0)) return;
  std::vector<Eigen::VectorXd> fresh(nodes.begin(), nodes.end());
  for (int j = 1; j + 1 < count; ++j) {
    const double t = total * j / (count - 1);
    int seg = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), t) - cum.begin()) - 1;
    seg = std::clamp(seg, 0, count - 2);
    const double len = cum[seg + 1] - cum[seg];
    const double a = len > 0.0 ? (t - cum[seg]) / len : 0.0;
    fresh[j] = (1.0 - a) * nodes[seg] + a * nodes[seg + 1];
  }
  nodes = std::move(fresh);
}

struct NodeState {
  Evaluation eval;
  SubgradientSet set;
  PseudoNormResult pn;
};

NodeState probe_node(const FunctionalSpec& spec, const TriMesh& mesh,
                     const ConformalFactor& f, const FlowConfig& cfg) {
  NodeState st;
  st.eval = evaluate(spec, mesh, f, cfg.solver);
  st.set = generate_candidates(st.eval, cfg.candidates);
  st.pn = pseudo_norm(st.set);
  return st;
}

// Condition-(3) surrogate: the least achievable entrywise ceiling over
// convex mixtures of the candidate densities.  Near zero iff some mixture
// is (almost) nonpositive everywhere.
double mixture_ceiling(const SubgradientSet& set) {
  const int r = static_cast<int>(set.candidates.size());
  const int n = static_cast<int>(set.pairing_weights.size());
  Eigen::MatrixXd payoff(r, n);
  for (int a = 0; a < r; ++a) payoff.row(a) = -set.candidates[a].psi.transpose();
  return -solve_matrix_game(payoff).value;
}

// Step cap keeping one sweep's travel at a fraction of the distance to the
// nearest polyline neighbor.  The update f <- f.(1 + dt h) travels dt*|f.h|,
// and both travel and spacing are taken relative to the node's own scale so
// mixed normalizations between sweeps cancel.
double spacing_cap(const std::vector<Eigen::VectorXd>& entry, std::size_t j,
                   const Eigen::VectorXd& f, const Eigen::VectorXd& h, double ratio) {
  const double inf = std::numeric_limits<double>::infinity();
  const double fn = f.norm();
  const double travel = (f.array() * h.array()).matrix().norm();
  if (!(fn > 0.0) || !(travel > 0.0)) return inf;
  const double scale = entry[j].norm();
  if (!(scale > 0.0)) return inf;
  const double spacing = std::min((entry[j] - entry[j - 1]).norm(),
                                  (entry[j + 1] - entry[j]).norm()) / scale;
  if (!(spacing > 0.0)) return inf;
  return ratio * spacing / (travel / fn);
}

// Max of E over the sweep-entry polyline: node samples tightened by midpoint
// subdivision of the two segments flanking the running maximum.  Node samples
// alone straddle the pass once the string bends, and refinement can only
// raise the estimate back toward the true crossing level.
double refined_level(const FunctionalSpec& spec, const TriMesh& mesh,
                     FactorSupport support, const std::vector<Eigen::VectorXd>& entry,
                     const std::vector<double>& energy, const FlowConfig& fcfg,
                     int rounds) {
  std::size_t arg = 0;
  for (std::size_t j = 1; j < energy.size(); ++j)
    if (energy[j] > energy[arg]) arg = j;
  double level = energy[arg];

  const auto energy_at = [&](const Eigen::VectorXd& vals) {
    ConformalFactor f;
    f.support = support;
    f.values = vals;
    return evaluate(spec, mesh, f, fcfg.solver).value;
  };

  const std::size_t last = entry.size() - 1;
  std::array<Eigen::VectorXd, 3> pos = {entry[arg == 0 ? 0 : arg - 1], entry[arg],
                                        entry[arg == last ? last : arg + 1]};
  std::array<double, 3> val = {energy[arg == 0 ? 0 : arg - 1], energy[arg],
                               energy[arg == last ? last : arg + 1]};
  for (int r = 0; r < rounds; ++r) {
    // Five samples: the triple plus the two midpoints; the center stays the
    // maximum of its flanks, so the new maximum is one of the inner three.
    std::array<Eigen::VectorXd, 5> p5;
    std::array<double, 5> v5;
    p5[0] = pos[0];
    v5[0] = val[0];
    p5[2] = pos[1];
    v5[2] = val[1];
    p5[4] = pos[2];
    v5[4] = val[2];
    p5[1] = 0.5 * (pos[0] + pos[1]);
    v5[1] = energy_at(p5[1]);
    p5[3] = 0.5 * (pos[1] + pos[2]);
    v5[3] = energy_at(p5[3]);
    std::size_t k = 1;
    for (std::size_t j = 2; j <= 3; ++j)
      if (v5[j] > v5[k]) k = j;
    level = std::max(level, v5[k]);
    pos = {p5[k - 1], p5[k], p5[k + 1]};
    val = {v5[k - 1], v5[k], v5[k + 1]};
  }
  return level;
}

}  // namespace

MinmaxResult minmax_deform(const FunctionalSpec& spec, const TriMesh& mesh,
                           const PathFamily& family, const MinmaxConfig& cfg) {
  validate_config(cfg.flow);
  if (cfg.sweeps < 0 || cfg.patience < 1 || cfg.level_eps_rel < 0.0 ||
      !(cfg.step_over_spacing > 0.0) || cfg.level_refine < 0)
    throw Error::config("bad minmax sweep parameters");
  const FlowConfig& fcfg = cfg.flow;

  NodeState start_state, end_state;
  try {
    start_state = probe_node(spec, mesh, family.f_start, fcfg);
    end_state = probe_node(spec, mesh, family.f_end, fcfg);
  } catch (const Error& e) {
    rethrow_with_context(e, "minmax endpoints");
  }
  for (const NodeState* st : {&start_state, &end_state})
    if (st->pn.value > ps_target(fcfg, st->set))
      throw Error::endpoint_not_critical(
          "endpoint pseudo-norm " + std::to_string(st->pn.value) + " exceeds target " +
          std::to_string(ps_target(fcfg, st->set)));

  const int interior = static_cast<int>(family.interior.size());
  std::vector<ConformalFactor> nodes;
  nodes.reserve(interior + 2);
  nodes.push_back(family.f_start);
  for (const auto& f : family.interior) nodes.push_back(f);
  nodes.push_back(family.f_end);
  // Interpolation and arc length are computed between unit-measure
  // representatives; E cannot tell the difference.
  if (fcfg.renormalize_each_step) {
    nodes.front().values /= start_state.eval.problem->total_measure;
    nodes.back().values /= end_state.eval.problem->total_measure;
  }

  MinmaxResult res;
  res.node_traces.resize(interior);
  res.c_estimate = std::numeric_limits<double>::infinity();
  std::vector<double> node_dt(interior, fcfg.dt_init);
  double best_max = std::numeric_limits<double>::infinity();
  int no_progress = 0;

  for (int sweep = 1; sweep <= cfg.sweeps && interior > 0; ++sweep) {
    // Polyline at sweep entry: the level is estimated on this family (samples
    // taken *before* each node moves, plus refinement), and step caps are
    // measured against its spacing.  Post-move maxima undersample the crossing
    // once every node has stepped downhill, and the min-over-sweeps estimate
    // would collapse below the true pass level.
    std::vector<Eigen::VectorXd> entry(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) entry[j] = nodes[j].values;
    std::vector<double> entry_energy(nodes.size());
    entry_energy.front() = start_state.eval.value;
    entry_energy.back() = end_state.eval.value;

    bool any_motion = false;
    for (int i = 0; i < interior; ++i) {
      try {
        NodeState st = probe_node(spec, mesh, nodes[i + 1], fcfg);
        if (fcfg.renormalize_each_step)
          nodes[i + 1].values /= st.eval.problem->total_measure;
        entry_energy[i + 1] = st.eval.value;
        FlowRecord rec;
        rec.step = sweep;
        rec.energy = st.eval.value;
        rec.energy_before = st.eval.value;
        rec.pseudo_norm = st.pn.value;
        rec.ps_target = ps_target(fcfg, st.set);
        if (st.pn.value <= rec.ps_target) {
          // The deformation field vanishes where |dE| is already small.
          rec.dt = 0.0;
          rec.accepted = false;
        } else {
          Eigen::VectorXd h = downhill_direction(st.set, st.pn);
          h = smoothed_direction(mesh, st.set, st.pn, std::move(h), fcfg.smooth_rounds);
          const double dt_start = std::min(
              node_dt[i],
              spacing_cap(entry, i + 1, nodes[i + 1].values, h, cfg.step_over_spacing));
          StepOutcome out =
              flow_step(spec, mesh, nodes[i + 1], st.eval, st.pn.value, h, fcfg, dt_start);
          rec.dt = out.dt_used;
          rec.accepted = out.accepted;
          if (out.accepted) {
            nodes[i + 1] = std::move(out.factor);
            rec.energy = out.eval.value;
            node_dt[i] = std::min(fcfg.dt_max, 2.0 * out.dt_used);
            any_motion = true;
          } else {
            node_dt[i] = fcfg.dt_init;
          }
        }
        res.node_traces[i].records.push_back(std::move(rec));
      } catch (const Error& e) {
        rethrow_with_context(
            e, "minmax sweep " + std::to_string(sweep) + " node " + std::to_string(i));
      }
    }
    double level;
    try {
      level = refined_level(spec, mesh, family.f_start.support, entry, entry_energy,
                            fcfg, cfg.level_refine);
    } catch (const Error& e) {
      rethrow_with_context(e, "minmax level sweep " + std::to_string(sweep));
    }
    res.sweep_max.push_back(level);
    res.c_estimate = std::min(res.c_estimate, level);

    if (level < best_max - cfg.stall_rtol * (1.0 + std::abs(best_max))) {
      best_max = level;
      no_progress = 0;
    } else if (++no_progress >= cfg.patience) {
      break;
    }
    if (!any_motion) break;

    if (cfg.reparametrize) {
      std::vector<Eigen::VectorXd> coords;
      coords.reserve(nodes.size());
      for (const auto& f : nodes) coords.push_back(f.values);
      reparametrize(coords);
      for (std::size_t j = 1; j + 1 < nodes.size(); ++j)
        nodes[j].values = coords[j].cwiseMax(fcfg.f_floor);
    }
  }

  // Final bookkeeping over all nodes, endpoints reported bit-identical.
  nodes.front() = family.f_start;
  nodes.back() = family.f_end;
  const int total_nodes = static_cast<int>(nodes.size());
  res.final_nodes = nodes;
  res.final_energy.resize(total_nodes);
  res.final_pseudo_norm.resize(total_nodes);
  std::vector<NodeState> finals(total_nodes);
  for (int j = 0; j < total_nodes; ++j) {
    try {
      finals[j] = probe_node(spec, mesh, nodes[j], fcfg);
    } catch (const Error& e) {
      rethrow_with_context(e, "minmax final node " + std::to_string(j));
    }
    res.final_energy[j] = finals[j].eval.value;
    res.final_pseudo_norm[j] = finals[j].pn.value;
  }
  if (res.sweep_max.empty()) {
    // No sweep ran: the level of the undeformed path is the estimate.
    const double level = *std::max_element(res.final_energy.begin(), res.final_energy.end());
    res.sweep_max.push_back(level);
    res.c_estimate = level;
  }

  const double band = cfg.level_eps_rel * (1.0 + std::abs(res.c_estimate));
  for (int j = 0; j < total_nodes; ++j)
    if (res.final_energy[j] >= res.c_estimate - band) res.ps_candidates.push_back(j);
  if (res.ps_candidates.empty()) {
    // The level is sampled on the whole polyline, so the top node may sit just
    // below the band; it is still the discrete representative of the pass.
    res.ps_candidates.push_back(static_cast<int>(
        std::max_element(res.final_energy.begin(), res.final_energy.end()) -
        res.final_energy.begin()));
  }
  std::sort(res.ps_candidates.begin(), res.ps_candidates.end(), [&](int a, int b) {
    return res.final_pseudo_norm[a] < res.final_pseudo_norm[b];
  });
  res.condition3.reserve(res.ps_candidates.size());
  for (int j : res.ps_candidates) res.condition3.push_back(mixture_ceiling(finals[j].set));
  return res;
}

}  // namespace eigenflow
