#include "functional.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace eigenflow {

void validate(const FunctionalSpec& spec) {
  if (spec.indices.empty()) throw Error::config("functional needs at least one index");
  for (std::size_t i = 0; i < spec.indices.size(); ++i) {
    if (spec.indices[i] < 1) throw Error::config("spectral indices are 1-based");
    if (i > 0 && spec.indices[i] < spec.indices[i - 1])
      throw Error::config("spectral indices must be nondecreasing");
  }
  if (spec.coefficients.size() != static_cast<Eigen::Index>(spec.indices.size()))
    throw Error::config("one coefficient per index required");
  if (spec.form != FunctionalForm::custom && !(spec.coefficients.minCoeff() > 0.0))
    throw Error::config("coefficients must be positive");
  if (spec.form == FunctionalForm::custom && (!spec.custom_value || !spec.custom_gradient))
    throw Error::config("custom functional needs value and gradient callbacks");
}

double functional_value(const FunctionalSpec& spec, const Eigen::VectorXd& x) {
  switch (spec.form) {
    case FunctionalForm::neg_sum:
      return -spec.coefficients.dot(x);
    case FunctionalForm::inv_sum: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] < 1e-12)
          throw Error::degenerate_eigenvalue("renormalized eigenvalue below 1e-12");
        s += spec.coefficients[i] / x[i];
      }
      return s;
    }
    case FunctionalForm::custom:
      return spec.custom_value(x);
  }
  throw Error::invalid("unknown functional form");
}

Eigen::VectorXd functional_gradient(const FunctionalSpec& spec, const Eigen::VectorXd& x) {
  switch (spec.form) {
    case FunctionalForm::neg_sum:
      return -spec.coefficients;
    case FunctionalForm::inv_sum: {
      Eigen::VectorXd d(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] < 1e-12)
          throw Error::degenerate_eigenvalue("renormalized eigenvalue below 1e-12");
        d[i] = -spec.coefficients[i] / (x[i] * x[i]);
      }
      return d;
    }
    case FunctionalForm::custom:
      return spec.custom_gradient(x);
  }
  throw Error::invalid("unknown functional form");
}

namespace {

// The cluster containing any requested index must be fully resolved, or the
// symmetrized candidates downstream would see a clipped eigenspace.
bool requested_cluster_touches_end(const EigenPackage& pkg, const std::vector<int>& indices) {
  const int last = static_cast<int>(pkg.values.size()) - 1;
  for (const auto& cluster : pkg.clusters) {
    if (cluster.back() != last) continue;
    for (int k : indices)
      if (std::find(cluster.begin(), cluster.end(), k) != cluster.end()) return true;
  }
  return false;
}

}  // namespace

Evaluation evaluate(const FunctionalSpec& spec, const TriMesh& mesh,
                    const ConformalFactor& f, const SolveOptions& opts) {
  validate(spec);
  const FactorSupport want =
      spec.kind == ProblemKind::laplace ? FactorSupport::area : FactorSupport::boundary;
  if (f.support != want) throw Error::invalid("factor support does not match functional kind");

  auto problem = std::make_shared<SpectralProblem>(build_problem(mesh, f));
  const int dim = static_cast<int>(problem->active.size());
  const int kmax = spec.indices.back();
  if (kmax + 1 > dim) throw Error::invalid("requested spectral index beyond problem size");

  int count = std::min(dim, kmax + 2);
  auto pkg = std::make_shared<EigenPackage>(solve_spectrum(*problem, count, opts));
  while (count < dim && requested_cluster_touches_end(*pkg, spec.indices) &&
         count < kmax + 2 + 12) {
    count = std::min(dim, count + 4);
    pkg = std::make_shared<EigenPackage>(solve_spectrum(*problem, count, opts));
  }

  Evaluation ev;
  ev.eigen = pkg;
  ev.problem = problem;
  ev.indices = spec.indices;
  const auto m = static_cast<Eigen::Index>(spec.indices.size());
  ev.lambda_bar.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) ev.lambda_bar[i] = pkg->renormalized[spec.indices[i]];
  ev.value = functional_value(spec, ev.lambda_bar);
  ev.d = functional_gradient(spec, ev.lambda_bar);
  if (!std::isfinite(ev.value))
    throw Error(ErrorCode::numeric, "NumericError", "functional value is not finite");
  if (spec.form == FunctionalForm::custom && ev.d.maxCoeff() > 1e-10)
    ev.monotonicity_warning = true;
  return ev;
}

namespace {

ConformalFactor stepped(const ConformalFactor& f, const Eigen::VectorXd& h, double t) {
  ConformalFactor g = f;
  g.values.array() *= (1.0 + t * h.array());
  return g;
}

// One column of a Richardson table with the given error-order step ratio.
double richardson(const std::vector<double>& seq, double order_base) {
  std::vector<double> row = seq;
  double weight = order_base;
  for (std::size_t k = 1; k < seq.size(); ++k) {
    for (std::size_t j = row.size() - 1; j >= k; --j)
      row[j] = (weight * row[j] - row[j - 1]) / (weight - 1.0);
    weight *= order_base;
  }
  return row.back();
}

}  // namespace

DerivativeProbe directional_derivative_fd(const FunctionalSpec& spec, const TriMesh& mesh,
                                          const ConformalFactor& f, const Eigen::VectorXd& h,
                                          const StepSchedule& schedule, const SolveOptions& opts) {
  if (h.size() != f.values.size()) throw Error::invalid("direction size mismatch");
  const int levels = std::max(2, schedule.levels);

  const double hmax = h.cwiseAbs().maxCoeff();
  double t0 = schedule.base;
  if (t0 <= 0.0) t0 = (hmax > 0.0) ? std::min(1e-2, 0.25 / hmax) : 1e-2;
  // Every probed factor must stay positive: 1 + t h > 0.
  if (t0 * hmax >= 1.0) t0 = 0.5 / hmax;
  if (!(t0 > 1e-12)) throw Error::step_underflow("finite-difference step underflowed");

  const double e0 = evaluate(spec, mesh, f, opts).value;
  std::vector<double> central, fwd, bwd;
  double t = t0;
  for (int j = 0; j < levels; ++j, t *= 0.5) {
    const double ep = evaluate(spec, mesh, stepped(f, h, t), opts).value;
    const double em = evaluate(spec, mesh, stepped(f, h, -t), opts).value;
    central.push_back((ep - em) / (2.0 * t));
    fwd.push_back((ep - e0) / t);
    bwd.push_back((e0 - em) / t);
  }

  DerivativeProbe probe;
  probe.derivative = richardson(central, 4.0);  // O(t^2) error series
  probe.forward = richardson(fwd, 2.0);         // O(t) error series
  probe.backward = richardson(bwd, 2.0);
  const double mismatch = std::abs(probe.forward - probe.backward);
  const double scale = std::max({1.0, std::abs(probe.forward), std::abs(probe.backward)});
  probe.unstable = mismatch > std::max(schedule.settle_atol, schedule.settle_rtol * scale);
  return probe;
}

}  // namespace eigenflow
