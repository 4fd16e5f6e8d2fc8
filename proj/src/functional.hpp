#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "eigensolve.hpp"
#include "fem.hpp"
#include "mesh.hpp"

namespace eigenflow {

enum class FunctionalForm { neg_sum, inv_sum, custom };

// Objective E(f) = F(renormalized eigenvalues at `indices`).  Indices are
// 1-based spectral positions (index 0 is the constant mode).  F must be
// monotone nonincreasing in every argument; built-ins satisfy this
// symbolically, custom forms are sampled at evaluation time.
struct FunctionalSpec {
  ProblemKind kind = ProblemKind::laplace;
  FunctionalForm form = FunctionalForm::neg_sum;
  std::vector<int> indices;       // k_1 <= ... <= k_m, each >= 1
  Eigen::VectorXd coefficients;   // c_i > 0, same length as indices
  std::function<double(const Eigen::VectorXd&)> custom_value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> custom_gradient;
};

void validate(const FunctionalSpec& spec);

// F and dF on the renormalized-eigenvalue vector alone (unit-testable).
double functional_value(const FunctionalSpec& spec, const Eigen::VectorXd& lambda_bar);
Eigen::VectorXd functional_gradient(const FunctionalSpec& spec,
                                    const Eigen::VectorXd& lambda_bar);

struct Evaluation {
  double value = 0.0;
  std::vector<int> indices;    // the spectral indices evaluated (copy of spec)
  Eigen::VectorXd lambda_bar;  // renormalized eigenvalue per functional index
  Eigen::VectorXd d;           // dF/dx_i at lambda_bar, all <= 0 for built-ins
  std::shared_ptr<const EigenPackage> eigen;
  std::shared_ptr<const SpectralProblem> problem;
  bool monotonicity_warning = false;  // custom form with a positive sampled d_i
};

// Assembles the problem for f, solves enough pairs to cover the largest
// requested index plus its full eigenvalue cluster (extending the solve when
// a cluster touches the end of the computed window), and applies F.
Evaluation evaluate(const FunctionalSpec& spec, const TriMesh& mesh,
                    const ConformalFactor& f, const SolveOptions& opts = {});

struct StepSchedule {
  double base = 0.0;        // 0: choose from the direction's magnitude
  int levels = 4;           // halvings; 2*levels + 1 evaluations
  double settle_rtol = 1e-3;
  double settle_atol = 1e-8;
};

// Finite-difference directional derivative along the relative perturbation
// f_t = f .* (1 + t h) (h lives on the factor's support).  `derivative` is
// the Richardson-extrapolated central difference; `forward`/`backward` are
// one-sided slopes, and `unstable` flags their mismatch, the signature of an
// eigenvalue-crossing kink where only one-sided derivatives exist.
struct DerivativeProbe {
  double derivative = 0.0;
  double forward = 0.0;
  double backward = 0.0;
  bool unstable = false;
};

DerivativeProbe directional_derivative_fd(const FunctionalSpec& spec, const TriMesh& mesh,
                                          const ConformalFactor& f, const Eigen::VectorXd& h,
                                          const StepSchedule& schedule = {},
                                          const SolveOptions& opts = {});

}  // namespace eigenflow
