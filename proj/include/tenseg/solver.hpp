#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace tenseg {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Smooth scalar function with analytic gradient. `grad`, when non-null,
/// must be resized/filled by the callee.
using NlpFunction = std::function<double(const VecX& x, VecX* grad)>;

/// min objective(x) s.t. equalities(x) = 0, inequalities(x) >= 0.
struct NlpProblem {
  int dimension = 0;
  NlpFunction objective;
  std::vector<NlpFunction> equalities;
  std::vector<NlpFunction> inequalities;
  VecX initial_point;
};

struct SolverConfig {
  int max_iters = 100;
  double eq_tol = 1e-6;
  double ineq_tol = 1e-6;
  double kkt_tol = 1e-5;
};

struct SolverResult {
  VecX solution;
  double objective_value = 0.0;
  int iterations = 0;
  double max_constraint_violation = 0.0;  // max(|eq|, max(0, -ineq))
  double kkt_residual = 0.0;
  bool converged = false;
  VecX eq_multipliers;
  VecX ineq_multipliers;
};

/// SQP with damped BFGS, an L1 merit line search and a dual active-set QP
/// subproblem. `converged` is only set when the final iterate satisfies the
/// equality/inequality tolerances and the stationarity residual is within
/// kkt_tol. Throws NumericalFailureError when an evaluation returns NaN/Inf.
SolverResult minimize_constrained(const NlpProblem& problem,
                                  const SolverConfig& config = {});

/// Worst relative error between analytic gradients and central finite
/// differences, across the objective and every constraint.
double check_gradient(const NlpProblem& problem, const VecX& point, double h);

}  // namespace tenseg
