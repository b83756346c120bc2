#pragma once

#include <Eigen/Dense>

namespace tenseg::detail {

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;    // lambda, free sign
  Eigen::VectorXd ineq_multipliers;  // mu >= 0
  bool success = false;
};

/// Strictly convex QP:
///   min 1/2 d' H d + g' d
///   s.t. A_eq d + b_eq = 0,  A_in d + b_in >= 0
/// Dual active-set in the Goldfarb-Idnani style; each step re-solves a dense
/// KKT system, which is plenty fast at the 6N-variable sizes used here.
QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                  const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                  const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in);

}  // namespace tenseg::detail
