#include "tenseg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qp.hpp"
#include "tenseg/errors.hpp"

namespace tenseg {

namespace {

struct Evaluation {
  double f = 0.0;
  VecX grad;
  VecX c_eq;
  MatX j_eq;
  VecX c_in;
  MatX j_in;
};

[[noreturn]] void throw_nonfinite(const char* where, const VecX& x) {
  std::ostringstream oss;
  oss << "minimize_constrained: non-finite " << where << " at x = [";
  for (int i = 0; i < x.size(); ++i) oss << (i ? ", " : "") << x(i);
  oss << "]";
  throw NumericalFailureError(oss.str());
}

Evaluation evaluate(const NlpProblem& p, const VecX& x) {
  Evaluation ev;
  ev.f = p.objective(x, &ev.grad);
  if (!std::isfinite(ev.f) || !ev.grad.allFinite()) throw_nonfinite("objective", x);

  const int meq = static_cast<int>(p.equalities.size());
  const int min_ = static_cast<int>(p.inequalities.size());
  ev.c_eq.resize(meq);
  ev.j_eq.resize(meq, p.dimension);
  for (int i = 0; i < meq; ++i) {
    VecX g;
    ev.c_eq(i) = p.equalities[i](x, &g);
    if (!std::isfinite(ev.c_eq(i)) || !g.allFinite()) throw_nonfinite("equality constraint", x);
    ev.j_eq.row(i) = g.transpose();
  }
  ev.c_in.resize(min_);
  ev.j_in.resize(min_, p.dimension);
  for (int i = 0; i < min_; ++i) {
    VecX g;
    ev.c_in(i) = p.inequalities[i](x, &g);
    if (!std::isfinite(ev.c_in(i)) || !g.allFinite()) throw_nonfinite("inequality constraint", x);
    ev.j_in.row(i) = g.transpose();
  }
  return ev;
}

double merit_value(const NlpProblem& p, const VecX& x, double rho, double* f_out) {
  VecX unused;
  const double f = p.objective(x, nullptr);
  if (!std::isfinite(f)) throw_nonfinite("objective", x);
  double infeas = 0.0;
  for (const auto& c : p.equalities) {
    const double v = c(x, nullptr);
    if (!std::isfinite(v)) throw_nonfinite("equality constraint", x);
    infeas += std::abs(v);
  }
  for (const auto& c : p.inequalities) {
    const double v = c(x, nullptr);
    if (!std::isfinite(v)) throw_nonfinite("inequality constraint", x);
    infeas += std::max(0.0, -v);
  }
  if (f_out) *f_out = f;
  return f + rho * infeas;
}

double infeasibility_l1(const Evaluation& ev) {
  double s = 0.0;
  for (int i = 0; i < ev.c_eq.size(); ++i) s += std::abs(ev.c_eq(i));
  for (int i = 0; i < ev.c_in.size(); ++i) s += std::max(0.0, -ev.c_in(i));
  return s;
}

double max_violation(const Evaluation& ev) {
  double m = 0.0;
  for (int i = 0; i < ev.c_eq.size(); ++i) m = std::max(m, std::abs(ev.c_eq(i)));
  for (int i = 0; i < ev.c_in.size(); ++i) m = std::max(m, -ev.c_in(i));
  return std::max(m, 0.0);
}

double kkt_residual(const Evaluation& ev, const VecX& lambda, const VecX& mu) {
  VecX grad_l = ev.grad;
  if (lambda.size() > 0) grad_l -= ev.j_eq.transpose() * lambda;
  if (mu.size() > 0) grad_l -= ev.j_in.transpose() * mu;
  double res = grad_l.lpNorm<Eigen::Infinity>();
  for (int i = 0; i < mu.size(); ++i) {
    res = std::max(res, std::abs(mu(i) * ev.c_in(i)));
  }
  return res;
}

}  // namespace

SolverResult minimize_constrained(const NlpProblem& problem,
                                  const SolverConfig& config) {
  if (problem.dimension <= 0 || problem.initial_point.size() != problem.dimension) {
    throw InvalidArgumentError("minimize_constrained: bad dimension/initial point");
  }

  const int n = problem.dimension;
  VecX x = problem.initial_point;
  Evaluation ev = evaluate(problem, x);

  MatX hessian = MatX::Identity(n, n);
  double rho = 1.0;
  VecX lambda = VecX::Zero(ev.c_eq.size());
  VecX mu = VecX::Zero(ev.c_in.size());

  SolverResult result;
  int iter = 0;
  for (; iter < config.max_iters; ++iter) {
    detail::QpResult qp = detail::solve_qp(hessian, ev.grad, ev.j_eq, ev.c_eq,
                                           ev.j_in, ev.c_in);
    if (!qp.success) {
      // Retry with a regularized Hessian, then with equalities only.
      MatX reg = hessian + 1e-6 * MatX::Identity(n, n);
      qp = detail::solve_qp(reg, ev.grad, ev.j_eq, ev.c_eq, ev.j_in, ev.c_in);
      if (!qp.success) {
        qp = detail::solve_qp(reg, ev.grad, ev.j_eq, ev.c_eq, MatX::Zero(0, n),
                              VecX::Zero(0));
        if (qp.success) qp.ineq_multipliers = VecX::Zero(ev.c_in.size());
      }
      if (!qp.success) break;
    }
    lambda = qp.eq_multipliers;
    mu = qp.ineq_multipliers;

    // Optimality test at the current iterate.
    const double kkt = kkt_residual(ev, lambda, mu);
    const double eq_viol = ev.c_eq.size() ? ev.c_eq.cwiseAbs().maxCoeff() : 0.0;
    const double in_viol = ev.c_in.size() ? std::max(0.0, -ev.c_in.minCoeff()) : 0.0;
    if (kkt <= config.kkt_tol && eq_viol <= config.eq_tol && in_viol <= config.ineq_tol) {
      break;
    }

    const VecX d = qp.x;
    if (d.lpNorm<Eigen::Infinity>() < 1e-14 && infeasibility_l1(ev) < 1e-14) break;

    // L1 merit with a penalty dominating the multipliers.
    double mult_norm = 0.0;
    if (lambda.size()) mult_norm = lambda.cwiseAbs().maxCoeff();
    if (mu.size()) mult_norm = std::max(mult_norm, mu.cwiseAbs().maxCoeff());
    rho = std::max(rho, 2.0 * mult_norm + 1.0);

    const double infeas0 = infeasibility_l1(ev);
    const double merit0 = ev.f + rho * infeas0;
    const double descent = ev.grad.dot(d) - rho * infeas0;

    double alpha = 1.0;
    double merit_trial = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      merit_trial = merit_value(problem, x + alpha * d, rho, nullptr);
      if (merit_trial <= merit0 + 1e-4 * alpha * descent) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted && merit_trial >= merit0) break;  // stalled

    const VecX x_new = x + alpha * d;
    Evaluation ev_new = evaluate(problem, x_new);

    // Damped BFGS on the Lagrangian gradient.
    VecX grad_l_old = ev.grad;
    VecX grad_l_new = ev_new.grad;
    if (lambda.size()) {
      grad_l_old -= ev.j_eq.transpose() * lambda;
      grad_l_new -= ev_new.j_eq.transpose() * lambda;
    }
    if (mu.size()) {
      grad_l_old -= ev.j_in.transpose() * mu;
      grad_l_new -= ev_new.j_in.transpose() * mu;
    }
    const VecX s = x_new - x;
    VecX y = grad_l_new - grad_l_old;
    const double s_norm2 = s.squaredNorm();
    if (s_norm2 > 1e-24) {
      const VecX bs = hessian * s;
      const double sbs = s.dot(bs);
      double sy = s.dot(y);
      if (sy < 0.2 * sbs) {
        const double theta = 0.8 * sbs / (sbs - sy);
        y = theta * y + (1.0 - theta) * bs;
        sy = s.dot(y);
      }
      if (sy > 1e-12 && sbs > 1e-12) {
        hessian -= (bs * bs.transpose()) / sbs;
        hessian += (y * y.transpose()) / sy;
        hessian = 0.5 * (hessian + hessian.transpose());
      }
    }

    x = x_new;
    ev = ev_new;
  }

  result.solution = x;
  result.objective_value = ev.f;
  result.iterations = iter;
  result.max_constraint_violation = max_violation(ev);
  result.kkt_residual = kkt_residual(ev, lambda, mu);
  result.eq_multipliers = lambda;
  result.ineq_multipliers = mu;
  const double eq_viol = ev.c_eq.size() ? ev.c_eq.cwiseAbs().maxCoeff() : 0.0;
  const double in_viol = ev.c_in.size() ? std::max(0.0, -ev.c_in.minCoeff()) : 0.0;
  result.converged = result.kkt_residual <= config.kkt_tol &&
                     eq_viol <= config.eq_tol && in_viol <= config.ineq_tol;
  return result;
}

double check_gradient(const NlpProblem& problem, const VecX& point, double h) {
  if (!(h > 0.0)) throw InvalidArgumentError("check_gradient: h must be > 0");

  auto check_one = [&](const NlpFunction& fn) {
    VecX analytic;
    fn(point, &analytic);
    double worst = 0.0;
    VecX x = point;
    for (int i = 0; i < point.size(); ++i) {
      const double x0 = x(i);
      x(i) = x0 + h;
      const double fp = fn(x, nullptr);
      x(i) = x0 - h;
      const double fm = fn(x, nullptr);
      x(i) = x0;
      const double fd = (fp - fm) / (2.0 * h);
      const double denom = std::max({1.0, std::abs(analytic(i)), std::abs(fd)});
      worst = std::max(worst, std::abs(analytic(i) - fd) / denom);
    }
    return worst;
  };

  double worst = check_one(problem.objective);
  for (const auto& c : problem.equalities) worst = std::max(worst, check_one(c));
  for (const auto& c : problem.inequalities) worst = std::max(worst, check_one(c));
  return worst;
}

}  // namespace tenseg
