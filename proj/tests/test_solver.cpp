#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tenseg/errors.hpp"
#include "tenseg/geometry.hpp"
#include "tenseg/rng.hpp"
#include "tenseg/solver.hpp"

using namespace tenseg;

namespace {

NlpProblem line_projection_problem() {
  // min ||x - (1,1)||^2 s.t. x1 + x2 = 1.
  NlpProblem p;
  p.dimension = 2;
  p.objective = [](const VecX& x, VecX* g) {
    const VecX d = x - Eigen::Vector2d(1, 1);
    if (g) *g = 2.0 * d;
    return d.squaredNorm();
  };
  p.equalities.push_back([](const VecX& x, VecX* g) {
    if (g) {
      g->resize(2);
      (*g) << 1, 1;
    }
    return x(0) + x(1) - 1.0;
  });
  p.initial_point = Eigen::Vector2d(3.0, -2.0);
  return p;
}

NlpProblem active_bound_problem() {
  // min x^2 s.t. x >= 1.
  NlpProblem p;
  p.dimension = 1;
  p.objective = [](const VecX& x, VecX* g) {
    if (g) {
      g->resize(1);
      (*g)(0) = 2.0 * x(0);
    }
    return x(0) * x(0);
  };
  p.inequalities.push_back([](const VecX& x, VecX* g) {
    if (g) {
      g->resize(1);
      (*g)(0) = 1.0;
    }
    return x(0) - 1.0;
  });
  p.initial_point = VecX::Constant(1, 3.0);
  return p;
}

NlpProblem rod_stretch_problem() {
  // min ||qa - a||^2 + ||qb - b||^2 s.t. |qa - qb| = 0.36,
  // a = (0,0,0), b = (0.30,0,0). Analytic optimum: symmetric expansion about
  // the midpoint -> qa = (-0.03,0,0), qb = (0.33,0,0).
  NlpProblem p;
  p.dimension = 6;
  const Vec3 a(0, 0, 0), b(0.30, 0, 0);
  p.objective = [a, b](const VecX& x, VecX* g) {
    const Vec3 qa = x.head<3>();
    const Vec3 qb = x.tail<3>();
    if (g) {
      g->resize(6);
      g->head<3>() = 2.0 * (qa - a);
      g->tail<3>() = 2.0 * (qb - b);
    }
    return (qa - a).squaredNorm() + (qb - b).squaredNorm();
  };
  p.equalities.push_back([](const VecX& x, VecX* g) {
    const Vec3 qa = x.head<3>();
    const Vec3 qb = x.tail<3>();
    const Vec3 d = qa - qb;
    const double n = d.norm();
    if (g) {
      g->resize(6);
      g->head<3>() = d / n;
      g->tail<3>() = -d / n;
    }
    return n - 0.36;
  });
  p.initial_point = VecX::Zero(6);
  p.initial_point.tail<3>() = b;
  return p;
}

}  // namespace

TEST_CASE("projection onto a line") {
  const auto result = minimize_constrained(line_projection_problem());
  CHECK(result.converged);
  CHECK(std::abs(result.solution(0) - 0.5) < 1e-6);
  CHECK(std::abs(result.solution(1) - 0.5) < 1e-6);
  CHECK(std::abs(result.objective_value - 0.5) < 1e-6);
}

TEST_CASE("active inequality lands on the bound") {
  const auto result = minimize_constrained(active_bound_problem());
  CHECK(result.converged);
  CHECK(std::abs(result.solution(0) - 1.0) < 1e-6);
  CHECK(result.ineq_multipliers(0) > 0.0);
}

TEST_CASE("symmetric stretch to rod length") {
  const auto result = minimize_constrained(rod_stretch_problem());
  CHECK(result.converged);
  CHECK(std::abs(result.solution(0) - (-0.03)) < 1e-6);
  CHECK(std::abs(result.solution(3) - 0.33) < 1e-6);
  CHECK(std::abs(result.solution(1)) < 1e-6);
  CHECK(std::abs(result.solution(2)) < 1e-6);
}

TEST_CASE("converged results satisfy the declared tolerances") {
  SolverConfig cfg;
  for (const auto& problem : {line_projection_problem(), active_bound_problem(),
                              rod_stretch_problem()}) {
    const auto r = minimize_constrained(problem, cfg);
    REQUIRE(r.converged);
    CHECK(r.kkt_residual <= cfg.kkt_tol);

    // Re-evaluating constraints at the solution reproduces the reported
    // violation within 1e-12.
    double max_viol = 0.0;
    for (const auto& c : problem.equalities) {
      max_viol = std::max(max_viol, std::abs(c(r.solution, nullptr)));
    }
    for (const auto& c : problem.inequalities) {
      max_viol = std::max(max_viol, -std::min(0.0, c(r.solution, nullptr)));
    }
    CHECK(std::abs(max_viol - r.max_constraint_violation) < 1e-12);
    CHECK(max_viol <= cfg.eq_tol + 1e-12);
  }
}

TEST_CASE("feasible start stays monotone on a convex problem") {
  auto p = line_projection_problem();
  p.initial_point = Eigen::Vector2d(0.5, 0.5);  // feasible
  const double f0 = p.objective(p.initial_point, nullptr);
  const auto r = minimize_constrained(p);
  CHECK(r.converged);
  CHECK(r.objective_value <= f0 + 1e-12);
}

TEST_CASE("deterministic across repeated solves") {
  const auto a = minimize_constrained(rod_stretch_problem());
  const auto b = minimize_constrained(rod_stretch_problem());
  REQUIRE(a.solution.size() == b.solution.size());
  for (int i = 0; i < a.solution.size(); ++i) {
    CHECK(a.solution(i) == b.solution(i));
  }
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("NaN objective raises a numerical failure") {
  NlpProblem p;
  p.dimension = 1;
  p.objective = [](const VecX& x, VecX* g) {
    if (g) {
      g->resize(1);
      (*g)(0) = 1.0;
    }
    return std::sqrt(x(0));  // NaN for negative input
  };
  p.initial_point = VecX::Constant(1, -1.0);
  CHECK_THROWS_AS(minimize_constrained(p), NumericalFailureError);
}

TEST_CASE("check_gradient") {
  auto good = rod_stretch_problem();
  VecX x(6);
  x << 0.01, -0.02, 0.03, 0.31, 0.02, -0.01;
  CHECK(check_gradient(good, x, 1e-5) < 1e-6);

  // Negative control: corrupt one gradient component.
  auto bad = rod_stretch_problem();
  bad.objective = [inner = good.objective](const VecX& x, VecX* g) {
    const double f = inner(x, g);
    if (g) (*g)(0) += 1.0;
    return f;
  };
  CHECK(check_gradient(bad, x, 1e-5) > 0.1);
}

TEST_CASE("inactive inequalities do not disturb the unconstrained optimum") {
  NlpProblem p;
  p.dimension = 2;
  p.objective = [](const VecX& x, VecX* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
  for (int i = 0; i < 2; ++i) {
    p.inequalities.push_back([i](const VecX& x, VecX* g) {
      if (g) {
        g->setZero(2);
        (*g)(i) = 1.0;
      }
      return x(i) + 5.0;  // x_i >= -5, inactive at the optimum
    });
  }
  p.initial_point = Eigen::Vector2d(2.0, -3.0);
  const auto r = minimize_constrained(p);
  CHECK(r.converged);
  CHECK(r.solution.norm() < 1e-6);
  CHECK(r.ineq_multipliers.cwiseAbs().maxCoeff() < 1e-9);
}
