#include "qp.hpp"

#include <limits>
#include <vector>

namespace tenseg::detail {

namespace {

constexpr double kTol = 1e-10;

struct ActiveSet {
  // Row indices into A_in of active inequalities, in activation order.
  std::vector<int> ineq;
  Eigen::VectorXd ineq_u;  // multipliers, same order
};

// Solves [H N'; N 0] [z; -r] = [a; 0] where N stacks the equality rows and
// the active inequality rows. z is the primal direction when the multiplier
// of constraint `a` increases; r the rate of change of active multipliers.
bool step_directions(const Eigen::MatrixXd& H, const Eigen::MatrixXd& A_eq,
                     const Eigen::MatrixXd& A_in, const ActiveSet& act,
                     const Eigen::VectorXd& a, Eigen::VectorXd* z,
                     Eigen::VectorXd* r) {
  const int n = static_cast<int>(H.rows());
  const int meq = static_cast<int>(A_eq.rows());
  const int ma = meq + static_cast<int>(act.ineq.size());

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + ma, n + ma);
  kkt.topLeftCorner(n, n) = H;
  for (int j = 0; j < meq; ++j) {
    kkt.block(n + j, 0, 1, n) = A_eq.row(j);
    kkt.block(0, n + j, n, 1) = A_eq.row(j).transpose();
  }
  for (std::size_t j = 0; j < act.ineq.size(); ++j) {
    const int row = n + meq + static_cast<int>(j);
    kkt.block(row, 0, 1, n) = A_in.row(act.ineq[j]);
    kkt.block(0, row, n, 1) = A_in.row(act.ineq[j]).transpose();
  }

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + ma);
  rhs.head(n) = a;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) return false;
  const Eigen::VectorXd sol = lu.solve(rhs);
  *z = sol.head(n);
  // Multipliers evolve at rate -r while u_p grows: H z = a - N' r.
  *r = sol.tail(ma);
  return true;
}

}  // namespace

QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                  const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                  const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in) {
  const int n = static_cast<int>(H.rows());
  const int meq = static_cast<int>(A_eq.rows());
  const int min_ = static_cast<int>(A_in.rows());

  QpResult out;
  out.eq_multipliers = Eigen::VectorXd::Zero(meq);
  out.ineq_multipliers = Eigen::VectorXd::Zero(min_);

  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) return out;

  // Equality-constrained start.
  Eigen::VectorXd x;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(meq);
  if (meq > 0) {
    // Stationarity uses H d + g - A_eq' lambda = 0.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + meq, n + meq);
    kkt.topLeftCorner(n, n) = H;
    kkt.bottomLeftCorner(meq, n) = A_eq;
    kkt.topRightCorner(n, meq) = -A_eq.transpose();
    Eigen::VectorXd rhs(n + meq);
    rhs.head(n) = -g;
    rhs.tail(meq) = -b_eq;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) return out;  // dependent/inconsistent equalities
    const Eigen::VectorXd sol = lu.solve(rhs);
    x = sol.head(n);
    lambda = sol.tail(meq);
  } else {
    x = llt.solve(-g);
  }

  ActiveSet act;
  const int max_steps = 50 * (min_ + meq + 1);
  for (int step = 0; step < max_steps; ++step) {
    // Most violated inactive inequality.
    int p = -1;
    double worst = -kTol;
    for (int i = 0; i < min_; ++i) {
      bool is_active = false;
      for (int idx : act.ineq) {
        if (idx == i) { is_active = true; break; }
      }
      if (is_active) continue;
      const double s = A_in.row(i).dot(x) + b_in(i);
      if (s < worst) {
        worst = s;
        p = i;
      }
    }
    if (p < 0) {
      out.x = x;
      out.eq_multipliers = lambda;
      for (std::size_t j = 0; j < act.ineq.size(); ++j) {
        out.ineq_multipliers(act.ineq[j]) = act.ineq_u(static_cast<int>(j));
      }
      out.success = true;
      return out;
    }

    const Eigen::VectorXd a_p = A_in.row(p).transpose();
    double s_p = A_in.row(p).dot(x) + b_in(p);
    double u_p = 0.0;

    // Inner loop: drop blocking constraints until a full step is possible.
    for (int inner = 0; inner <= min_ + 1; ++inner) {
      Eigen::VectorXd z, r;
      if (!step_directions(H, A_eq, A_in, act, a_p, &z, &r)) return out;

      const double za = z.dot(a_p);
      const bool have_primal = za > kTol;
      const double t2 = have_primal ? -s_p / za : std::numeric_limits<double>::infinity();

      // Dual step bound from active inequality multipliers (equalities never drop).
      double t1 = std::numeric_limits<double>::infinity();
      int drop = -1;
      for (std::size_t j = 0; j < act.ineq.size(); ++j) {
        const double rate = r(meq + static_cast<int>(j));
        if (rate > kTol) {
          const double bound = act.ineq_u(static_cast<int>(j)) / rate;
          if (bound < t1) {
            t1 = bound;
            drop = static_cast<int>(j);
          }
        }
      }

      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) return out;  // infeasible

      if (have_primal) x += t * z;
      lambda -= t * r.head(meq);
      for (std::size_t j = 0; j < act.ineq.size(); ++j) {
        act.ineq_u(static_cast<int>(j)) -= t * r(meq + static_cast<int>(j));
      }
      u_p += t;
      s_p = A_in.row(p).dot(x) + b_in(p);

      if (t == t2 && have_primal) {
        act.ineq.push_back(p);
        Eigen::VectorXd u(act.ineq.size());
        u.head(act.ineq.size() - 1) = act.ineq_u;
        u(static_cast<Eigen::Index>(act.ineq.size()) - 1) = u_p;
        act.ineq_u = u;
        break;
      }

      // Partial step: drop the blocking constraint and retry.
      if (drop < 0) return out;
      act.ineq.erase(act.ineq.begin() + drop);
      Eigen::VectorXd u(act.ineq.size());
      int w = 0;
      for (int j = 0; j < act.ineq_u.size(); ++j) {
        if (j != drop) u(w++) = act.ineq_u(j);
      }
      act.ineq_u = u;
    }
  }
  return out;
}

}  // namespace tenseg::detail
