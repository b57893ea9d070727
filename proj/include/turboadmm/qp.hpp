#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "turboadmm/model.hpp"

namespace turboadmm {

/// Bound entries with magnitude at or above this sentinel are treated as
/// infinite and never enter the working set.
inline constexpr double kInfiniteBound = 1e19;

inline bool is_finite_bound(double v) { return std::abs(v) < kInfiniteBound; }

enum class QpStatus { optimal, max_iter, infeasible, ill_conditioned };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::ill_conditioned: return "ill_conditioned";
  }
  return "unknown";
}

/// Dense strictly convex QP
///   min 1/2 x'Hx + g'x   s.t.  A_eq x = b_eq,  lb <= x <= ub,
/// with H symmetric and positive definite on the null space of A_eq.
struct QpData {
  Matrix H;
  Vector g;
  Matrix A_eq;  // m x n, full row rank (m may be 0)
  Vector b_eq;
  Vector lb, ub;

  int num_vars() const { return static_cast<int>(H.rows()); }
  int num_eq() const { return static_cast<int>(A_eq.rows()); }

  double objective(const Vector& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
};

/// Primal-dual answer. Stationarity convention:
///   H x + g + A_eq' nu + mu = 0,
/// with mu_j <= 0 when x_j rests on its lower bound and mu_j >= 0 on its
/// upper bound. `iterations` counts working-set changes (bound additions
/// plus removals), identically in cold, warm and hot solves.
struct QpSolution {
  Vector x;
  Vector nu;  // equality duals
  Vector mu;  // bound duals, zero off the working set
  std::vector<int> working_set;  // variable indices of bounds held active
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
};

/// Residuals of the KKT conditions, computed independently of any solver
/// internals. Used by tests and the acceptance suite to certify solutions.
struct KktResiduals {
  double stationarity = 0.0;   // ||Hx + g + A'nu + mu||_inf
  double equality = 0.0;       // ||A x - b||_inf
  double bound_violation = 0.0;  // max over clip distances
  double complementarity = 0.0;  // max |mu_j| over coords away from both bounds
  double dual_sign_violation = 0.0;  // wrong-signed mu magnitude at bounds

  double max() const {
    return std::max({stationarity, equality, bound_violation, complementarity,
                     dual_sign_violation});
  }
  bool pass(double tol) const { return max() <= tol; }
};

inline KktResiduals check_kkt(const QpData& qp, const QpSolution& sol, double active_tol = 1e-7) {
  KktResiduals r;
  const int n = qp.num_vars();
  Vector stat = qp.H * sol.x + qp.g + sol.mu;
  if (qp.num_eq() > 0) stat += qp.A_eq.transpose() * sol.nu;
  r.stationarity = stat.cwiseAbs().maxCoeff();
  if (qp.num_eq() > 0)
    r.equality = (qp.A_eq * sol.x - qp.b_eq).cwiseAbs().maxCoeff();
  for (int j = 0; j < n; ++j) {
    const double xj = sol.x[j];
    if (is_finite_bound(qp.lb[j]))
      r.bound_violation = std::max(r.bound_violation, qp.lb[j] - xj);
    if (is_finite_bound(qp.ub[j]))
      r.bound_violation = std::max(r.bound_violation, xj - qp.ub[j]);

    const bool fixed = qp.lb[j] == qp.ub[j];
    const bool at_lower = is_finite_bound(qp.lb[j]) && xj - qp.lb[j] <= active_tol;
    const bool at_upper = is_finite_bound(qp.ub[j]) && qp.ub[j] - xj <= active_tol;
    const double mj = sol.mu[j];
    if (fixed) continue;  // both-sided: any dual sign admissible
    if (!at_lower && !at_upper) {
      r.complementarity = std::max(r.complementarity, std::abs(mj));
    } else if (at_lower && !at_upper) {
      r.dual_sign_violation = std::max(r.dual_sign_violation, mj);  // must be <= 0
    } else if (at_upper && !at_lower) {
      r.dual_sign_violation = std::max(r.dual_sign_violation, -mj);  // must be >= 0
    }
  }
  r.bound_violation = std::max(r.bound_violation, 0.0);
  r.dual_sign_violation = std::max(r.dual_sign_violation, 0.0);
  return r;
}

namespace detail {

inline void dump_array(std::ostream& os, const std::string& name, const double* data,
                       long rows, long cols) {
  os << "%%MatrixMarket matrix array real general\n";
  os << "% " << name << "\n" << rows << " " << cols << "\n";
  os.precision(17);
  // column-major, matching the MatrixMarket array convention
  for (long c = 0; c < cols; ++c)
    for (long r = 0; r < rows; ++r) os << data[c * rows + r] << "\n";
}

}  // namespace detail

/// Matrix-market style text dump of a QP instance, emitted when a solve
/// fails so the instance can be triaged offline.
inline void write_debug_dump(std::ostream& os, const QpData& qp,
                             const std::string& note = "") {
  if (!note.empty()) os << "% " << note << "\n";
  detail::dump_array(os, "H", qp.H.data(), qp.H.rows(), qp.H.cols());
  detail::dump_array(os, "g", qp.g.data(), qp.g.size(), 1);
  detail::dump_array(os, "A_eq", qp.A_eq.data(), qp.A_eq.rows(), qp.A_eq.cols());
  detail::dump_array(os, "b_eq", qp.b_eq.data(), qp.b_eq.size(), 1);
  detail::dump_array(os, "lb", qp.lb.data(), qp.lb.size(), 1);
  detail::dump_array(os, "ub", qp.ub.data(), qp.ub.size(), 1);
}

}  // namespace turboadmm
