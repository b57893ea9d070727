#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

#include "turboadmm/qp.hpp"

// Deliberately simple reference solvers used as ground truth by the test
// and acceptance suites. No factorization caching, no performance goals,
// and no code shared with the production solve paths.

namespace turboadmm::oracle {

/// Solves the equality-constrained QP
///   min 1/2 x'Hx + g'x  s.t. A x = b
/// through one dense factorization of the saddle-point system
///   [H A'; A 0] [x; nu] = [-g; b].
inline std::pair<Vector, Vector> kkt_equality_solve(const Matrix& H, const Vector& g,
                                                    const Matrix& A, const Vector& b) {
  const int n = static_cast<int>(H.rows());
  const int m = static_cast<int>(A.rows());
  Matrix K = Matrix::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = H;
  if (m > 0) {
    K.topRightCorner(n, m) = A.transpose();
    K.bottomLeftCorner(m, n) = A;
  }
  Vector rhs(n + m);
  rhs.head(n) = -g;
  rhs.tail(m) = b;

  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) throw std::runtime_error("kkt_equality_solve: singular KKT matrix");
  Vector sol = lu.solve(rhs);
  const double residual = (K * sol - rhs).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
  if (residual > 1e-10 * scale)
    throw std::runtime_error("kkt_equality_solve: residual above 1e-10, system too ill-conditioned");
  return {sol.head(n), sol.tail(m)};
}

/// Ground truth for the active-set kernel on small instances: enumerates
/// every bound activity pattern (free / at-lower / at-upper per variable,
/// skipping infinite bounds), solves the equality-restricted KKT system for
/// each, and returns the pattern passing primal feasibility and dual sign
/// checks. Strict convexity on the feasible subspace makes the KKT point
/// unique, so enumeration order is irrelevant; with check_uniqueness the
/// enumeration continues and asserts no second distinct solution exists.
///
/// Patterns whose restricted KKT matrix is singular (redundant equality
/// rows once enough variables sit at bounds) have non-unique duals, so the
/// sign test cannot certify them; their primal solutions are kept as
/// candidates and the lowest objective among primal-feasible candidates is
/// returned instead. That point is the optimum whenever no certified
/// pattern exists: the true activity pattern always yields the global
/// minimizer, and every other feasible candidate can only have a larger
/// objective.
inline QpSolution brute_force_box_qp(const QpData& qp, bool check_uniqueness = false) {
  const int n = qp.num_vars();
  const int m = qp.num_eq();
  if (n > 12) throw std::invalid_argument("brute_force_box_qp: n must be <= 12");

  constexpr double feas_tol = 1e-8;

  // Admissible states per variable: 0 free, 1 at lower, 2 at upper.
  std::vector<std::vector<int>> states(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    const bool lo = is_finite_bound(qp.lb[j]);
    const bool hi = is_finite_bound(qp.ub[j]);
    if (lo && hi && qp.lb[j] == qp.ub[j]) {
      states[j] = {1};  // fixed variable, always at its bound
      continue;
    }
    states[j].push_back(0);
    if (lo) states[j].push_back(1);
    if (hi) states[j].push_back(2);
  }

  std::optional<QpSolution> best;
  std::optional<QpSolution> best_uncertified;
  double best_uncertified_obj = std::numeric_limits<double>::infinity();

  std::vector<size_t> idx(static_cast<size_t>(n), 0);
  bool done = n == 0;
  auto advance = [&]() {
    for (int j = n - 1; j >= 0; --j) {
      if (++idx[j] < states[j].size()) return true;
      idx[j] = 0;
    }
    return false;
  };

  while (true) {
    std::vector<int> free_idx, bound_idx;
    Vector x = Vector::Zero(n);
    for (int j = 0; j < n; ++j) {
      const int st = done ? 0 : states[j][idx[j]];
      if (st == 0) {
        free_idx.push_back(j);
      } else {
        bound_idx.push_back(j);
        x[j] = st == 1 ? qp.lb[j] : qp.ub[j];
      }
    }

    const int nf = static_cast<int>(free_idx.size());
    Matrix K = Matrix::Zero(nf + m, nf + m);
    Vector rhs(nf + m);
    for (int a = 0; a < nf; ++a) {
      for (int b2 = 0; b2 < nf; ++b2) K(a, b2) = qp.H(free_idx[a], free_idx[b2]);
      double lin = qp.g[free_idx[a]];
      for (int j : bound_idx) lin += qp.H(free_idx[a], j) * x[j];
      rhs[a] = -lin;
      for (int r = 0; r < m; ++r) {
        K(a, nf + r) = qp.A_eq(r, free_idx[a]);
        K(nf + r, a) = qp.A_eq(r, free_idx[a]);
      }
    }
    for (int r = 0; r < m; ++r) {
      double br = qp.b_eq[r];
      for (int j : bound_idx) br -= qp.A_eq(r, j) * x[j];
      rhs[nf + r] = br;
    }

    Vector sol;
    bool solvable = false;
    bool duals_unique = false;
    if (nf + m == 0) {
      solvable = true;  // x fully pinned by bounds
      duals_unique = true;
    } else {
      Eigen::FullPivLU<Matrix> lu(K);
      duals_unique = lu.isInvertible();
      if (duals_unique) {
        sol = lu.solve(rhs);
      } else {
        sol = Eigen::CompleteOrthogonalDecomposition<Matrix>(K).solve(rhs);
      }
      solvable =
          (K * sol - rhs).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, rhs.cwiseAbs().maxCoeff());
    }
    if (solvable) {
      for (int a = 0; a < nf; ++a) x[free_idx[a]] = sol[a];
      Vector nu = sol.size() > 0 ? Vector(sol.tail(m)) : Vector::Zero(m);

      bool primal_ok = true;
      for (int j : free_idx) {
        if (is_finite_bound(qp.lb[j]) && x[j] < qp.lb[j] - feas_tol) primal_ok = false;
        if (is_finite_bound(qp.ub[j]) && x[j] > qp.ub[j] + feas_tol) primal_ok = false;
      }
      bool dual_ok = primal_ok;
      Vector mu = Vector::Zero(n);
      if (primal_ok) {
        Vector grad = qp.H * x + qp.g;
        if (m > 0) grad += qp.A_eq.transpose() * nu;
        for (int j : bound_idx) {
          mu[j] = -grad[j];
          if (qp.lb[j] == qp.ub[j]) continue;
          const bool at_lower = x[j] == qp.lb[j];
          if (at_lower && mu[j] > feas_tol) dual_ok = false;
          if (!at_lower && mu[j] < -feas_tol) dual_ok = false;
        }
      }
      if (primal_ok && dual_ok && duals_unique) {
        QpSolution cand;
        cand.x = x;
        cand.nu = nu;
        cand.mu = mu;
        cand.working_set = bound_idx;
        cand.status = QpStatus::optimal;
        cand.iterations = 0;
        if (!best) {
          best = std::move(cand);
          if (!check_uniqueness) return *best;
        } else if ((cand.x - best->x).cwiseAbs().maxCoeff() > 1e-6) {
          throw std::runtime_error("brute_force_box_qp: multiple distinct KKT points found");
        }
      } else if (primal_ok && !duals_unique) {
        const double obj = qp.objective(x);
        if (obj < best_uncertified_obj) {
          best_uncertified_obj = obj;
          QpSolution cand;
          cand.x = x;
          cand.nu = nu;
          cand.mu = mu;
          cand.working_set = bound_idx;
          cand.status = QpStatus::optimal;
          cand.iterations = 0;
          best_uncertified = std::move(cand);
        }
      }
    }

    if (done || !advance()) break;
  }

  if (best) return *best;
  if (best_uncertified) return *best_uncertified;
  QpSolution none;
  none.status = QpStatus::infeasible;
  none.x = Vector::Zero(n);
  none.nu = Vector::Zero(m);
  none.mu = Vector::Zero(n);
  return none;
}

/// Minimum pairwise center distance over all unordered agent pairs and all
/// timesteps. Positions are the leading d_p components of each state.
inline double min_separation(const std::vector<std::vector<Vector>>& trajectories, int d_p) {
  double best = std::numeric_limits<double>::infinity();
  const size_t n = trajectories.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (trajectories[i].size() != trajectories[j].size())
        throw std::invalid_argument("min_separation: trajectories must share length");
      for (size_t t = 0; t < trajectories[i].size(); ++t) {
        const double d = (trajectories[i][t].head(d_p) - trajectories[j][t].head(d_p)).norm();
        best = std::min(best, d);
      }
    }
  }
  return best;
}

/// Euclidean distance between the final position of a trajectory and the
/// reference terminal position.
inline double tracking_error(const std::vector<Vector>& trajectory,
                             const std::vector<Vector>& reference, int d_p) {
  if (trajectory.empty() || reference.empty())
    throw std::invalid_argument("tracking_error: empty trajectory");
  return (trajectory.back().head(d_p) - reference.back().head(d_p)).norm();
}

}  // namespace turboadmm::oracle
