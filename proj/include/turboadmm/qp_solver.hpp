#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "turboadmm/qp.hpp"

namespace turboadmm {

/// Active-set solver for dense strictly convex QPs with equality
/// constraints and variable bounds.
///
/// The base KKT matrix [H A'; A 0] is factorized once at construction and
/// that factorization is reused by every solve on this handle. The working
/// set of bounds held as equalities enters through the Schur complement
/// S = E K0^-1 E' (symmetric positive definite while the working set stays
/// linearly independent). Its Cholesky factor grows by one triangular solve
/// per bound addition; removals refactorize the small Schur block only.
///
/// Every solve runs a primal-dual homotopy: the start point is made optimal
/// for auxiliary data (gradient, equality rhs, bounds), which then moves
/// linearly to the requested data with working-set changes at the
/// breakpoints of the path. A warm-start point that violates bounds is
/// admitted by widening the auxiliary bounds around it; the violated
/// coordinates enter the working set and ride their bounds back to the true
/// values. `iterations` counts bound additions plus removals under the same
/// definition in cold, warm and hot solves; ratio-test ties break toward
/// the lowest variable index.
///
/// A handle must not be used from two threads at once; distinct handles are
/// fully independent.
class QpSolver {
 public:
  struct Settings {
    double tol = 1e-8;  // stationarity/feasibility target of a solve
    int max_iter = 0;   // working-set change budget, 0 means 10*(n+m)
  };

  explicit QpSolver(QpData data) : QpSolver(std::move(data), Settings()) {}

  QpSolver(QpData data, Settings settings) : data_(std::move(data)), settings_(settings) {
    n_ = data_.num_vars();
    m_ = data_.num_eq();
    if (data_.g.size() != n_ || data_.lb.size() != n_ || data_.ub.size() != n_ ||
        data_.b_eq.size() != m_ || (m_ > 0 && data_.A_eq.cols() != n_))
      throw std::invalid_argument("QpSolver: dimension mismatch in QpData");
    if ((data_.lb.array() > data_.ub.array()).any())
      throw std::invalid_argument("QpSolver: lb exceeds ub");
    const double asym = (data_.H - data_.H.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) throw std::invalid_argument("QpSolver: H asymmetric beyond 1e-10");
    data_.H = 0.5 * (data_.H + data_.H.transpose()).eval();
    {
      // rank check, then definiteness of the reduced Hessian Z'HZ on the
      // null space of A_eq (the uniqueness condition for the minimizer)
      Matrix Z;
      if (m_ > 0) {
        Eigen::ColPivHouseholderQR<Matrix> qr(data_.A_eq.transpose());
        if (qr.rank() < m_) throw std::invalid_argument("QpSolver: A_eq is rank deficient");
        Z = Matrix(qr.householderQ()).rightCols(n_ - m_);
      } else {
        Z = Matrix::Identity(n_, n_);
      }
      if (Z.cols() > 0) {
        const Matrix reduced = Z.transpose() * data_.H * Z;
        Eigen::LLT<Matrix> llt(0.5 * (reduced + reduced.transpose()));
        if (llt.info() != Eigen::Success)
          throw std::invalid_argument(
              "QpSolver: H is not positive definite on the null space of A_eq");
      }
    }

    Matrix K0 = Matrix::Zero(n_ + m_, n_ + m_);
    K0.topLeftCorner(n_, n_) = data_.H;
    if (m_ > 0) {
      K0.topRightCorner(n_, m_) = data_.A_eq.transpose();
      K0.bottomLeftCorner(m_, n_) = data_.A_eq;
    }
    lu_.compute(K0);
    if (lu_.rcond() < 1e-14)
      throw std::invalid_argument(
          "QpSolver: base KKT matrix numerically singular (H must be positive definite on the "
          "null space of A_eq)");

    for (int j = 0; j < n_; ++j)
      if (data_.lb[j] == data_.ub[j]) fixed_.push_back(j);
  }

  const QpData& data() const { return data_; }
  Settings& settings() { return settings_; }
  bool has_solution() const { return has_solution_; }
  const std::vector<int>& working_set() const { return work_idx_; }

  /// Cold start: zero vector clipped onto the bounds, zero duals, working
  /// set holding only fixed (lb == ub) variables.
  QpSolution solve_cold() {
    reset_working_set({});
    Vector x = Vector::Zero(n_);
    for (int j = 0; j < n_; ++j) x[j] = std::min(std::max(x[j], data_.lb[j]), data_.ub[j]);
    return run_homotopy(x, Vector::Zero(m_), Vector::Zero(n_), data_.g, data_.lb, data_.ub);
  }

  /// Warm start from an external primal-dual point. Coordinates of x0 that
  /// violate or touch a bound seed the initial working set; bound duals
  /// with a sign inconsistent with their side are zeroed. Violating
  /// coordinates are brought back by the bound homotopy, so a start that
  /// satisfies the equalities pays only for genuine working-set changes.
  QpSolution solve_warm(const Vector& x0, const Vector& nu0, const Vector& mu0) {
    if (x0.size() != n_ || nu0.size() != m_ || mu0.size() != n_)
      throw std::invalid_argument("solve_warm: dimension mismatch");
    std::vector<std::pair<int, int>> seed;
    Vector x = x0;
    Vector lb_start = data_.lb;
    Vector ub_start = data_.ub;
    for (int j = 0; j < n_; ++j) {
      if (data_.lb[j] == data_.ub[j]) {  // held as fixed from the start
        x[j] = data_.lb[j];
        continue;
      }
      const double span = std::max(1.0, std::abs(x[j]));
      if (is_finite_bound(data_.ub[j]) && x[j] - data_.ub[j] >= -kSnapTol * span) {
        if (x[j] <= data_.ub[j]) x[j] = data_.ub[j];
        ub_start[j] = std::max(data_.ub[j], x[j]);
        seed.emplace_back(j, +1);
      } else if (is_finite_bound(data_.lb[j]) && x[j] - data_.lb[j] <= kSnapTol * span) {
        if (x[j] >= data_.lb[j]) x[j] = data_.lb[j];
        lb_start[j] = std::min(data_.lb[j], x[j]);
        seed.emplace_back(j, -1);
      }
    }
    reset_working_set(seed);
    // Seeded bounds start with strictly positive duals (the auxiliary
    // gradient absorbs them), so the homotopy never begins at the
    // degenerate zero-dual-on-bound corner that causes pivot churn. Valid
    // caller-provided duals above the ramp are kept as-is.
    Vector mu = Vector::Zero(n_);
    for (size_t s = 0; s < work_idx_.size(); ++s) {
      const int j = work_idx_[s];
      if (work_side_[s] == 0) continue;
      mu[j] = work_side_[s] * std::max(work_side_[s] * mu0[j], kRampDual);
    }
    return run_homotopy(x, nu0, mu, data_.g, lb_start, ub_start);
  }

  /// Re-poses the problem with a new linear term without touching solver
  /// state; the next solve_cold or solve_warm targets it. Hot solves take
  /// the new gradient directly instead.
  void set_gradient(const Vector& g_new) {
    if (g_new.size() != n_) throw std::invalid_argument("set_gradient: dimension mismatch");
    data_.g = g_new;
  }

  /// Hot start: re-solve with a new linear term starting from the previous
  /// solution, its working set and the cached factorizations. Only the
  /// homotopy in g runs; nothing is refactorized unless the working set
  /// changes along the way.
  QpSolution solve_hot(const Vector& g_new) {
    if (!has_solution_)
      throw std::logic_error("solve_hot: no prior successful solve on this handle");
    if (g_new.size() != n_) throw std::invalid_argument("solve_hot: gradient dimension mismatch");
    return run_homotopy(x_, nu_, mu_, g_new, data_.lb, data_.ub);
  }

 private:
  static constexpr double kSnapTol = 1e-9;
  static constexpr double kDirTol = 1e-11;
  static constexpr double kTieTol = 1e-14;
  static constexpr double kRampDual = 1.0;

  QpData data_;
  Settings settings_;
  int n_ = 0, m_ = 0;
  Eigen::PartialPivLU<Matrix> lu_;
  std::vector<int> fixed_;

  // working set state
  std::vector<int> work_idx_;
  std::vector<int> work_side_;    // +1 upper, -1 lower, 0 fixed
  std::vector<int> slot_of_var_;  // -1 when not working
  Matrix V_;  // (n+m) x w, columns K0^-1 [e_j; 0]
  Matrix S_;  // w x w Schur complement E V
  Matrix L_;  // lower Cholesky factor of S_

  // last successful solution
  bool has_solution_ = false;
  Vector x_, nu_, mu_;

  int max_iter() const { return settings_.max_iter > 0 ? settings_.max_iter : 10 * (n_ + m_); }

  Vector schur_solve(const Vector& r) const {
    const int w = static_cast<int>(work_idx_.size());
    Vector y = L_.topLeftCorner(w, w).triangularView<Eigen::Lower>().solve(r);
    return L_.topLeftCorner(w, w).triangularView<Eigen::Lower>().transpose().solve(y);
  }

  // Appends bound j; returns false (leaving all state untouched) when e_j is
  // linearly dependent on the equalities plus the current working set.
  bool try_add(int j, int side) {
    const int w = static_cast<int>(work_idx_.size());
    Vector ej = Vector::Zero(n_ + m_);
    ej[j] = 1.0;
    Vector v = lu_.solve(ej);

    Vector s_col(w);
    for (int k = 0; k < w; ++k) s_col[k] = v[work_idx_[k]];
    const double diag = v[j];

    Vector l(w);
    double pivot = diag;
    if (w > 0) {
      l = L_.topLeftCorner(w, w).triangularView<Eigen::Lower>().solve(s_col);
      pivot = diag - l.squaredNorm();
    }
    if (pivot <= 1e-10 * std::max(std::abs(diag), 1e-30)) return false;

    V_.conservativeResize(n_ + m_, w + 1);
    V_.col(w) = v;
    S_.conservativeResize(w + 1, w + 1);
    L_.conservativeResize(w + 1, w + 1);
    for (int k = 0; k < w; ++k) {
      S_(k, w) = s_col[k];
      S_(w, k) = s_col[k];
      L_(k, w) = 0.0;
      L_(w, k) = l[k];
    }
    S_(w, w) = diag;
    L_(w, w) = std::sqrt(pivot);

    work_idx_.push_back(j);
    work_side_.push_back(side);
    slot_of_var_[j] = w;
    return true;
  }

  void remove_slot(int slot) {
    const int w = static_cast<int>(work_idx_.size());
    slot_of_var_[work_idx_[slot]] = -1;
    for (int k = slot; k + 1 < w; ++k) {
      work_idx_[k] = work_idx_[k + 1];
      work_side_[k] = work_side_[k + 1];
      slot_of_var_[work_idx_[k]] = k;
      V_.col(k) = V_.col(k + 1);
    }
    work_idx_.pop_back();
    work_side_.pop_back();
    V_.conservativeResize(n_ + m_, w - 1);
    for (int r = slot; r + 1 < w; ++r) S_.row(r) = S_.row(r + 1);
    for (int c = slot; c + 1 < w; ++c) S_.col(c) = S_.col(c + 1);
    S_.conservativeResize(w - 1, w - 1);
    if (w > 1) {
      Eigen::LLT<Matrix> llt(S_);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("QpSolver: Schur complement lost positive definiteness");
      L_ = llt.matrixL();
    } else {
      L_.resize(0, 0);
    }
  }

  void reset_working_set(const std::vector<std::pair<int, int>>& seed) {
    work_idx_.clear();
    work_side_.clear();
    slot_of_var_.assign(static_cast<size_t>(n_), -1);
    V_.resize(n_ + m_, 0);
    S_.resize(0, 0);
    L_.resize(0, 0);
    for (int j : fixed_) try_add(j, 0);  // dependent fixed bounds are implied by the equalities
    for (auto [j, side] : seed)
      if (slot_of_var_[j] < 0) try_add(j, side);
  }

  // Solves [K0 E'; E 0] [x; nu; mu] = [r_top; c] at the current working set.
  std::pair<Vector, Vector> bordered_solve(const Vector& neg_grad, const Vector& rhs_eq,
                                           const Vector& c_work, Vector& mu_slots) const {
    Vector r(n_ + m_);
    r.head(n_) = neg_grad;
    if (m_ > 0) r.tail(m_) = rhs_eq;
    Vector w0 = lu_.solve(r);
    const int w = static_cast<int>(work_idx_.size());
    if (w == 0) {
      mu_slots.resize(0);
      return {w0.head(n_), w0.tail(m_)};
    }
    Vector resid(w);
    for (int k = 0; k < w; ++k) resid[k] = w0[work_idx_[k]] - c_work[k];
    mu_slots = schur_solve(resid);
    Vector sol = w0 - V_.leftCols(w) * mu_slots;
    return {sol.head(n_), sol.tail(m_)};
  }

  QpSolution make_solution(QpStatus status, const Vector& x, const Vector& nu, const Vector& mu,
                           int iterations) const {
    QpSolution s;
    s.x = x;
    s.nu = nu;
    s.mu = mu;
    s.working_set = work_idx_;
    std::sort(s.working_set.begin(), s.working_set.end());
    s.status = status;
    s.iterations = iterations;
    return s;
  }

  // Moves (g, b, lb, ub) linearly from the auxiliary values implied by the
  // start point to the stored problem data. The primal-dual solution of the
  // running working set is tracked along the way; the working set changes
  // at each breakpoint.
  QpSolution run_homotopy(Vector x, Vector nu, Vector mu, const Vector& g_target,
                          Vector lb_cur, Vector ub_cur) {
    has_solution_ = false;

    // Auxiliary data for which (x, nu, mu) is optimal by construction.
    Vector g_cur = -(data_.H * x + mu);
    if (m_ > 0) g_cur -= data_.A_eq.transpose() * nu;
    Vector b_cur = m_ > 0 ? Vector(data_.A_eq * x) : Vector();

    int iterations = 0;
    const int budget = max_iter();

    while (true) {
      const Vector dg = g_target - g_cur;
      const Vector db = m_ > 0 ? Vector(data_.b_eq - b_cur) : Vector();
      const Vector dlb = data_.lb - lb_cur;
      const Vector dub = data_.ub - ub_cur;

      const int w = static_cast<int>(work_idx_.size());
      Vector dc(w);  // working bounds ride toward their target values
      for (int k = 0; k < w; ++k)
        dc[k] = work_side_[k] > 0 ? dub[work_idx_[k]]
                                  : (work_side_[k] < 0 ? dlb[work_idx_[k]] : 0.0);

      Vector dmu_slots;
      auto [dx, dnu] = bordered_solve(-dg, db, dc, dmu_slots);

      const double dx_scale = std::max(1.0, n_ > 0 ? dx.cwiseAbs().maxCoeff() : 0.0);
      const double dmu_scale = std::max(1.0, w > 0 ? dmu_slots.cwiseAbs().maxCoeff() : 0.0);

      // Ratio test: first blocking bound or first working dual crossing zero,
      // lowest variable index on ties.
      double alpha = 1.0;
      int pick_var = -1;
      int pick_side = 0;
      bool pick_is_removal = false;
      auto consider = [&](double a, int var, int side, bool removal) {
        a = std::max(a, 0.0);
        if (a >= 1.0 - kTieTol) return;  // breakpoint at the target itself needs no change
        if (a > alpha + kTieTol) return;
        if (a < alpha - kTieTol || pick_var < 0 || var < pick_var) {
          alpha = std::min(alpha, a);
          pick_var = var;
          pick_side = side;
          pick_is_removal = removal;
        }
      };

      for (int j = 0; j < n_; ++j) {
        if (slot_of_var_[j] >= 0) continue;
        // relative motion of the variable against its (possibly moving) bound
        if (is_finite_bound(data_.ub[j])) {
          const double rel = dx[j] - dub[j];
          if (rel > kDirTol * dx_scale) consider((ub_cur[j] - x[j]) / rel, j, +1, false);
        }
        if (is_finite_bound(data_.lb[j])) {
          const double rel = dx[j] - dlb[j];
          if (rel < -kDirTol * dx_scale) consider((lb_cur[j] - x[j]) / rel, j, -1, false);
        }
      }
      for (int k = 0; k < w; ++k) {
        if (work_side_[k] == 0) continue;  // fixed variables never leave
        const double rate = work_side_[k] * dmu_slots[k];
        if (rate < -kDirTol * dmu_scale) {
          const double eta = work_side_[k] * mu[work_idx_[k]];
          consider(eta / (-rate), work_idx_[k], work_side_[k], true);
        }
      }

      x += alpha * dx;
      if (m_ > 0) nu += alpha * dnu;
      for (int k = 0; k < w; ++k) mu[work_idx_[k]] += alpha * dmu_slots[k];
      g_cur += alpha * dg;
      if (m_ > 0) b_cur += alpha * db;
      lb_cur += alpha * dlb;
      ub_cur += alpha * dub;
      for (int k = 0; k < w; ++k)  // riding coordinates stay exactly on their bounds
        if (work_side_[k] != 0)
          x[work_idx_[k]] = work_side_[k] > 0 ? ub_cur[work_idx_[k]] : lb_cur[work_idx_[k]];

      if (pick_var < 0) break;  // reached the target data

      if (iterations >= budget) return make_solution(QpStatus::max_iter, x, nu, mu, iterations);

      if (pick_is_removal) {
        mu[pick_var] = 0.0;
        remove_slot(slot_of_var_[pick_var]);
        ++iterations;
        continue;
      }

      x[pick_var] = pick_side > 0 ? ub_cur[pick_var] : lb_cur[pick_var];  // land on the bound
      if (try_add(pick_var, pick_side)) {
        mu[pick_var] = 0.0;
        ++iterations;
        continue;
      }

      // Blocking bound linearly dependent on the equalities plus the working
      // set: exchange it against the working bound whose dual reaches zero
      // first. No candidate means the constraint set is inconsistent.
      const QpStatus ex = exchange_dependent(pick_var, pick_side, nu, mu);
      if (ex != QpStatus::optimal) return make_solution(ex, x, nu, mu, iterations);
      iterations += 2;
    }

    // Polish: one clean solve at the final working set removes the drift
    // accumulated over the homotopy segments.
    const int w = static_cast<int>(work_idx_.size());
    Vector c_work(w);
    for (int k = 0; k < w; ++k)
      c_work[k] = work_side_[k] > 0 ? data_.ub[work_idx_[k]] : data_.lb[work_idx_[k]];
    Vector mu_slots;
    auto [x_fin, nu_fin] = bordered_solve(-g_target, data_.b_eq, c_work, mu_slots);
    Vector mu_fin = Vector::Zero(n_);
    for (int k = 0; k < w; ++k) {
      x_fin[work_idx_[k]] = c_work[k];
      mu_fin[work_idx_[k]] = mu_slots[k];
    }

    data_.g = g_target;
    x_ = x_fin;
    nu_ = nu_fin;
    mu_ = mu_fin;
    has_solution_ = true;
    return make_solution(QpStatus::optimal, x_fin, nu_fin, mu_fin, iterations);
  }

  QpStatus exchange_dependent(int j, int side, Vector& nu, Vector& mu) {
    const int w = static_cast<int>(work_idx_.size());
    // Represent e_j = A_eq' a + sum_k coef_k e_{w_k}; consistent by dependence.
    Matrix basis(n_, m_ + w);
    if (m_ > 0) basis.leftCols(m_) = data_.A_eq.transpose();
    for (int k = 0; k < w; ++k) {
      basis.col(m_ + k).setZero();
      basis(work_idx_[k], m_ + k) = 1.0;
    }
    Vector ej = Vector::Zero(n_);
    ej[j] = 1.0;
    Eigen::ColPivHouseholderQR<Matrix> qr(basis);
    Vector coef = qr.solve(ej);
    if ((basis * coef - ej).cwiseAbs().maxCoeff() > 1e-8)
      return QpStatus::ill_conditioned;  // marginal dependence, cannot resolve reliably

    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (int k = 0; k < w; ++k) {
      if (work_side_[k] == 0) continue;  // fixed variables cannot leave
      const double denom = side * work_side_[k] * coef[m_ + k];
      if (denom <= kDirTol) continue;
      const double t = std::max(work_side_[k] * mu[work_idx_[k]], 0.0) / denom;
      const bool better = t < theta - kTieTol;
      const bool tie_lower_index = t <= theta + kTieTol && leave >= 0 && work_idx_[k] < work_idx_[leave];
      if (leave < 0 || better || tie_lower_index) {
        theta = std::min(theta, t);
        leave = k;
      }
    }
    if (leave < 0) return QpStatus::infeasible;

    if (m_ > 0) nu -= theta * side * coef.head(m_);
    for (int k = 0; k < w; ++k) mu[work_idx_[k]] -= theta * side * coef[m_ + k];
    mu[work_idx_[leave]] = 0.0;
    remove_slot(leave);
    if (!try_add(j, side)) return QpStatus::ill_conditioned;
    mu[j] = theta * side;
    return QpStatus::optimal;
  }
};

}  // namespace turboadmm
