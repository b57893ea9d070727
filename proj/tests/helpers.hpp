#pragma once

#include <random>
#include <vector>

#include "turboadmm/model.hpp"
#include "turboadmm/qp.hpp"
#include "turboadmm/riccati.hpp"

namespace turboadmm::testing {

/// Test-side assembly of the equality-constrained trajectory QP from stage
/// costs, independent of the production assembly path. Variables are
/// [x_0..x_T, u_0..u_{T-1}]; equality block t states the constraint that
/// defines x_t (initial condition for t=0, dynamics for t>=1).
inline QpData build_equality_qp(const std::vector<StageCost>& stages, const Matrix& A,
                                const Matrix& B, const Vector& x_init) {
  const int T = static_cast<int>(stages.size()) - 1;
  const int n_x = static_cast<int>(A.rows());
  const int n_u = static_cast<int>(B.cols());
  const int n = (T + 1) * n_x + T * n_u;
  const int m = (T + 1) * n_x;
  const int u_off = (T + 1) * n_x;

  QpData qp;
  qp.H = Matrix::Zero(n, n);
  qp.g = Vector::Zero(n);
  for (int t = 0; t <= T; ++t) {
    qp.H.block(t * n_x, t * n_x, n_x, n_x) = stages[t].Q_bar;
    qp.g.segment(t * n_x, n_x) = stages[t].q;
  }
  for (int t = 0; t < T; ++t) {
    qp.H.block(u_off + t * n_u, u_off + t * n_u, n_u, n_u) = stages[t].R_bar;
    qp.g.segment(u_off + t * n_u, n_u) = stages[t].r;
  }

  qp.A_eq = Matrix::Zero(m, n);
  qp.b_eq = Vector::Zero(m);
  qp.A_eq.block(0, 0, n_x, n_x) = -Matrix::Identity(n_x, n_x);
  qp.b_eq.head(n_x) = -x_init;
  for (int t = 1; t <= T; ++t) {
    qp.A_eq.block(t * n_x, (t - 1) * n_x, n_x, n_x) = A;
    qp.A_eq.block(t * n_x, t * n_x, n_x, n_x) = -Matrix::Identity(n_x, n_x);
    qp.A_eq.block(t * n_x, u_off + (t - 1) * n_u, n_x, n_u) = B;
  }
  qp.lb = Vector::Constant(n, -kInfiniteBound);
  qp.ub = Vector::Constant(n, kInfiniteBound);
  return qp;
}

inline Matrix random_matrix(std::mt19937& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  return Matrix::NullaryExpr(rows, cols, [&] { return dist(rng); });
}

inline Vector random_vector(std::mt19937& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  return Vector::NullaryExpr(n, [&] { return dist(rng); });
}

inline Matrix random_psd(std::mt19937& rng, int n) {
  Matrix M = random_matrix(rng, n, n, 0.7);
  return M.transpose() * M;
}

inline Matrix random_pd(std::mt19937& rng, int n) {
  return random_psd(rng, n) + Matrix::Identity(n, n);
}

/// Random agent of small dimension for the Riccati oracle-equivalence
/// suites; bounds are infinite so the equality relaxation is the actual
/// optimum.
inline AgentModel random_agent(std::mt19937& rng, int n_x, int n_u, int d_p, int T) {
  AgentModel a;
  a.A = random_matrix(rng, n_x, n_x, 0.5);
  a.B = random_matrix(rng, n_x, n_u, 0.8);
  a.Q = random_psd(rng, n_x);
  a.R = random_pd(rng, n_u);
  a.Q_T = random_psd(rng, n_x);
  // full-row-rank position selector
  while (true) {
    a.C = random_matrix(rng, d_p, n_x);
    if (Eigen::FullPivLU<Matrix>(a.C).rank() == d_p) break;
  }
  a.x_init = random_vector(rng, n_x);
  a.x_ref.resize(static_cast<size_t>(T) + 1);
  for (auto& r : a.x_ref) r = random_vector(rng, n_x);
  a.x_lb = Vector::Constant(n_x, -kInfiniteBound);
  a.x_ub = Vector::Constant(n_x, kInfiniteBound);
  a.u_lb = Vector::Constant(n_u, -kInfiniteBound);
  a.u_ub = Vector::Constant(n_u, kInfiniteBound);
  return a;
}

inline std::vector<PairSlice> random_slices(std::mt19937& rng, int neighbors, int d_p,
                                            int window_len) {
  std::vector<PairSlice> slices(static_cast<size_t>(neighbors));
  for (PairSlice& s : slices) {
    s.z.resize(static_cast<size_t>(window_len));
    s.lambda.resize(static_cast<size_t>(window_len));
    for (int t = 0; t < window_len; ++t) {
      s.z[t] = random_vector(rng, d_p, 2.0);
      s.lambda[t] = random_vector(rng, d_p, 1.0);
    }
  }
  return slices;
}

}  // namespace turboadmm::testing
