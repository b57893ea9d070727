#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "turboadmm/model.hpp"

namespace turboadmm {

/// Quadratic stage cost of the consensus-augmented local problem,
///   1/2 x'Q_bar x + q'x + 1/2 u'R_bar u + r'u,
/// for one timestep. The terminal stage carries only the state part.
struct StageCost {
  Matrix Q_bar;
  Vector q;
  Matrix R_bar;  // empty at the terminal stage
  Vector r;
};

/// Consensus data of one neighbor pair as seen by one agent: the target z
/// and scaled dual lambda for every time in the consensus window
/// [window_begin, T].
struct PairSlice {
  std::vector<Vector> z;
  std::vector<Vector> lambda;
};

/// Output of the affine LQR sweep: feedback gains, value-function
/// parameters, the rolled-out primal trajectory, and the equality duals.
///
/// nu has T+1 entries and follows the convention of the assembled per-agent
/// QP, where row block t states "expression defining x_t minus x_t = 0"
/// (the initial condition for t=0, the dynamics for t>=1). Under the
/// Lagrangian L = f + nu'(residual), the dual of block t equals the value
/// function gradient: nu[t] = P_t x_t + p_t.
struct RiccatiSolution {
  std::vector<Matrix> K;  // T gains, n_u x n_x
  std::vector<Vector> k;  // T feedforwards
  std::vector<Matrix> P;  // T+1 value Hessians
  std::vector<Vector> p;  // T+1 value gradients
  std::vector<Vector> x_warm;  // T+1 states
  std::vector<Vector> u_warm;  // T inputs
  std::vector<Vector> nu;      // T+1 equality duals, see above
};

struct RiccatiGains {
  std::vector<Matrix> K;
  std::vector<Vector> k;
  std::vector<Matrix> P;
  std::vector<Vector> p;
};

/// Expands the agent objective plus the consensus penalty
///   sum_j sum_t (rho/2) ||C x_t - z + lambda/rho||^2
/// into per-stage quadratic and linear terms: rho C'C per neighbor on the
/// quadratic side and C'(lambda - rho z) on the linear side, on top of the
/// tracking terms -Q x_ref. Minimizing the result over the horizon is
/// identical to the local objective up to an additive constant.
///
/// input_prox_weight adds w*I to R_bar; it is zero by default so the
/// warmstart solves exactly the equality relaxation of the QP handed to the
/// active-set kernel.
inline std::vector<StageCost> build_stage_costs(const AgentModel& agent,
                                                std::span<const PairSlice> consensus,
                                                double rho, int T, int window_begin = 1,
                                                double input_prox_weight = 0.0) {
  if (rho < 0.0) throw std::invalid_argument("build_stage_costs: rho must be nonnegative");
  if (window_begin != 0 && window_begin != 1)
    throw std::invalid_argument("build_stage_costs: window must start at t=0 or t=1");
  const int n_u = agent.input_dim();
  const int d_p = agent.position_dim();
  const size_t window_len = static_cast<size_t>(T - window_begin + 1);
  for (const PairSlice& s : consensus) {
    if (s.z.size() != window_len || s.lambda.size() != window_len)
      throw std::invalid_argument("build_stage_costs: consensus slice length mismatch");
    for (size_t t = 0; t < window_len; ++t)
      if (s.z[t].size() != d_p || s.lambda[t].size() != d_p)
        throw std::invalid_argument("build_stage_costs: consensus entry dimension mismatch");
  }

  const Matrix penalty_quad = rho * agent.C.transpose() * agent.C;
  const Matrix R_bar = agent.R + input_prox_weight * Matrix::Identity(n_u, n_u);

  std::vector<StageCost> stages(static_cast<size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    StageCost& st = stages[static_cast<size_t>(t)];
    const Matrix& Q_t = t == T ? agent.Q_T : agent.Q;
    st.Q_bar = Q_t;
    st.q = -(Q_t * agent.x_ref[static_cast<size_t>(t)]);
    if (t >= window_begin && !consensus.empty()) {
      st.Q_bar += static_cast<double>(consensus.size()) * penalty_quad;
      Vector lin = Vector::Zero(d_p);
      for (const PairSlice& s : consensus) {
        const size_t w = static_cast<size_t>(t - window_begin);
        lin += s.lambda[w] - rho * s.z[w];
      }
      st.q += agent.C.transpose() * lin;
    }
    if (t < T) {
      st.R_bar = R_bar;
      st.r = Vector::Zero(n_u);
    }
  }
  return stages;
}

/// Backward Riccati sweep producing stage gains and value-function
/// parameters for the equality-constrained relaxation (bounds dropped).
/// Value Hessians are symmetrized every stage to suppress drift.
inline RiccatiGains backward_pass(const std::vector<StageCost>& stages, const Matrix& A,
                                  const Matrix& B) {
  const int T = static_cast<int>(stages.size()) - 1;
  if (T < 1) throw std::invalid_argument("backward_pass: need at least one step");

  RiccatiGains out;
  out.K.resize(static_cast<size_t>(T));
  out.k.resize(static_cast<size_t>(T));
  out.P.resize(static_cast<size_t>(T) + 1);
  out.p.resize(static_cast<size_t>(T) + 1);

  out.P[static_cast<size_t>(T)] = 0.5 * (stages.back().Q_bar + stages.back().Q_bar.transpose());
  out.p[static_cast<size_t>(T)] = stages.back().q;

  for (int t = T - 1; t >= 0; --t) {
    const Matrix& P_next = out.P[static_cast<size_t>(t) + 1];
    const Vector& p_next = out.p[static_cast<size_t>(t) + 1];
    const StageCost& st = stages[static_cast<size_t>(t)];

    const Matrix S = st.R_bar + B.transpose() * P_next * B;
    const Matrix M = B.transpose() * P_next * A;
    const Vector s = st.r + B.transpose() * p_next;

    Eigen::LLT<Matrix> chol(0.5 * (S + S.transpose()));
    if (chol.info() != Eigen::Success)
      throw std::runtime_error("backward_pass: input Hessian not positive definite at stage " +
                               std::to_string(t));
    const Vector d = chol.matrixL().toDenseMatrix().diagonal();
    if (d.minCoeff() * d.minCoeff() < 1e-14 * d.maxCoeff() * d.maxCoeff())
      throw std::runtime_error("backward_pass: input Hessian ill-conditioned at stage " +
                               std::to_string(t));

    out.K[static_cast<size_t>(t)] = -chol.solve(M);
    out.k[static_cast<size_t>(t)] = -chol.solve(s);

    Matrix P = st.Q_bar + A.transpose() * P_next * A + M.transpose() * out.K[static_cast<size_t>(t)];
    out.P[static_cast<size_t>(t)] = 0.5 * (P + P.transpose());
    out.p[static_cast<size_t>(t)] =
        st.q + A.transpose() * p_next + M.transpose() * out.k[static_cast<size_t>(t)];
  }
  return out;
}

/// Rolls the affine policy u_t = K_t x_t + k_t forward from x_init. The
/// result satisfies the dynamics exactly but may violate box bounds.
inline std::pair<std::vector<Vector>, std::vector<Vector>> forward_pass(const RiccatiGains& gains,
                                                                        const Matrix& A,
                                                                        const Matrix& B,
                                                                        const Vector& x_init) {
  const size_t T = gains.K.size();
  std::vector<Vector> x(T + 1), u(T);
  x[0] = x_init;
  for (size_t t = 0; t < T; ++t) {
    u[t] = gains.K[t] * x[t] + gains.k[t];
    x[t + 1] = A * x[t] + B * u[t];
  }
  return {std::move(x), std::move(u)};
}

/// Equality duals along the warmstart trajectory: nu[t] = P_t x_t + p_t.
inline std::vector<Vector> costates(const std::vector<Matrix>& P, const std::vector<Vector>& p,
                                    const std::vector<Vector>& x_warm) {
  if (P.size() != p.size() || P.size() != x_warm.size())
    throw std::invalid_argument("costates: inconsistent lengths");
  std::vector<Vector> nu(P.size());
  for (size_t t = 0; t < P.size(); ++t) nu[t] = P[t] * x_warm[t] + p[t];
  return nu;
}

/// Full primal-dual warmstart for one agent's consensus-augmented QP with
/// the inequality constraints dropped: backward sweep, forward rollout,
/// costate evaluation. Cost is linear in the horizon.
inline RiccatiSolution affine_lqr(const std::vector<StageCost>& stages, const Matrix& A,
                                  const Matrix& B, const Vector& x_init) {
  RiccatiGains gains = backward_pass(stages, A, B);
  auto [x_warm, u_warm] = forward_pass(gains, A, B, x_init);
  RiccatiSolution sol;
  sol.nu = costates(gains.P, gains.p, x_warm);
  sol.K = std::move(gains.K);
  sol.k = std::move(gains.k);
  sol.P = std::move(gains.P);
  sol.p = std::move(gains.p);
  sol.x_warm = std::move(x_warm);
  sol.u_warm = std::move(u_warm);
  return sol;
}

}  // namespace turboadmm
