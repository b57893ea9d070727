#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace turboadmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One agent's linear dynamics, quadratic tracking costs, box bounds and
/// reference trajectory. Immutable after construction; safe to share across
/// threads.
struct AgentModel {
  Matrix A;  // state transition, n_x x n_x
  Matrix B;  // input matrix, n_x x n_u
  Matrix Q;  // stage state weight (PSD)
  Matrix R;  // stage input weight (PD)
  Matrix Q_T;  // terminal state weight (PSD)
  Matrix C;  // position selector, d_p x n_x, full row rank
  Vector x_init;
  std::vector<Vector> x_ref;  // length T+1
  Vector x_lb, x_ub;
  Vector u_lb, u_ub;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  int position_dim() const { return static_cast<int>(C.rows()); }

  void validate(int horizon) const;
};

/// A full problem instance: N agents over a shared horizon.
struct Scenario {
  std::vector<AgentModel> agents;
  int horizon = 0;   // T, number of steps
  double dt = 1.0;   // seconds
  double d_safe = 0.0;  // minimum pairwise center separation, meters

  int num_agents() const { return static_cast<int>(agents.size()); }

  void validate() const;
};

struct ProblemDimensions {
  long num_variables = 0;
  long num_dynamics_constraints = 0;
  long num_collision_pair_steps = 0;
};

/// Scalar cost weights used by the benchmark scenario generator. Q acts on
/// positions only (velocities unweighted), R on all inputs, Q_T on terminal
/// positions. The defaults are tuned so the benchmark scenarios converge
/// well inside the iteration cap at the fixed penalty rho = 25; only the
/// ratio of the weights to rho matters for the iteration path.
struct CostWeights {
  double q_pos = 6.0;
  double r_input = 0.6;
  double q_terminal = 60.0;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline bool is_symmetric(const Matrix& M, double tol = 1e-10) {
  return M.rows() == M.cols() && (M - M.transpose()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace detail

inline void AgentModel::validate(int horizon) const {
  const int n_x = state_dim();
  const int n_u = input_dim();
  const int d_p = position_dim();
  detail::require(A.rows() == n_x && A.cols() == n_x, "AgentModel: A must be square n_x x n_x");
  detail::require(B.rows() == n_x, "AgentModel: B row count must equal n_x");
  detail::require(Q.rows() == n_x && Q.cols() == n_x, "AgentModel: Q dimension mismatch");
  detail::require(R.rows() == n_u && R.cols() == n_u, "AgentModel: R dimension mismatch");
  detail::require(Q_T.rows() == n_x && Q_T.cols() == n_x, "AgentModel: Q_T dimension mismatch");
  detail::require(C.cols() == n_x, "AgentModel: C column count must equal n_x");
  detail::require(detail::is_symmetric(Q), "AgentModel: Q must be symmetric");
  detail::require(detail::is_symmetric(R), "AgentModel: R must be symmetric");
  detail::require(detail::is_symmetric(Q_T), "AgentModel: Q_T must be symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> eq(Q, Eigen::EigenvaluesOnly);
  detail::require(eq.eigenvalues().minCoeff() >= -1e-10, "AgentModel: Q must be PSD");
  Eigen::SelfAdjointEigenSolver<Matrix> eqt(Q_T, Eigen::EigenvaluesOnly);
  detail::require(eqt.eigenvalues().minCoeff() >= -1e-10, "AgentModel: Q_T must be PSD");
  Eigen::SelfAdjointEigenSolver<Matrix> er(R, Eigen::EigenvaluesOnly);
  detail::require(er.eigenvalues().minCoeff() > 0.0, "AgentModel: R must be PD");

  detail::require(Eigen::FullPivLU<Matrix>(C).rank() == d_p, "AgentModel: C must have full row rank");

  detail::require(x_init.size() == n_x, "AgentModel: x_init dimension mismatch");
  detail::require(x_lb.size() == n_x && x_ub.size() == n_x, "AgentModel: state bound dimension mismatch");
  detail::require(u_lb.size() == n_u && u_ub.size() == n_u, "AgentModel: input bound dimension mismatch");
  detail::require((x_lb.array() <= x_ub.array()).all(), "AgentModel: x_lb must not exceed x_ub");
  detail::require((u_lb.array() <= u_ub.array()).all(), "AgentModel: u_lb must not exceed u_ub");
  detail::require((x_init.array() >= x_lb.array()).all() && (x_init.array() <= x_ub.array()).all(),
                  "AgentModel: x_init must lie within state bounds");

  detail::require(static_cast<int>(x_ref.size()) == horizon + 1,
                  "AgentModel: x_ref must have length T+1");
  for (const Vector& r : x_ref)
    detail::require(r.size() == n_x, "AgentModel: x_ref entry dimension mismatch");
}

inline void Scenario::validate() const {
  detail::require(horizon >= 1, "Scenario: horizon must be >= 1");
  detail::require(dt > 0.0, "Scenario: dt must be positive");
  detail::require(d_safe > 0.0, "Scenario: d_safe must be positive");
  detail::require(!agents.empty(), "Scenario: at least one agent required");
  const int d_p = agents.front().position_dim();
  for (const AgentModel& a : agents) {
    a.validate(horizon);
    detail::require(a.position_dim() == d_p, "Scenario: all agents must share the position dimension");
  }
}

/// Exact zero-order-hold discretization of a point mass driven by
/// acceleration. State ordering is [positions; velocities].
inline std::pair<Matrix, Matrix> double_integrator(double dt, int d_p) {
  detail::require(dt > 0.0, "double_integrator: dt must be positive");
  detail::require(d_p >= 1 && d_p <= 3, "double_integrator: d_p must be 1, 2 or 3");
  const int n_x = 2 * d_p;
  Matrix A = Matrix::Identity(n_x, n_x);
  A.topRightCorner(d_p, d_p) = dt * Matrix::Identity(d_p, d_p);
  Matrix B = Matrix::Zero(n_x, d_p);
  B.topRows(d_p) = 0.5 * dt * dt * Matrix::Identity(d_p, d_p);
  B.bottomRows(d_p) = dt * Matrix::Identity(d_p, d_p);
  return {A, B};
}

/// Constant-velocity reference from p_start (t=0) to p_goal (t=T).
/// States are [position; velocity] with velocity (p_goal - p_start)/(T*dt).
inline std::vector<Vector> straight_line_reference(const Vector& p_start, const Vector& p_goal,
                                                   int T, double dt) {
  detail::require(T >= 1, "straight_line_reference: T must be >= 1");
  detail::require(dt > 0.0, "straight_line_reference: dt must be positive");
  detail::require(p_start.size() == p_goal.size(), "straight_line_reference: dimension mismatch");
  const int d_p = static_cast<int>(p_start.size());
  const Vector velocity = (p_goal - p_start) / (T * dt);
  std::vector<Vector> ref(static_cast<size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    Vector x(2 * d_p);
    const double alpha = static_cast<double>(t) / T;
    x.head(d_p) = (1.0 - alpha) * p_start + alpha * p_goal;
    x.tail(d_p) = velocity;
    ref[static_cast<size_t>(t)] = x;
  }
  return ref;
}

/// N double-integrator agents evenly spaced on a circle, each tasked with
/// reaching the antipodal point, so every reference sweeps through the
/// center region. Box bounds cover twice the workspace radius; velocity
/// bounds allow 2.5x the reference cruise speed (the headroom agents need
/// to detour around each other without falling behind); the +-1 m/s^2
/// acceleration bounds saturate during avoidance maneuvers.
inline Scenario circle_scenario(int n_agents, double radius, int T, double dt, double d_safe,
                                CostWeights weights = {}) {
  detail::require(n_agents >= 1, "circle_scenario: need at least one agent");
  detail::require(radius > d_safe, "circle_scenario: radius must exceed d_safe (infeasible otherwise)");
  detail::require(T >= 1 && dt > 0.0 && d_safe > 0.0, "circle_scenario: invalid horizon parameters");

  const int d_p = 2;
  const int n_x = 2 * d_p;
  auto [A, B] = double_integrator(dt, d_p);

  Matrix Q = Matrix::Zero(n_x, n_x);
  Q.topLeftCorner(d_p, d_p) = weights.q_pos * Matrix::Identity(d_p, d_p);
  Matrix R = weights.r_input * Matrix::Identity(d_p, d_p);
  Matrix Q_T = Matrix::Zero(n_x, n_x);
  Q_T.topLeftCorner(d_p, d_p) = weights.q_terminal * Matrix::Identity(d_p, d_p);
  Matrix C = Matrix::Zero(d_p, n_x);
  C.leftCols(d_p) = Matrix::Identity(d_p, d_p);

  const double vel_bound = 5.0 * radius / (T * dt);

  Scenario s;
  s.horizon = T;
  s.dt = dt;
  s.d_safe = d_safe;
  s.agents.reserve(static_cast<size_t>(n_agents));
  // Exact antipodal goals make every reference hit the origin at the same
  // instant, leaving the consensus iteration chattering between equivalent
  // symmetric assignments. A deterministic goal offset far below any
  // physical scale (micrometers here) picks one assignment; golden-angle
  // phases keep the per-agent offsets pairwise distinct.
  const double goal_jitter = 1e-6 * radius;
  constexpr double golden_angle = 2.399963229728653;
  for (int i = 0; i < n_agents; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / n_agents;
    Vector p_start(d_p), p_goal(d_p);
    p_start << radius * std::cos(angle), radius * std::sin(angle);
    p_goal = -p_start;
    p_goal[0] += goal_jitter * std::cos(golden_angle * (i + 1));
    p_goal[1] += goal_jitter * std::sin(golden_angle * (i + 1));

    AgentModel a;
    a.A = A;
    a.B = B;
    a.Q = Q;
    a.R = R;
    a.Q_T = Q_T;
    a.C = C;
    a.x_init = Vector::Zero(n_x);
    a.x_init.head(d_p) = p_start;
    a.x_ref = straight_line_reference(p_start, p_goal, T, dt);
    a.x_lb = Vector(n_x);
    a.x_ub = Vector(n_x);
    a.x_lb << Vector::Constant(d_p, -2.0 * radius), Vector::Constant(d_p, -vel_bound);
    a.x_ub << Vector::Constant(d_p, 2.0 * radius), Vector::Constant(d_p, vel_bound);
    a.u_lb = Vector::Constant(d_p, -1.0);
    a.u_ub = Vector::Constant(d_p, 1.0);
    s.agents.push_back(std::move(a));
  }
  s.validate();
  return s;
}

/// Variable / constraint counts of the centralized problem:
/// sum_i [(T+1) n_x,i + T n_u,i] variables, sum_i T n_x,i dynamics rows,
/// and N(N-1)/2 * T collision pair-steps.
inline ProblemDimensions problem_dimensions(const Scenario& s) {
  ProblemDimensions d;
  const long T = s.horizon;
  for (const AgentModel& a : s.agents) {
    d.num_variables += (T + 1) * a.state_dim() + T * a.input_dim();
    d.num_dynamics_constraints += T * a.state_dim();
  }
  const long n = s.num_agents();
  d.num_collision_pair_steps = n * (n - 1) / 2 * T;
  return d;
}

}  // namespace turboadmm
