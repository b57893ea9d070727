#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "turboadmm/model.hpp"
#include "turboadmm/qp.hpp"
#include "turboadmm/qp_solver.hpp"
#include "turboadmm/riccati.hpp"

namespace turboadmm {

enum class Mode { base, hotstart, turbo };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::base: return "base";
    case Mode::hotstart: return "hotstart";
    case Mode::turbo: return "turbo";
  }
  return "unknown";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "base") return Mode::base;
  if (s == "hotstart") return Mode::hotstart;
  if (s == "turbo") return Mode::turbo;
  throw std::invalid_argument("unknown mode: " + s);
}

struct SolverConfig {
  double rho = 25.0;
  double eps_primal = 1e-4;
  double eps_dual = 1e-4;
  int max_admm_iters = 500;
  Mode mode = Mode::turbo;
  double qp_tol = 1e-8;
  int qp_max_iter = 0;  // 0: kernel default of 10*(n+m)
  int threads = 0;      // 0: hardware concurrency
  bool consensus_from_t0 = false;  // default window is t = 1..T
  double input_prox_weight = 0.0;
  bool literal_consensus = false;  // printed one-sided projection, for comparison only
  // Stabilizers of the nonconvex consensus step; both leave the fixed-point
  // set and the separation guarantee untouched (see consensus_update).
  double z_damping = 0.35;         // proximal weight on the previous targets
  double direction_inertia = 1.0;  // blends the previous separation direction
  std::string debug_dump_dir = ".";

  int window_begin() const { return consensus_from_t0 ? 0 : 1; }
};

/// Consensus targets z and scaled duals lambda, one position-space vector
/// per ordered agent pair and consensus-window timestep.
struct ConsensusState {
  int num_agents = 0;
  int horizon = 0;
  int window_begin = 1;
  int position_dim = 0;
  double rho = 0.0;
  std::vector<Vector> z;
  std::vector<Vector> lambda;

  int window_length() const { return horizon - window_begin + 1; }
  int num_ordered_pairs() const { return num_agents * (num_agents - 1); }

  int pair_index(int i, int j) const { return i * (num_agents - 1) + (j < i ? j : j - 1); }
  int entry(int i, int j, int t) const {
    return pair_index(i, j) * window_length() + (t - window_begin);
  }

  Vector& z_at(int i, int j, int t) { return z[static_cast<size_t>(entry(i, j, t))]; }
  const Vector& z_at(int i, int j, int t) const { return z[static_cast<size_t>(entry(i, j, t))]; }
  Vector& lambda_at(int i, int j, int t) { return lambda[static_cast<size_t>(entry(i, j, t))]; }
  const Vector& lambda_at(int i, int j, int t) const {
    return lambda[static_cast<size_t>(entry(i, j, t))];
  }
};

struct IterationMetrics {
  std::vector<int> qp_iterations;   // per agent
  std::vector<double> qp_wall_ms;   // per agent
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double wall_ms = 0.0;
};

struct SolveReport {
  bool converged = false;
  int admm_iterations = 0;
  std::vector<IterationMetrics> per_iteration;
  long total_qp_iterations = 0;
  std::vector<std::vector<Vector>> x_traj;  // per agent, T+1 states
  std::vector<std::vector<Vector>> u_traj;  // per agent, T inputs
  double min_separation = 0.0;
  std::vector<double> final_tracking_errors;
  double total_wall_ms = 0.0;
  double warmstart_ms = 0.0;
  double qp_ms = 0.0;
  double consensus_ms = 0.0;
  bool structure_hash_stable = true;
  std::vector<std::uint64_t> structure_hashes;  // per agent, over H/A_eq/b_eq/lb/ub
};

/// Raised when a per-agent QP solve does not reach optimality. The failing
/// instance is dumped for offline triage.
struct SolverFailure : std::runtime_error {
  SolverFailure(int agent_, int admm_iteration_, QpStatus status_, std::string dump_path_)
      : std::runtime_error("QP solve failed for agent " + std::to_string(agent_) +
                           " at ADMM iteration " + std::to_string(admm_iteration_) + ": " +
                           to_string(status_) + " (dump: " + dump_path_ + ")"),
        agent(agent_),
        admm_iteration(admm_iteration_),
        status(status_),
        dump_path(std::move(dump_path_)) {}
  int agent;
  int admm_iteration;
  QpStatus status;
  std::string dump_path;
};

namespace detail {

inline std::uint64_t fnv1a(const double* data, size_t count, std::uint64_t h = 1469598103934665603ull) {
  const unsigned char* bytes = reinterpret_cast<const unsigned char*>(data);
  for (size_t i = 0; i < count * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t structure_hash(const QpData& qp) {
  std::uint64_t h = fnv1a(qp.H.data(), static_cast<size_t>(qp.H.size()));
  h = fnv1a(qp.A_eq.data(), static_cast<size_t>(qp.A_eq.size()), h);
  h = fnv1a(qp.b_eq.data(), static_cast<size_t>(qp.b_eq.size()), h);
  h = fnv1a(qp.lb.data(), static_cast<size_t>(qp.lb.size()), h);
  h = fnv1a(qp.ub.data(), static_cast<size_t>(qp.ub.size()), h);
  return h;
}

// Runs f(i) for i in [0, count) on `threads` workers, agents round-robin by
// index. Results must be written to index-addressed slots so the outcome is
// identical for any worker count.
inline void parallel_for(int count, int threads, const std::function<void(int)>& f) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += threads) f(i);
    });
  for (std::thread& t : pool) t.join();
}

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Joint pairwise projection: points closer than d_safe are pushed apart
/// symmetrically about their midpoint, along their connecting line, until
/// the separation is exactly d_safe (the minimal total squared displacement
/// among symmetric corrections). Coincident points separate along the first
/// coordinate axis.
///
/// With a previous separation direction and a positive inertia weight the
/// push direction blends toward that history. Whenever the intrinsic gap is
/// parallel to the previous direction the blend is a no-op, so stationary
/// points of the consensus iteration are unaffected; the blend only tames
/// the unbounded direction sensitivity of deeply interpenetrating pairs.
inline std::pair<Vector, Vector> consensus_project(const Vector& z_hat_i, const Vector& z_hat_j,
                                                   double d_safe,
                                                   const Vector& dir_prev = Vector(),
                                                   double inertia = 0.0) {
  Vector gap = z_hat_j - z_hat_i;
  const double dist = gap.norm();
  if (dist >= d_safe) return {z_hat_i, z_hat_j};
  Vector dir;
  if (inertia > 0.0 && dir_prev.size() == gap.size()) {
    dir = gap + inertia * d_safe * dir_prev;
    const double norm = dir.norm();
    dir = norm > 1e-12 ? Vector(dir / norm) : dir_prev;
  } else if (dist > 1e-12) {
    dir = gap / dist;
  } else {
    dir = Vector::Zero(z_hat_i.size());
    dir[0] = 1.0;
  }
  const Vector mid = 0.5 * (z_hat_i + z_hat_j);
  return {mid - 0.5 * d_safe * dir, mid + 0.5 * d_safe * dir};
}

/// Consensus targets initialized by projecting the reference positions of
/// every pair, so z starts separation-feasible; duals start at zero.
inline ConsensusState init_state(const Scenario& s, const SolverConfig& cfg) {
  ConsensusState st;
  st.num_agents = s.num_agents();
  st.horizon = s.horizon;
  st.window_begin = cfg.window_begin();
  st.position_dim = s.agents.front().position_dim();
  st.rho = cfg.rho;
  const size_t total = static_cast<size_t>(st.num_ordered_pairs()) *
                       static_cast<size_t>(st.window_length());
  st.z.assign(total, Vector::Zero(st.position_dim));
  st.lambda.assign(total, Vector::Zero(st.position_dim));
  for (int i = 0; i < st.num_agents; ++i) {
    for (int j = i + 1; j < st.num_agents; ++j) {
      for (int t = st.window_begin; t <= st.horizon; ++t) {
        const Vector pi = s.agents[static_cast<size_t>(i)].C *
                          s.agents[static_cast<size_t>(i)].x_ref[static_cast<size_t>(t)];
        const Vector pj = s.agents[static_cast<size_t>(j)].C *
                          s.agents[static_cast<size_t>(j)].x_ref[static_cast<size_t>(t)];
        auto [zi, zj] = consensus_project(pi, pj, s.d_safe);
        st.z_at(i, j, t) = zi;
        st.z_at(j, i, t) = zj;
      }
    }
  }
  return st;
}

/// Per-agent positions C_i x_{i,t} for every consensus-window time.
using AgentPositions = std::vector<std::vector<Vector>>;  // [agent][t - window_begin]

/// z-update. The default joint projection keeps the two copies of every
/// unordered pair at least d_safe apart; the literal variant reproduces the
/// single-point formula z = proj(mean position + dual gap / 2 rho) for
/// comparison runs.
///
/// z_damping > 0 projects a proximal blend (z_hat + damping * z_prev) /
/// (1 + damping) instead of z_hat itself, and direction_inertia > 0 blends
/// the push direction with the previous separation direction. Both leave
/// the stationary points of the iteration unchanged -- at any fixed point
/// the blend inputs coincide with the plain ones -- and both preserve the
/// pairwise separation invariant, since the output is always a projection
/// result. The plain update chatters on densely conflicting instances (the
/// projection direction of a deeply interpenetrating pair is arbitrarily
/// sensitive to its inputs); the blends bound that sensitivity.
inline void consensus_update(ConsensusState& st, const AgentPositions& positions, double d_safe,
                             bool literal = false, double z_damping = 0.0,
                             double direction_inertia = 0.0) {
  for (int i = 0; i < st.num_agents; ++i) {
    for (int j = i + 1; j < st.num_agents; ++j) {
      for (int t = st.window_begin; t <= st.horizon; ++t) {
        const size_t w = static_cast<size_t>(t - st.window_begin);
        const Vector& pi = positions[static_cast<size_t>(i)][w];
        const Vector& pj = positions[static_cast<size_t>(j)][w];
        if (literal) {
          Vector v = 0.5 * (pi + pj) +
                     (st.lambda_at(i, j, t) - st.lambda_at(j, i, t)) / (2.0 * st.rho);
          const double norm = v.norm();
          if (norm < d_safe) {
            if (norm > 1e-12) {
              v *= d_safe / norm;
            } else {
              v.setZero();
              v[0] = d_safe;
            }
          }
          st.z_at(i, j, t) = v;
          st.z_at(j, i, t) = v;
          continue;
        }
        Vector zi_hat = pi + st.lambda_at(i, j, t) / st.rho;
        Vector zj_hat = pj + st.lambda_at(j, i, t) / st.rho;
        if (z_damping > 0.0) {
          zi_hat = (zi_hat + z_damping * st.z_at(i, j, t)) / (1.0 + z_damping);
          zj_hat = (zj_hat + z_damping * st.z_at(j, i, t)) / (1.0 + z_damping);
        }
        Vector dir_prev;
        if (direction_inertia > 0.0) {
          dir_prev = st.z_at(j, i, t) - st.z_at(i, j, t);  // separated by construction
          dir_prev.normalize();
        }
        auto [zi, zj] = consensus_project(zi_hat, zj_hat, d_safe, dir_prev, direction_inertia);
        st.z_at(i, j, t) = zi;
        st.z_at(j, i, t) = zj;
      }
    }
  }
}

/// Scaled dual ascent, lambda_ij += rho (C_i x_i - z_ij), per ordered pair.
/// Must run after consensus_update within an iteration.
inline void dual_update(ConsensusState& st, const AgentPositions& positions) {
  for (int i = 0; i < st.num_agents; ++i) {
    for (int j = 0; j < st.num_agents; ++j) {
      if (j == i) continue;
      for (int t = st.window_begin; t <= st.horizon; ++t) {
        const size_t w = static_cast<size_t>(t - st.window_begin);
        st.lambda_at(i, j, t) += st.rho * (positions[static_cast<size_t>(i)][w] - st.z_at(i, j, t));
      }
    }
  }
}

/// Unscaled infinity-norm residuals: primal is the largest disagreement
/// between positions and their consensus targets, dual is rho times the
/// largest consensus-target movement.
inline std::pair<double, double> residuals(const std::vector<Vector>& z_prev,
                                           const ConsensusState& st,
                                           const AgentPositions& positions) {
  double r_primal = 0.0, r_dual = 0.0;
  size_t idx = 0;
  for (int i = 0; i < st.num_agents; ++i) {
    for (int j = 0; j < st.num_agents; ++j) {
      if (j == i) continue;
      for (int t = st.window_begin; t <= st.horizon; ++t, ++idx) {
        const size_t w = static_cast<size_t>(t - st.window_begin);
        const Vector& z = st.z_at(i, j, t);
        r_primal = std::max(
            r_primal, (positions[static_cast<size_t>(i)][w] - z).cwiseAbs().maxCoeff());
        r_dual = std::max(
            r_dual, (z - z_prev[static_cast<size_t>(st.entry(i, j, t))]).cwiseAbs().maxCoeff());
      }
    }
  }
  return {r_primal, st.rho * r_dual};
}

/// Consensus slices of one agent, in neighbor order j = 0..N-1 skipping i.
inline std::vector<PairSlice> agent_slices(const ConsensusState& st, int i) {
  std::vector<PairSlice> slices;
  slices.reserve(static_cast<size_t>(st.num_agents - 1));
  for (int j = 0; j < st.num_agents; ++j) {
    if (j == i) continue;
    PairSlice s;
    s.z.reserve(static_cast<size_t>(st.window_length()));
    s.lambda.reserve(static_cast<size_t>(st.window_length()));
    for (int t = st.window_begin; t <= st.horizon; ++t) {
      s.z.push_back(st.z_at(i, j, t));
      s.lambda.push_back(st.lambda_at(i, j, t));
    }
    slices.push_back(std::move(s));
  }
  return slices;
}

/// Stacks the per-stage linear terms of the consensus-augmented objective
/// into the QP gradient, in the [x_0..x_T, u_0..u_{T-1}] variable order.
/// Only this vector changes across ADMM iterations.
inline Vector update_gradient(int i, const ConsensusState& st, const Scenario& s,
                              const SolverConfig& cfg) {
  const AgentModel& agent = s.agents[static_cast<size_t>(i)];
  const int T = s.horizon;
  const int n_x = agent.state_dim();
  const int n_u = agent.input_dim();
  const std::vector<PairSlice> slices = agent_slices(st, i);
  const std::vector<StageCost> stages = build_stage_costs(
      agent, slices, cfg.rho, T, cfg.window_begin(), cfg.input_prox_weight);
  Vector g((T + 1) * n_x + T * n_u);
  for (int t = 0; t <= T; ++t) g.segment(t * n_x, n_x) = stages[static_cast<size_t>(t)].q;
  for (int t = 0; t < T; ++t)
    g.segment((T + 1) * n_x + t * n_u, n_u) = stages[static_cast<size_t>(t)].r;
  return g;
}

/// Dense per-agent QP over [x_0..x_T, u_0..u_{T-1}]. Equality block t holds
/// the constraint defining x_t, written as (defining expression - x_t = 0):
/// the initial condition for t = 0 and A x_{t-1} + B u_{t-1} - x_t = 0 for
/// t >= 1, so equality duals equal the value-function gradients produced by
/// the Riccati sweep. H, A_eq, b_eq, lb and ub depend only on the scenario
/// and rho -- never on z or lambda -- which is what makes hotstarts
/// applicable across ADMM iterations. The gradient is left zero; callers
/// pair this with update_gradient.
inline QpData assemble_qp(int i, const Scenario& s, const SolverConfig& cfg) {
  const AgentModel& agent = s.agents[static_cast<size_t>(i)];
  const int T = s.horizon;
  const int n_x = agent.state_dim();
  const int n_u = agent.input_dim();
  const int n = (T + 1) * n_x + T * n_u;
  const int m = (T + 1) * n_x;
  const int u_off = (T + 1) * n_x;

  // Zero-valued consensus slices give the structural (quadratic) parts.
  std::vector<PairSlice> zero_slices(static_cast<size_t>(s.num_agents() - 1));
  const int wlen = T - cfg.window_begin() + 1;
  for (PairSlice& ps : zero_slices) {
    ps.z.assign(static_cast<size_t>(wlen), Vector::Zero(agent.position_dim()));
    ps.lambda.assign(static_cast<size_t>(wlen), Vector::Zero(agent.position_dim()));
  }
  const std::vector<StageCost> stages = build_stage_costs(
      agent, zero_slices, cfg.rho, T, cfg.window_begin(), cfg.input_prox_weight);

  QpData qp;
  qp.H = Matrix::Zero(n, n);
  for (int t = 0; t <= T; ++t)
    qp.H.block(t * n_x, t * n_x, n_x, n_x) = stages[static_cast<size_t>(t)].Q_bar;
  for (int t = 0; t < T; ++t)
    qp.H.block(u_off + t * n_u, u_off + t * n_u, n_u, n_u) = stages[static_cast<size_t>(t)].R_bar;
  qp.g = Vector::Zero(n);

  qp.A_eq = Matrix::Zero(m, n);
  qp.b_eq = Vector::Zero(m);
  qp.A_eq.block(0, 0, n_x, n_x) = -Matrix::Identity(n_x, n_x);
  qp.b_eq.head(n_x) = -agent.x_init;
  for (int t = 1; t <= T; ++t) {
    qp.A_eq.block(t * n_x, (t - 1) * n_x, n_x, n_x) = agent.A;
    qp.A_eq.block(t * n_x, t * n_x, n_x, n_x) = -Matrix::Identity(n_x, n_x);
    qp.A_eq.block(t * n_x, u_off + (t - 1) * n_u, n_x, n_u) = agent.B;
  }

  qp.lb = Vector(n);
  qp.ub = Vector(n);
  for (int t = 0; t <= T; ++t) {
    qp.lb.segment(t * n_x, n_x) = agent.x_lb;
    qp.ub.segment(t * n_x, n_x) = agent.x_ub;
  }
  for (int t = 0; t < T; ++t) {
    qp.lb.segment(u_off + t * n_u, n_u) = agent.u_lb;
    qp.ub.segment(u_off + t * n_u, n_u) = agent.u_ub;
  }
  return qp;
}

/// Consensus ADMM over all agents. Per iteration: parallel per-agent
/// gradient update and QP solve (cold, hot, or Riccati-warmstarted per the
/// configured mode), then the serial consensus, dual and residual phase.
/// Terminates when both residuals drop below their tolerances or the
/// iteration cap is reached; non-convergence is a reported outcome, not an
/// error. A QP failure aborts with a SolverFailure naming agent, iteration
/// and status.
inline SolveReport run(const Scenario& s, const SolverConfig& cfg) {
  s.validate();
  if (cfg.rho <= 0.0 || cfg.eps_primal <= 0.0 || cfg.eps_dual <= 0.0 || cfg.qp_tol <= 0.0)
    throw std::invalid_argument("run: rho and tolerances must be positive");
  if (cfg.max_admm_iters < 1) throw std::invalid_argument("run: max_admm_iters must be >= 1");
  const auto run_start = std::chrono::steady_clock::now();
  const int N = s.num_agents();
  const int T = s.horizon;
  const int wb = cfg.window_begin();

  ConsensusState state = init_state(s, cfg);

  std::vector<QpSolver> solvers;
  solvers.reserve(static_cast<size_t>(N));
  std::vector<std::uint64_t> hashes(static_cast<size_t>(N));
  for (int i = 0; i < N; ++i) {
    QpData qp = assemble_qp(i, s, cfg);
    hashes[static_cast<size_t>(i)] = detail::structure_hash(qp);
    QpSolver::Settings qs;
    qs.tol = cfg.qp_tol;
    qs.max_iter = cfg.qp_max_iter;
    solvers.emplace_back(std::move(qp), qs);
  }

  SolveReport report;
  report.structure_hashes = hashes;
  report.x_traj.resize(static_cast<size_t>(N));
  report.u_traj.resize(static_cast<size_t>(N));

  std::vector<QpSolution> sols(static_cast<size_t>(N));
  std::vector<double> agent_qp_ms(static_cast<size_t>(N));
  std::vector<double> agent_warm_ms(static_cast<size_t>(N));
  std::vector<std::exception_ptr> agent_error(static_cast<size_t>(N));
  AgentPositions positions(static_cast<size_t>(N));
  for (auto& p : positions) p.resize(static_cast<size_t>(T - wb + 1));

  for (int iter = 1; iter <= cfg.max_admm_iters; ++iter) {
    const auto iter_start = std::chrono::steady_clock::now();

    detail::parallel_for(N, cfg.threads, [&](int i) {
      try {
        const AgentModel& agent = s.agents[static_cast<size_t>(i)];
        const int n_x = agent.state_dim();
        QpSolver& solver = solvers[static_cast<size_t>(i)];
        const Vector g = update_gradient(i, state, s, cfg);

        agent_warm_ms[static_cast<size_t>(i)] = 0.0;
        const auto qp_start = std::chrono::steady_clock::now();
        QpSolution sol;
        if (iter == 1) {
          if (cfg.mode == Mode::turbo) {
            const std::vector<StageCost> stages =
                build_stage_costs(agent, agent_slices(state, i), cfg.rho, T, wb,
                                  cfg.input_prox_weight);
            const RiccatiSolution warm = affine_lqr(stages, agent.A, agent.B, agent.x_init);
            agent_warm_ms[static_cast<size_t>(i)] = detail::ms_since(qp_start);

            const int n = solver.data().num_vars();
            const int m = solver.data().num_eq();
            Vector x0(n), nu0(m);
            for (int t = 0; t <= T; ++t) {
              x0.segment(t * n_x, n_x) = warm.x_warm[static_cast<size_t>(t)];
              nu0.segment(t * n_x, n_x) = warm.nu[static_cast<size_t>(t)];
            }
            const int u_off = (T + 1) * n_x;
            const int n_u = agent.input_dim();
            for (int t = 0; t < T; ++t)
              x0.segment(u_off + t * n_u, n_u) = warm.u_warm[static_cast<size_t>(t)];
            solver.set_gradient(g);
            sol = solver.solve_warm(x0, nu0, Vector::Zero(n));
          } else {
            solver.set_gradient(g);
            sol = solver.solve_cold();
          }
        } else if (cfg.mode == Mode::base) {
          solver.set_gradient(g);
          sol = solver.solve_cold();
        } else {
          sol = solver.solve_hot(g);
        }
        agent_qp_ms[static_cast<size_t>(i)] =
            detail::ms_since(qp_start) - agent_warm_ms[static_cast<size_t>(i)];

        if (sol.status != QpStatus::optimal) {
          namespace fs = std::filesystem;
          const fs::path dump = fs::path(cfg.debug_dump_dir) /
                                ("turboadmm_qp_failure_agent" + std::to_string(i) + "_iter" +
                                 std::to_string(iter) + ".mtx");
          std::ofstream os(dump);
          QpData failed = solver.data();
          failed.g = g;
          write_debug_dump(os, failed,
                           "agent " + std::to_string(i) + " admm iteration " +
                               std::to_string(iter) + " status " + to_string(sol.status));
          throw SolverFailure(i, iter, sol.status, dump.string());
        }

        sols[static_cast<size_t>(i)] = std::move(sol);
        for (int t = wb; t <= T; ++t)
          positions[static_cast<size_t>(i)][static_cast<size_t>(t - wb)] =
              agent.C * sols[static_cast<size_t>(i)].x.segment(t * n_x, n_x);
      } catch (...) {
        agent_error[static_cast<size_t>(i)] = std::current_exception();
      }
    });
    // Failures surface in agent order so diagnostics are deterministic.
    for (int i = 0; i < N; ++i)
      if (agent_error[static_cast<size_t>(i)])
        std::rethrow_exception(agent_error[static_cast<size_t>(i)]);

    // Structural data must never drift across iterations: only g changes.
    for (int i = 0; i < N; ++i)
      if (detail::structure_hash(solvers[static_cast<size_t>(i)].data()) !=
          hashes[static_cast<size_t>(i)])
        report.structure_hash_stable = false;

    const auto consensus_start = std::chrono::steady_clock::now();
    const std::vector<Vector> z_prev = state.z;
    consensus_update(state, positions, s.d_safe, cfg.literal_consensus, cfg.z_damping,
                     cfg.direction_inertia);
    dual_update(state, positions);
    const auto [r_primal, r_dual] = residuals(z_prev, state, positions);
    report.consensus_ms += detail::ms_since(consensus_start);

    IterationMetrics metrics;
    metrics.qp_iterations.resize(static_cast<size_t>(N));
    metrics.qp_wall_ms.resize(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) {
      metrics.qp_iterations[static_cast<size_t>(i)] = sols[static_cast<size_t>(i)].iterations;
      metrics.qp_wall_ms[static_cast<size_t>(i)] = agent_qp_ms[static_cast<size_t>(i)];
      report.total_qp_iterations += sols[static_cast<size_t>(i)].iterations;
      report.qp_ms += agent_qp_ms[static_cast<size_t>(i)];
      report.warmstart_ms += agent_warm_ms[static_cast<size_t>(i)];
    }
    metrics.primal_residual = r_primal;
    metrics.dual_residual = r_dual;
    metrics.wall_ms = detail::ms_since(iter_start);
    report.per_iteration.push_back(std::move(metrics));
    report.admm_iterations = iter;

    if (r_primal < cfg.eps_primal && r_dual < cfg.eps_dual) {
      report.converged = true;
      break;
    }
  }

  for (int i = 0; i < N; ++i) {
    const AgentModel& agent = s.agents[static_cast<size_t>(i)];
    const int n_x = agent.state_dim();
    const int n_u = agent.input_dim();
    const int u_off = (T + 1) * n_x;
    auto& xs = report.x_traj[static_cast<size_t>(i)];
    auto& us = report.u_traj[static_cast<size_t>(i)];
    xs.resize(static_cast<size_t>(T) + 1);
    us.resize(static_cast<size_t>(T));
    for (int t = 0; t <= T; ++t) xs[static_cast<size_t>(t)] = sols[static_cast<size_t>(i)].x.segment(t * n_x, n_x);
    for (int t = 0; t < T; ++t)
      us[static_cast<size_t>(t)] = sols[static_cast<size_t>(i)].x.segment(u_off + t * n_u, n_u);
    report.final_tracking_errors.push_back(
        (agent.C * (xs.back() - agent.x_ref.back())).norm());
  }

  double min_sep = std::numeric_limits<double>::infinity();
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j)
      for (int t = 0; t <= T; ++t) {
        const Vector pi = s.agents[static_cast<size_t>(i)].C *
                          report.x_traj[static_cast<size_t>(i)][static_cast<size_t>(t)];
        const Vector pj = s.agents[static_cast<size_t>(j)].C *
                          report.x_traj[static_cast<size_t>(j)][static_cast<size_t>(t)];
        min_sep = std::min(min_sep, (pi - pj).norm());
      }
  report.min_separation = N > 1 ? min_sep : std::numeric_limits<double>::infinity();

  report.total_wall_ms = detail::ms_since(run_start);
  return report;
}

}  // namespace turboadmm
