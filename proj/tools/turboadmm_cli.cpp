// Benchmark CLI: scenario generation, solver runs, the three-mode ablation
// grid, and trajectory export for plotting.
//
// Exit codes: 0 success, 1 non-convergence under --strict, 2 usage or I/O
// error, 3 solver failure.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "turboadmm/bench.hpp"

namespace {

using namespace turboadmm;

int resolve_threads(int flag_value) {
  if (flag_value >= 0) return flag_value;
  if (const char* env = std::getenv("TURBOADMM_THREADS")) {
    try {
      return std::max(0, std::stoi(env));
    } catch (const std::exception&) {
      throw std::runtime_error("TURBOADMM_THREADS is not an integer: " + std::string(env));
    }
  }
  return 0;  // hardware default
}

struct CommonOptions {
  SolverConfig base;  // defaults; mode and threads filled at dispatch
  double eps = 1e-4;
  int threads = -1;  // -1: unset, fall back to TURBOADMM_THREADS
  unsigned long seed = 0;

  SolverConfig config(Mode mode) const {
    SolverConfig cfg = base;
    cfg.eps_primal = eps;
    cfg.eps_dual = eps;
    cfg.mode = mode;
    cfg.threads = resolve_threads(threads);
    return cfg;
  }
};

void add_common_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--rho", opt.base.rho, "ADMM penalty parameter")->capture_default_str();
  cmd->add_option("--eps", opt.eps, "primal and dual residual tolerance")->capture_default_str();
  cmd->add_option("--max-admm-iters", opt.base.max_admm_iters, "ADMM iteration cap")
      ->capture_default_str();
  cmd->add_option("--threads", opt.threads,
                  "worker threads (0 = hardware default; falls back to TURBOADMM_THREADS)");
  cmd->add_option("--seed", opt.seed, "seed recorded in the report")->capture_default_str();
  cmd->add_option("--qp-tol", opt.base.qp_tol, "QP kernel tolerance")->capture_default_str();
  cmd->add_option("--qp-max-iter", opt.base.qp_max_iter,
                  "QP working-set change budget (0 = 10(n+m))");
  cmd->add_option("--input-prox", opt.base.input_prox_weight,
                  "extra input weight reproducing the literal rho*I recursion")
      ->capture_default_str();
  cmd->add_option("--z-damping", opt.base.z_damping, "consensus target damping")
      ->capture_default_str();
  cmd->add_option("--direction-inertia", opt.base.direction_inertia,
                  "consensus projection direction inertia")
      ->capture_default_str();
  cmd->add_flag("--consensus-t0", opt.base.consensus_from_t0,
                "include t=0 in the consensus window");
  cmd->add_flag("--literal-consensus", opt.base.literal_consensus,
                "single-point consensus projection, for comparison only");
}

void print_summary(const RunRecord& rec) {
  const SolveReport& r = rec.report;
  std::cout << "mode:               " << to_string(rec.mode) << "\n"
            << "converged:          " << (r.converged ? "yes" : "no") << "\n"
            << "admm iterations:    " << r.admm_iterations << "\n"
            << "total qp iterations:" << r.total_qp_iterations << "\n"
            << "min separation:     " << r.min_separation << " m\n";
  double max_err = 0.0;
  for (double e : r.final_tracking_errors) max_err = std::max(max_err, e);
  std::cout << "max tracking error: " << max_err << " m\n"
            << "wall time:          " << r.total_wall_ms << " ms (warmstart " << r.warmstart_ms
            << ", qp " << r.qp_ms << ", consensus " << r.consensus_ms << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"turboadmm: multi-agent trajectory optimization benchmark"};
  app.require_subcommand(1);

  std::function<int()> action;

  // generate -------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "write a circle-crossing scenario file");
  struct {
    int agents = 2;
    double radius = 8.0;
    int horizon = 20;
    double dt = 1.0;
    double d_safe = 2.0;
    CostWeights weights;
    std::string out;
  } gen_opt;
  gen->add_option("--agents", gen_opt.agents, "number of agents")->capture_default_str();
  gen->add_option("--radius", gen_opt.radius, "circle radius in meters")->capture_default_str();
  gen->add_option("--horizon", gen_opt.horizon, "horizon steps")->capture_default_str();
  gen->add_option("--dt", gen_opt.dt, "timestep in seconds")->capture_default_str();
  gen->add_option("--d-safe", gen_opt.d_safe, "minimum separation in meters")
      ->capture_default_str();
  gen->add_option("--q-pos", gen_opt.weights.q_pos, "stage position weight")
      ->capture_default_str();
  gen->add_option("--r-input", gen_opt.weights.r_input, "input weight")->capture_default_str();
  gen->add_option("--q-terminal", gen_opt.weights.q_terminal, "terminal position weight")
      ->capture_default_str();
  gen->add_option("--out", gen_opt.out, "output scenario file")->required();
  gen->callback([&] {
    action = [&]() {
      const Scenario s = circle_scenario(gen_opt.agents, gen_opt.radius, gen_opt.horizon,
                                         gen_opt.dt, gen_opt.d_safe, gen_opt.weights);
      write_scenario(s, gen_opt.out);
      const ProblemDimensions d = problem_dimensions(s);
      std::cout << "wrote " << gen_opt.out << " (" << s.num_agents() << " agents, "
                << d.num_variables << " variables, " << d.num_dynamics_constraints
                << " dynamics rows, " << d.num_collision_pair_steps << " collision pair-steps)\n";
      return 0;
    };
  });

  // run ------------------------------------------------------------------
  auto* runc = app.add_subcommand("run", "solve a scenario file and report metrics");
  struct {
    std::string scenario;
    std::string mode = "turbo";
    std::string out;
    bool strict = false;
    CommonOptions common;
  } run_opt;
  runc->add_option("scenario", run_opt.scenario, "scenario file produced by generate")->required();
  runc->add_option("--mode", run_opt.mode, "base | hotstart | turbo")->capture_default_str();
  runc->add_option("--out", run_opt.out, "report file to write");
  runc->add_flag("--strict", run_opt.strict, "exit 1 when the run does not converge");
  add_common_flags(runc, run_opt.common);
  runc->callback([&] {
    action = [&]() {
      const Scenario s = read_scenario(run_opt.scenario);
      RunRecord rec;
      rec.mode = mode_from_string(run_opt.mode);
      rec.config = run_opt.common.config(rec.mode);
      rec.num_agents = s.num_agents();
      rec.horizon = s.horizon;
      rec.dt = s.dt;
      rec.d_safe = s.d_safe;
      rec.seed = run_opt.common.seed;
      rec.report = run(s, rec.config);
      if (!run_opt.out.empty()) write_report(rec, run_opt.out);
      print_summary(rec);
      if (!run_opt.out.empty()) std::cout << "report written to " << run_opt.out << "\n";
      return run_opt.strict && !rec.report.converged ? 1 : 0;
    };
  });

  // ablate ---------------------------------------------------------------
  auto* abl = app.add_subcommand("ablate", "run the mode x agent-count ablation grid");
  struct {
    std::vector<int> agents{2, 4};
    std::vector<std::string> modes{"base", "hotstart", "turbo"};
    int repeats = 20;
    double radius = 8.0;
    int horizon = 20;
    double dt = 1.0;
    double d_safe = 2.0;
    std::string out;
    CommonOptions common;
  } abl_opt;
  abl->add_option("--agents", abl_opt.agents, "agent counts to sweep")->capture_default_str();
  abl->add_option("--modes", abl_opt.modes, "modes to sweep")->capture_default_str();
  abl->add_option("--repeats", abl_opt.repeats, "timed repetitions per cell (plus one warmup)")
      ->capture_default_str();
  abl->add_option("--radius", abl_opt.radius, "circle radius")->capture_default_str();
  abl->add_option("--horizon", abl_opt.horizon, "horizon steps")->capture_default_str();
  abl->add_option("--dt", abl_opt.dt, "timestep")->capture_default_str();
  abl->add_option("--d-safe", abl_opt.d_safe, "minimum separation")->capture_default_str();
  abl->add_option("--out", abl_opt.out, "output CSV")->required();
  add_common_flags(abl, abl_opt.common);
  abl->callback([&] {
    action = [&]() {
      AblateOptions opt;
      opt.radius = abl_opt.radius;
      opt.horizon = abl_opt.horizon;
      opt.dt = abl_opt.dt;
      opt.d_safe = abl_opt.d_safe;
      opt.repeats = abl_opt.repeats;
      opt.config = abl_opt.common.config(Mode::turbo);
      std::vector<Mode> modes;
      for (const std::string& m : abl_opt.modes) modes.push_back(mode_from_string(m));
      const std::vector<AblateCell> cells = run_ablation(abl_opt.agents, modes, opt);
      write_ablation_csv(cells, abl_opt.out);
      std::cout << "wrote " << abl_opt.out << " (" << cells.size() << " cells)\n";
      for (const AblateCell& c : cells)
        if (c.failed)
          std::cerr << "cell N=" << c.num_agents << " mode=" << to_string(c.mode)
                    << " failed; see above\n";
      const double slope = ablation_scaling_slope(cells, Mode::turbo);
      if (std::isfinite(slope))
        std::cout << "turbo scaling: wall time ~ N^" << slope << " over the swept agent counts\n";
      return 0;
    };
  });

  // export-traj ----------------------------------------------------------
  auto* exp = app.add_subcommand("export-traj", "extract per-agent trajectories to CSV");
  struct {
    std::string report;
    std::string out;
  } exp_opt;
  exp->add_option("report", exp_opt.report, "report file produced by run")->required();
  exp->add_option("--out", exp_opt.out, "output CSV")->required();
  exp->callback([&] {
    action = [&]() {
      const RunRecord rec = read_report(exp_opt.report);
      export_trajectories(rec, exp_opt.out);
      std::cout << "wrote " << exp_opt.out << "\n";
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit cleanly, usage errors map to 2
  }

  try {
    return action();
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
