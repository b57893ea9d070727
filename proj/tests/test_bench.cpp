#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "turboadmm/bench.hpp"
#include "turboadmm/oracle.hpp"
#include "turboadmm/scenario_io.hpp"

using namespace turboadmm;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  const fs::path dir = fs::temp_directory_path() / "turboadmm_tests";
  fs::create_directories(dir);
  return dir;
}

RunRecord small_record(Mode mode = Mode::turbo, int agents = 2) {
  const Scenario s = circle_scenario(agents, 8.0, 20, 1.0, 2.0);
  RunRecord rec;
  rec.num_agents = s.num_agents();
  rec.horizon = s.horizon;
  rec.dt = s.dt;
  rec.d_safe = s.d_safe;
  rec.seed = 42;
  rec.mode = mode;
  rec.config.mode = mode;
  rec.config.threads = 1;
  rec.report = run(s, rec.config);
  return rec;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TURBOADMM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("scenario files round-trip bitwise") {
  const Scenario s = circle_scenario(3, 8.0, 20, 1.0, 2.0);
  const fs::path path = test_dir() / "scenario_roundtrip.json";
  write_scenario(s, path.string());
  const Scenario back = read_scenario(path.string());
  REQUIRE(back.num_agents() == 3);
  CHECK(back.horizon == s.horizon);
  CHECK(back.dt == s.dt);
  CHECK(back.d_safe == s.d_safe);
  for (int i = 0; i < 3; ++i) {
    CHECK((back.agents[i].A - s.agents[i].A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.agents[i].B - s.agents[i].B).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.agents[i].Q - s.agents[i].Q).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.agents[i].x_init - s.agents[i].x_init).cwiseAbs().maxCoeff() == 0.0);
    for (size_t t = 0; t < s.agents[i].x_ref.size(); ++t)
      CHECK((back.agents[i].x_ref[t] - s.agents[i].x_ref[t]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("reports round-trip losslessly") {
  const RunRecord rec = small_record();
  const fs::path path = test_dir() / "report_roundtrip.json";
  write_report(rec, path.string());
  const RunRecord back = read_report(path.string());

  CHECK(back.num_agents == rec.num_agents);
  CHECK(back.seed == rec.seed);
  CHECK(back.mode == rec.mode);
  CHECK(back.config.rho == rec.config.rho);
  CHECK(back.report.converged == rec.report.converged);
  CHECK(back.report.admm_iterations == rec.report.admm_iterations);
  CHECK(back.report.total_qp_iterations == rec.report.total_qp_iterations);
  CHECK(back.report.min_separation == rec.report.min_separation);
  REQUIRE(back.report.per_iteration.size() == rec.report.per_iteration.size());
  for (size_t k = 0; k < rec.report.per_iteration.size(); ++k) {
    CHECK(back.report.per_iteration[k].primal_residual ==
          rec.report.per_iteration[k].primal_residual);
    CHECK(back.report.per_iteration[k].dual_residual ==
          rec.report.per_iteration[k].dual_residual);
  }
  for (int i = 0; i < 2; ++i)
    for (int t = 0; t <= 20; ++t)
      for (int k = 0; k < 4; ++k)
        CHECK(back.report.x_traj[i][t][k] == rec.report.x_traj[i][t][k]);
  CHECK(back.report.structure_hashes == rec.report.structure_hashes);
}

TEST_CASE("readers reject unknown schema majors") {
  const RunRecord rec = small_record();
  nlohmann::json j = record_to_json(rec);
  j["schema_version"] = "2.0";
  CHECK_THROWS_WITH_AS(record_from_json(j), doctest::Contains("schema major"),
                       std::runtime_error);
}

TEST_CASE("trajectory CSV export matches the report") {
  const RunRecord rec = small_record();
  std::stringstream ss;
  export_trajectories(rec, ss);

  // header plus (T+1) rows per agent
  std::string header;
  std::getline(ss, header);
  CHECK(header == "agent,t,x,y,vx,vy,u1,u2");
  int rows = 0;
  for (std::string line; std::getline(ss, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == 2 * 21);

  ss.clear();
  ss.seekg(0);
  const auto parsed = parse_trajectory_csv(ss, 4);
  REQUIRE(parsed.size() == 2);
  for (int i = 0; i < 2; ++i) {
    REQUIRE(parsed[i].size() == 21);
    for (int t = 0; t <= 20; ++t)
      for (int k = 0; k < 4; ++k) CHECK(parsed[i][t][k] == rec.report.x_traj[i][t][k]);
  }

  // independently recomputed separation agrees with the report
  const double sep = oracle::min_separation(parsed, 2);
  CHECK(sep == doctest::Approx(rec.report.min_separation).epsilon(1e-12));
  CHECK(sep >= rec.d_safe - 1e-3);
}

TEST_CASE("ablation grid covers every cell and keeps the mode ordering") {
  AblateOptions opt;
  opt.repeats = 1;
  opt.config.threads = 1;
  const auto cells =
      run_ablation({2, 4}, {Mode::base, Mode::hotstart, Mode::turbo}, opt);
  REQUIRE(cells.size() == 6);
  for (int n : {2, 4}) {
    long base = 0, hot = 0, turbo = 0;
    for (const AblateCell& c : cells) {
      if (c.num_agents != n) continue;
      CHECK_FALSE(c.failed);
      CHECK(c.converged);
      if (c.mode == Mode::base) base = c.total_qp_iterations;
      if (c.mode == Mode::hotstart) hot = c.total_qp_iterations;
      if (c.mode == Mode::turbo) turbo = c.total_qp_iterations;
      CHECK(c.wall_ms_std == 0.0);  // single repeat
    }
    CHECK(turbo <= hot);
    CHECK(hot <= base);
  }
  std::stringstream ss;
  write_ablation_csv(cells, ss);
  std::string header;
  std::getline(ss, header);
  CHECK(header ==
        "N,mode,admm_iters,converged,total_qp_iters,wall_ms_mean,wall_ms_std,min_sep,"
        "max_track_err");
}

TEST_CASE("repeated runs reproduce the report bit-identically") {
  // everything except wall-clock measurements must match exactly
  auto strip_timing = [](nlohmann::json j) {
    j["report"].erase("total_wall_ms");
    j["report"].erase("warmstart_ms");
    j["report"].erase("qp_ms");
    j["report"].erase("consensus_ms");
    for (auto& m : j["report"]["per_iteration"]) {
      m.erase("qp_wall_ms");
      m.erase("wall_ms");
    }
    return j;
  };
  const RunRecord a = small_record(Mode::turbo, 2);
  const RunRecord b = small_record(Mode::turbo, 2);
  CHECK(strip_timing(record_to_json(a)).dump() == strip_timing(record_to_json(b)).dump());
}

TEST_CASE("loglog slope of an exact power law") {
  std::vector<double> n{2, 4, 8, 16};
  std::vector<double> y;
  for (double v : n) y.push_back(3.0 * std::pow(v, 1.2));
  CHECK(loglog_slope(n, y) == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("cli end to end: generate, run, export") {
  const fs::path dir = test_dir();
  const std::string scen = (dir / "cli_scenario.json").string();
  const std::string rep = (dir / "cli_report.json").string();
  const std::string csv = (dir / "cli_traj.csv").string();

  REQUIRE(run_cli("generate --agents 2 --out " + scen) == 0);
  const Scenario s = read_scenario(scen);
  const ProblemDimensions d = problem_dimensions(s);
  CHECK(d.num_variables == 248);
  CHECK(d.num_dynamics_constraints == 160);

  REQUIRE(run_cli("run " + scen + " --mode turbo --threads 1 --out " + rep) == 0);
  const RunRecord rec = read_report(rep);
  CHECK(rec.report.converged);
  CHECK(rec.report.min_separation >= 1.999);

  REQUIRE(run_cli("export-traj " + rep + " --out " + csv) == 0);
  std::ifstream is(csv);
  const auto parsed = parse_trajectory_csv(is, 4);
  REQUIRE(parsed.size() == 2);
  CHECK(oracle::min_separation(parsed, 2) >= 1.999);
}

TEST_CASE("cli generate handles one agent and the full benchmark size") {
  const fs::path dir = test_dir();
  const std::string one = (dir / "cli_one.json").string();
  REQUIRE(run_cli("generate --agents 1 --out " + one) == 0);
  CHECK(problem_dimensions(read_scenario(one)).num_collision_pair_steps == 0);

  const std::string big = (dir / "cli_fourteen.json").string();
  REQUIRE(run_cli("generate --agents 14 --out " + big) == 0);
  const ProblemDimensions d = problem_dimensions(read_scenario(big));
  CHECK(d.num_variables == 1736);
  CHECK(d.num_dynamics_constraints == 1120);
  CHECK(d.num_collision_pair_steps == 1820);
}

TEST_CASE("cli exit codes") {
  const fs::path dir = test_dir();
  // missing input: usage/I-O error, and no partial output
  const std::string out = (dir / "never_written.json").string();
  std::error_code ec;
  fs::remove(out, ec);
  CHECK(run_cli("run /nonexistent/scenario.json --out " + out) == 2);
  CHECK_FALSE(fs::exists(out));
  // invalid generation parameters
  CHECK(run_cli("generate --agents 4 --radius 1.0 --d-safe 2.0 --out " + out) == 2);
  // unknown flag
  CHECK(run_cli("run --definitely-not-a-flag") == 2);
  // strict mode surfaces non-convergence as exit 1
  const std::string scen = (dir / "cli_strict.json").string();
  REQUIRE(run_cli("generate --agents 2 --out " + scen) == 0);
  CHECK(run_cli("run " + scen + " --strict --max-admm-iters 1 --threads 1") == 1);
}

TEST_CASE("cli reports solver failure as exit 3") {
  // velocity pinned at 1 against a 0.1 m position ceiling: agent QP infeasible
  Scenario s = circle_scenario(1, 8.0, 4, 1.0, 2.0);
  AgentModel& a = s.agents[0];
  a.x_init << 0, 0, 1, 0;
  a.x_lb << -10, -10, 1, -1;
  a.x_ub << 0.1, 10, 1, 1;
  const fs::path dir = test_dir();
  const std::string scen = (dir / "cli_infeasible.json").string();
  write_scenario(s, scen);
  const int code = std::system((std::string(TURBOADMM_CLI_PATH) + " run " + scen +
                                " --threads 1 > /dev/null 2>&1; exit $?")
                                   .c_str());
  CHECK(WEXITSTATUS(code) == 3);
  for (const auto& entry : fs::directory_iterator(fs::current_path()))
    if (entry.path().filename().string().starts_with("turboadmm_qp_failure"))
      fs::remove(entry.path());
}

TEST_CASE("cli run without --out prints a summary only") {
  const fs::path dir = test_dir();
  const std::string scen = (dir / "cli_summary.json").string();
  REQUIRE(run_cli("generate --agents 1 --out " + scen) == 0);
  CHECK(run_cli("run " + scen + " --threads 1") == 0);
}

TEST_CASE("TURBOADMM_THREADS provides the worker count fallback") {
  const fs::path dir = test_dir();
  const std::string scen = (dir / "cli_env.json").string();
  REQUIRE(run_cli("generate --agents 2 --out " + scen) == 0);
  const std::string cmd = "TURBOADMM_THREADS=2 " + std::string(TURBOADMM_CLI_PATH) + " run " +
                          scen + " > /dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  const std::string bad = "TURBOADMM_THREADS=notanumber " + std::string(TURBOADMM_CLI_PATH) +
                          " run " + scen + " > /dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(bad.c_str())) == 2);
}

TEST_CASE("per-iteration metrics add up to the report totals") {
  const RunRecord rec = small_record(Mode::turbo, 2);
  long sum = 0;
  for (const IterationMetrics& m : rec.report.per_iteration)
    for (int v : m.qp_iterations) sum += v;
  CHECK(sum == rec.report.total_qp_iterations);
  CHECK(rec.report.per_iteration.size() ==
        static_cast<size_t>(rec.report.admm_iterations));
}

}  // TEST_SUITE
