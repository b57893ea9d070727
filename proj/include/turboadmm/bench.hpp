#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "turboadmm/admm.hpp"
#include "turboadmm/model.hpp"
#include "turboadmm/oracle.hpp"
#include "turboadmm/scenario_io.hpp"

namespace turboadmm {

inline constexpr const char* kReportSchemaVersion = "1.0";

/// One solver run plus everything needed to reproduce and analyze it.
struct RunRecord {
  int num_agents = 0;
  int horizon = 0;
  double dt = 1.0;
  double d_safe = 0.0;
  unsigned long seed = 0;
  Mode mode = Mode::turbo;
  SolverConfig config;
  SolveReport report;
};

namespace detail {

// shortest representation that parses back to the identical double
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

inline nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;  // JSON has no infinity; null reads back as +inf
}

inline double double_or_inf(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json config_to_json(const SolverConfig& cfg) {
  return {{"rho", cfg.rho},
          {"eps_primal", cfg.eps_primal},
          {"eps_dual", cfg.eps_dual},
          {"max_admm_iters", cfg.max_admm_iters},
          {"mode", to_string(cfg.mode)},
          {"qp_tol", cfg.qp_tol},
          {"qp_max_iter", cfg.qp_max_iter},
          {"threads", cfg.threads},
          {"consensus_from_t0", cfg.consensus_from_t0},
          {"input_prox_weight", cfg.input_prox_weight},
          {"literal_consensus", cfg.literal_consensus},
          {"z_damping", cfg.z_damping},
          {"direction_inertia", cfg.direction_inertia}};
}

inline SolverConfig config_from_json(const nlohmann::json& j) {
  SolverConfig cfg;
  cfg.rho = j.at("rho").get<double>();
  cfg.eps_primal = j.at("eps_primal").get<double>();
  cfg.eps_dual = j.at("eps_dual").get<double>();
  cfg.max_admm_iters = j.at("max_admm_iters").get<int>();
  cfg.mode = mode_from_string(j.at("mode").get<std::string>());
  cfg.qp_tol = j.at("qp_tol").get<double>();
  cfg.qp_max_iter = j.at("qp_max_iter").get<int>();
  cfg.threads = j.at("threads").get<int>();
  cfg.consensus_from_t0 = j.at("consensus_from_t0").get<bool>();
  cfg.input_prox_weight = j.at("input_prox_weight").get<double>();
  cfg.literal_consensus = j.at("literal_consensus").get<bool>();
  cfg.z_damping = j.at("z_damping").get<double>();
  cfg.direction_inertia = j.at("direction_inertia").get<double>();
  return cfg;
}

inline nlohmann::json record_to_json(const RunRecord& rec) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["scenario"] = {{"num_agents", rec.num_agents},
                   {"T", rec.horizon},
                   {"dt", rec.dt},
                   {"d_safe", rec.d_safe},
                   {"seed", rec.seed}};
  j["mode"] = to_string(rec.mode);
  j["config"] = config_to_json(rec.config);

  const SolveReport& r = rec.report;
  nlohmann::json jr;
  jr["converged"] = r.converged;
  jr["admm_iterations"] = r.admm_iterations;
  jr["total_qp_iterations"] = r.total_qp_iterations;
  jr["per_iteration"] = nlohmann::json::array();
  for (const IterationMetrics& m : r.per_iteration) {
    jr["per_iteration"].push_back({{"qp_iterations", m.qp_iterations},
                                   {"qp_wall_ms", m.qp_wall_ms},
                                   {"primal_residual", m.primal_residual},
                                   {"dual_residual", m.dual_residual},
                                   {"wall_ms", m.wall_ms}});
  }
  jr["trajectories"] = nlohmann::json::array();
  for (size_t i = 0; i < r.x_traj.size(); ++i) {
    nlohmann::json jt;
    jt["x"] = nlohmann::json::array();
    for (const Vector& x : r.x_traj[i]) jt["x"].push_back(detail::vector_to_json(x));
    jt["u"] = nlohmann::json::array();
    for (const Vector& u : r.u_traj[i]) jt["u"].push_back(detail::vector_to_json(u));
    jr["trajectories"].push_back(std::move(jt));
  }
  jr["min_separation"] = detail::finite_or_null(r.min_separation);
  jr["final_tracking_errors"] = r.final_tracking_errors;
  jr["total_wall_ms"] = r.total_wall_ms;
  jr["warmstart_ms"] = r.warmstart_ms;
  jr["qp_ms"] = r.qp_ms;
  jr["consensus_ms"] = r.consensus_ms;
  jr["structure_hash_stable"] = r.structure_hash_stable;
  jr["structure_hashes"] = r.structure_hashes;
  j["report"] = std::move(jr);
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  const std::string version = j.at("schema_version").get<std::string>();
  const std::string major = version.substr(0, version.find('.'));
  const std::string expected(kReportSchemaVersion);
  if (major != expected.substr(0, expected.find('.')))
    throw std::runtime_error("report schema major version mismatch: file has " + version +
                             ", reader expects " + kReportSchemaVersion);

  RunRecord rec;
  const nlohmann::json& sc = j.at("scenario");
  rec.num_agents = sc.at("num_agents").get<int>();
  rec.horizon = sc.at("T").get<int>();
  rec.dt = sc.at("dt").get<double>();
  rec.d_safe = sc.at("d_safe").get<double>();
  rec.seed = sc.at("seed").get<unsigned long>();
  rec.mode = mode_from_string(j.at("mode").get<std::string>());
  rec.config = config_from_json(j.at("config"));

  const nlohmann::json& jr = j.at("report");
  SolveReport& r = rec.report;
  r.converged = jr.at("converged").get<bool>();
  r.admm_iterations = jr.at("admm_iterations").get<int>();
  r.total_qp_iterations = jr.at("total_qp_iterations").get<long>();
  for (const nlohmann::json& m : jr.at("per_iteration")) {
    IterationMetrics im;
    im.qp_iterations = m.at("qp_iterations").get<std::vector<int>>();
    im.qp_wall_ms = m.at("qp_wall_ms").get<std::vector<double>>();
    im.primal_residual = m.at("primal_residual").get<double>();
    im.dual_residual = m.at("dual_residual").get<double>();
    im.wall_ms = m.at("wall_ms").get<double>();
    r.per_iteration.push_back(std::move(im));
  }
  for (const nlohmann::json& jt : jr.at("trajectories")) {
    std::vector<Vector> xs, us;
    for (const nlohmann::json& x : jt.at("x"))
      xs.push_back(detail::vector_from_json(x, static_cast<long>(x.size()), "x"));
    for (const nlohmann::json& u : jt.at("u"))
      us.push_back(detail::vector_from_json(u, static_cast<long>(u.size()), "u"));
    r.x_traj.push_back(std::move(xs));
    r.u_traj.push_back(std::move(us));
  }
  r.min_separation = detail::double_or_inf(jr.at("min_separation"));
  r.final_tracking_errors = jr.at("final_tracking_errors").get<std::vector<double>>();
  r.total_wall_ms = jr.at("total_wall_ms").get<double>();
  r.warmstart_ms = jr.at("warmstart_ms").get<double>();
  r.qp_ms = jr.at("qp_ms").get<double>();
  r.consensus_ms = jr.at("consensus_ms").get<double>();
  r.structure_hash_stable = jr.at("structure_hash_stable").get<bool>();
  r.structure_hashes = jr.at("structure_hashes").get<std::vector<std::uint64_t>>();
  return rec;
}

inline void write_report(const RunRecord& rec, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << record_to_json(rec).dump(2) << "\n";
}

inline RunRecord read_report(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open report file: " + path);
  nlohmann::json j;
  is >> j;
  return record_from_json(j);
}

/// Per-agent trajectory CSV for plotting. The canonical planar double
/// integrator gets named columns (t, x, y, vx, vy, u1, u2); other dims fall
/// back to generic x0../u0.. headers. Input columns hold zeros at t = T.
inline void export_trajectories(const RunRecord& rec, std::ostream& os) {
  if (rec.report.x_traj.empty()) throw std::runtime_error("export: record holds no trajectories");
  const long n_x = rec.report.x_traj.front().front().size();
  const long n_u = rec.report.u_traj.front().empty()
                       ? 0
                       : rec.report.u_traj.front().front().size();
  os << "agent,t";
  if (n_x == 4 && n_u == 2) {
    os << ",x,y,vx,vy,u1,u2";
  } else {
    for (long k = 0; k < n_x; ++k) os << ",x" << k;
    for (long k = 0; k < n_u; ++k) os << ",u" << k;
  }
  os << "\n";
  for (size_t i = 0; i < rec.report.x_traj.size(); ++i) {
    const auto& xs = rec.report.x_traj[i];
    const auto& us = rec.report.u_traj[i];
    for (size_t t = 0; t < xs.size(); ++t) {
      os << i << "," << t;
      for (long k = 0; k < n_x; ++k) os << "," << detail::format_double(xs[t][k]);
      for (long k = 0; k < n_u; ++k)
        os << "," << (t < us.size() ? detail::format_double(us[t][k]) : "0");
      os << "\n";
    }
  }
}

inline void export_trajectories(const RunRecord& rec, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  export_trajectories(rec, os);
}

/// Parses the CSV written by export_trajectories back into per-agent state
/// trajectories (states only; the zero-padded terminal inputs are skipped).
inline std::vector<std::vector<Vector>> parse_trajectory_csv(std::istream& is, int n_x) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trajectory CSV");
  std::vector<std::vector<Vector>> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() < static_cast<size_t>(2 + n_x))
      throw std::runtime_error("trajectory CSV row too short");
    const size_t agent = static_cast<size_t>(cells[0]);
    if (agent >= out.size()) out.resize(agent + 1);
    Vector x(n_x);
    for (int k = 0; k < n_x; ++k) x[k] = cells[static_cast<size_t>(2 + k)];
    out[agent].push_back(std::move(x));
  }
  return out;
}

/// One cell of the mode x agent-count ablation grid.
struct AblateCell {
  int num_agents = 0;
  Mode mode = Mode::turbo;
  bool failed = false;
  bool converged = false;
  int admm_iterations = 0;
  long total_qp_iterations = 0;
  double wall_ms_mean = 0.0;
  double wall_ms_std = 0.0;
  double min_separation = 0.0;
  double max_tracking_error = 0.0;
};

struct AblateOptions {
  double radius = 8.0;
  int horizon = 20;
  double dt = 1.0;
  double d_safe = 2.0;
  CostWeights weights{};
  int repeats = 20;  // timed repetitions; one extra warmup run is discarded
  SolverConfig config{};
};

/// Runs the full grid sequentially (cells never overlap so timings stay
/// uncontended). Per cell: one warmup run excluded from statistics, then
/// `repeats` timed runs. Failures are recorded in the cell and the grid
/// continues.
inline std::vector<AblateCell> run_ablation(const std::vector<int>& agent_counts,
                                            const std::vector<Mode>& modes,
                                            const AblateOptions& opt) {
  std::vector<AblateCell> cells;
  for (int n : agent_counts) {
    const Scenario s =
        circle_scenario(n, opt.radius, opt.horizon, opt.dt, opt.d_safe, opt.weights);
    for (Mode mode : modes) {
      AblateCell cell;
      cell.num_agents = n;
      cell.mode = mode;
      SolverConfig cfg = opt.config;
      cfg.mode = mode;
      try {
        SolveReport first = run(s, cfg);  // warmup, not timed
        std::vector<double> wall;
        wall.reserve(static_cast<size_t>(opt.repeats));
        for (int rep = 0; rep < opt.repeats; ++rep) {
          const auto t0 = std::chrono::steady_clock::now();
          SolveReport r = run(s, cfg);
          wall.push_back(std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count());
          if (rep == 0) first = std::move(r);
        }
        double mean = 0.0;
        for (double w : wall) mean += w;
        mean /= static_cast<double>(wall.size());
        double var = 0.0;
        for (double w : wall) var += (w - mean) * (w - mean);
        var /= static_cast<double>(wall.size());
        cell.converged = first.converged;
        cell.admm_iterations = first.admm_iterations;
        cell.total_qp_iterations = first.total_qp_iterations;
        cell.wall_ms_mean = mean;
        cell.wall_ms_std = std::sqrt(var);
        cell.min_separation = first.min_separation;
        for (double e : first.final_tracking_errors)
          cell.max_tracking_error = std::max(cell.max_tracking_error, e);
      } catch (const std::exception&) {
        cell.failed = true;
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

inline void write_ablation_csv(const std::vector<AblateCell>& cells, std::ostream& os) {
  os << "N,mode,admm_iters,converged,total_qp_iters,wall_ms_mean,wall_ms_std,min_sep,"
        "max_track_err\n";
  for (const AblateCell& c : cells) {
    os << c.num_agents << "," << to_string(c.mode) << "," << c.admm_iterations << ","
       << (c.failed ? "error" : (c.converged ? "1" : "0")) << "," << c.total_qp_iterations << ","
       << detail::format_double(c.wall_ms_mean) << "," << detail::format_double(c.wall_ms_std)
       << "," << detail::format_double(c.min_separation) << ","
       << detail::format_double(c.max_tracking_error) << "\n";
  }
}

inline void write_ablation_csv(const std::vector<AblateCell>& cells, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_ablation_csv(cells, os);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Wall-time scaling of one mode across the grid, or NaN when fewer than
/// two usable cells exist.
inline double ablation_scaling_slope(const std::vector<AblateCell>& cells, Mode mode) {
  std::vector<double> n, wall;
  for (const AblateCell& c : cells) {
    if (c.mode != mode || c.failed) continue;
    n.push_back(static_cast<double>(c.num_agents));
    wall.push_back(c.wall_ms_mean);
  }
  if (n.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return loglog_slope(n, wall);
}

}  // namespace turboadmm
