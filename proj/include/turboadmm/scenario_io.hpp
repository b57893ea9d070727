#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "turboadmm/model.hpp"

namespace turboadmm {

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& M) {
  nlohmann::json a = nlohmann::json::array();
  for (long r = 0; r < M.rows(); ++r)
    for (long c = 0; c < M.cols(); ++c) a.push_back(M(r, c));  // row-major
  return a;
}

inline Matrix matrix_from_json(const nlohmann::json& a, long rows, long cols,
                               const std::string& name) {
  if (!a.is_array() || static_cast<long>(a.size()) != rows * cols)
    throw std::runtime_error("scenario: field '" + name + "' must hold " +
                             std::to_string(rows * cols) + " numbers");
  Matrix M(rows, cols);
  long k = 0;
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) M(r, c) = a[static_cast<size_t>(k++)].get<double>();
  return M;
}

inline nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vector vector_from_json(const nlohmann::json& a, long n, const std::string& name) {
  if (!a.is_array() || static_cast<long>(a.size()) != n)
    throw std::runtime_error("scenario: field '" + name + "' must hold " + std::to_string(n) +
                             " numbers");
  Vector v(n);
  for (long i = 0; i < n; ++i) v[i] = a[static_cast<size_t>(i)].get<double>();
  return v;
}

}  // namespace detail

/// Scenario file format: {agents: [...], T, dt, d_safe} with matrices as
/// row-major arrays. Written by the CLI `generate` command and read by
/// `run`.
inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["T"] = s.horizon;
  j["dt"] = s.dt;
  j["d_safe"] = s.d_safe;
  j["agents"] = nlohmann::json::array();
  for (const AgentModel& a : s.agents) {
    nlohmann::json ja;
    ja["n_x"] = a.state_dim();
    ja["n_u"] = a.input_dim();
    ja["d_p"] = a.position_dim();
    ja["A"] = detail::matrix_to_json(a.A);
    ja["B"] = detail::matrix_to_json(a.B);
    ja["Q"] = detail::matrix_to_json(a.Q);
    ja["R"] = detail::matrix_to_json(a.R);
    ja["Q_T"] = detail::matrix_to_json(a.Q_T);
    ja["C"] = detail::matrix_to_json(a.C);
    ja["x_init"] = detail::vector_to_json(a.x_init);
    nlohmann::json refs = nlohmann::json::array();
    for (const Vector& r : a.x_ref) refs.push_back(detail::vector_to_json(r));
    ja["x_ref"] = refs;
    ja["bounds"] = {{"x_lb", detail::vector_to_json(a.x_lb)},
                    {"x_ub", detail::vector_to_json(a.x_ub)},
                    {"u_lb", detail::vector_to_json(a.u_lb)},
                    {"u_ub", detail::vector_to_json(a.u_ub)}};
    j["agents"].push_back(std::move(ja));
  }
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.horizon = j.at("T").get<int>();
  s.dt = j.at("dt").get<double>();
  s.d_safe = j.at("d_safe").get<double>();
  for (const nlohmann::json& ja : j.at("agents")) {
    const long n_x = ja.at("n_x").get<long>();
    const long n_u = ja.at("n_u").get<long>();
    const long d_p = ja.at("d_p").get<long>();
    AgentModel a;
    a.A = detail::matrix_from_json(ja.at("A"), n_x, n_x, "A");
    a.B = detail::matrix_from_json(ja.at("B"), n_x, n_u, "B");
    a.Q = detail::matrix_from_json(ja.at("Q"), n_x, n_x, "Q");
    a.R = detail::matrix_from_json(ja.at("R"), n_u, n_u, "R");
    a.Q_T = detail::matrix_from_json(ja.at("Q_T"), n_x, n_x, "Q_T");
    a.C = detail::matrix_from_json(ja.at("C"), d_p, n_x, "C");
    a.x_init = detail::vector_from_json(ja.at("x_init"), n_x, "x_init");
    for (const nlohmann::json& r : ja.at("x_ref"))
      a.x_ref.push_back(detail::vector_from_json(r, n_x, "x_ref"));
    const nlohmann::json& b = ja.at("bounds");
    a.x_lb = detail::vector_from_json(b.at("x_lb"), n_x, "x_lb");
    a.x_ub = detail::vector_from_json(b.at("x_ub"), n_x, "x_ub");
    a.u_lb = detail::vector_from_json(b.at("u_lb"), n_u, "u_lb");
    a.u_ub = detail::vector_from_json(b.at("u_ub"), n_u, "u_ub");
    s.agents.push_back(std::move(a));
  }
  s.validate();
  return s;
}

inline void write_scenario(const Scenario& s, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << scenario_to_json(s).dump(2) << "\n";
}

inline Scenario read_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json j;
  is >> j;
  return scenario_from_json(j);
}

}  // namespace turboadmm
