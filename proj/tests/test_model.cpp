#include <doctest.h>

#include "turboadmm/model.hpp"

using namespace turboadmm;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("double integrator, unit timestep in 2D") {
  auto [A, B] = double_integrator(1.0, 2);
  Matrix A_expect(4, 4);
  A_expect << 1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1;
  Matrix B_expect(4, 2);
  B_expect << 0.5, 0, 0, 0.5, 1, 0, 0, 1;
  CHECK((A - A_expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK((B - B_expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("double integrator, half timestep in 1D") {
  auto [A, B] = double_integrator(0.5, 1);
  Matrix A_expect(2, 2);
  A_expect << 1, 0.5, 0, 1;
  Matrix B_expect(2, 1);
  B_expect << 0.125, 0.5;
  CHECK((A - A_expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK((B - B_expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("double integrator rejects degenerate parameters") {
  CHECK_THROWS_AS(double_integrator(0.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(double_integrator(-1.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(double_integrator(1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(double_integrator(1.0, 4), std::invalid_argument);
}

TEST_CASE("double integrator advances positions by dt times velocity") {
  for (int d_p : {1, 2, 3}) {
    auto [A, B] = double_integrator(0.25, d_p);
    Vector x = Vector::Random(2 * d_p);
    Vector next = A * x;
    CHECK((next.head(d_p) - (x.head(d_p) + 0.25 * x.tail(d_p))).cwiseAbs().maxCoeff() < 1e-15);
    (void)B;
  }
}

TEST_CASE("straight line reference interpolates uniformly") {
  auto ref = straight_line_reference(vec2(0, 0), vec2(10, 0), 10, 1.0);
  REQUIRE(ref.size() == 11);
  for (int t = 0; t <= 10; ++t) {
    CHECK(ref[t][0] == doctest::Approx(t).epsilon(1e-15));
    CHECK(ref[t][1] == 0.0);
    CHECK(ref[t][2] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ref[t][3] == 0.0);
  }
}

TEST_CASE("stationary reference has zero velocity") {
  auto ref = straight_line_reference(vec2(3, -4), vec2(3, -4), 5, 0.1);
  for (const Vector& x : ref) {
    CHECK((x.head(2) - vec2(3, -4)).norm() < 1e-14);
    CHECK(x.tail(2).norm() == 0.0);
  }
}

TEST_CASE("crossing reference velocity is distance over time") {
  auto ref = straight_line_reference(vec2(-8, 0), vec2(8, 0), 20, 1.0);
  CHECK(ref[7][2] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(ref[7][3] == 0.0);
}

TEST_CASE("circle scenario places antipodal start and goal") {
  Scenario s = circle_scenario(2, 8.0, 20, 1.0, 2.0);
  CHECK(s.agents[0].x_init.head(2).isApprox(vec2(8, 0), 1e-12));
  CHECK(s.agents[1].x_init.head(2).isApprox(vec2(-8, 0), 1e-12));
  // goals carry the deterministic micro-offset that breaks the crossing
  // symmetry, far below any physical scale
  CHECK((s.agents[0].x_ref.back().head(2) - vec2(-8, 0)).norm() < 1e-4);
  CHECK((s.agents[1].x_ref.back().head(2) - vec2(8, 0)).norm() < 1e-4);
  CHECK((s.agents[0].x_ref.back().head(2) - vec2(-8, 0)).norm() > 0.0);
}

TEST_CASE("four agents sit at quarter angles") {
  Scenario s = circle_scenario(4, 8.0, 20, 1.0, 2.0);
  CHECK(s.agents[0].x_init.head(2).isApprox(vec2(8, 0), 1e-12));
  CHECK(s.agents[1].x_init.head(2).isApprox(vec2(0, 8), 1e-12));
  CHECK(s.agents[2].x_init.head(2).isApprox(vec2(-8, 0), 1e-12));
  CHECK(s.agents[3].x_init.head(2).isApprox(vec2(0, -8), 1e-12));
}

TEST_CASE("references pass through the central disc") {
  Scenario s = circle_scenario(5, 8.0, 20, 1.0, 2.0);
  for (const AgentModel& a : s.agents) {
    double closest = 1e30;
    for (const Vector& x : a.x_ref) closest = std::min(closest, x.head(2).norm());
    CHECK(closest <= s.d_safe);
  }
}

TEST_CASE("circle scenario rejects a radius inside the safety distance") {
  CHECK_THROWS_AS(circle_scenario(4, 1.5, 20, 1.0, 2.0), std::invalid_argument);
}

TEST_CASE("generated scenarios satisfy the model invariants") {
  for (int n : {1, 2, 3, 7, 14}) {
    Scenario s = circle_scenario(n, 8.0, 20, 1.0, 2.0);
    CHECK_NOTHROW(s.validate());
  }
}

TEST_CASE("problem dimensions match the benchmark table") {
  struct Row {
    int n;
    long vars, dyn, pairs;
  };
  // variables / dynamics exact; pair-steps from N(N-1)/2 * T
  const Row rows[] = {{2, 248, 160, 20},
                      {4, 496, 320, 120},
                      {6, 744, 480, 300},
                      {10, 1240, 800, 900},
                      {14, 1736, 1120, 1820}};
  for (const Row& r : rows) {
    ProblemDimensions d = problem_dimensions(circle_scenario(r.n, 8.0, 20, 1.0, 2.0));
    CHECK(d.num_variables == r.vars);
    CHECK(d.num_dynamics_constraints == r.dyn);
    CHECK(d.num_collision_pair_steps == r.pairs);
  }
}

TEST_CASE("problem dimension formulas hold for every agent count") {
  for (int n = 1; n <= 14; ++n) {
    ProblemDimensions d = problem_dimensions(circle_scenario(n, 8.0, 20, 1.0, 2.0));
    CHECK(d.num_variables == n * (21 * 4 + 20 * 2));
    CHECK(d.num_dynamics_constraints == n * 20 * 4);
    CHECK(d.num_collision_pair_steps == static_cast<long>(n) * (n - 1) / 2 * 20);
  }
}

TEST_CASE("single agent scenario has no collision pairs") {
  ProblemDimensions d = problem_dimensions(circle_scenario(1, 8.0, 20, 1.0, 2.0));
  CHECK(d.num_variables == 124);
  CHECK(d.num_dynamics_constraints == 80);
  CHECK(d.num_collision_pair_steps == 0);
}

TEST_CASE("agent validation catches inconsistent data") {
  Scenario s = circle_scenario(2, 8.0, 20, 1.0, 2.0);
  AgentModel bad = s.agents[0];
  bad.x_init[0] = 100.0;  // outside the box
  CHECK_THROWS_AS(bad.validate(20), std::invalid_argument);

  bad = s.agents[0];
  bad.R(0, 0) = -1.0;
  CHECK_THROWS_AS(bad.validate(20), std::invalid_argument);

  bad = s.agents[0];
  bad.x_lb[1] = bad.x_ub[1] + 1.0;
  CHECK_THROWS_AS(bad.validate(20), std::invalid_argument);

  bad = s.agents[0];
  bad.C.setZero();
  CHECK_THROWS_AS(bad.validate(20), std::invalid_argument);
}

}  // TEST_SUITE
