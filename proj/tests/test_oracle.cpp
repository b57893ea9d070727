#include <doctest.h>

#include <random>

#include "turboadmm/oracle.hpp"

using namespace turboadmm;

TEST_SUITE("oracle") {

TEST_CASE("equality solve recovers the unconstrained minimizer") {
  Matrix H = Matrix::Identity(2, 2);
  Vector g(2);
  g << -1, -2;
  auto [x, nu] = oracle::kkt_equality_solve(H, g, Matrix(0, 2), Vector(0));
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(nu.size() == 0);
}

TEST_CASE("equality solve on a single coupling row") {
  Matrix H = Matrix::Identity(2, 2);
  Vector g = Vector::Zero(2);
  Matrix A(1, 2);
  A << 1, 1;
  Vector b(1);
  b << 2;
  auto [x, nu] = oracle::kkt_equality_solve(H, g, A, b);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nu[0] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("equality solve rejects singular systems") {
  Matrix H = Matrix::Zero(2, 2);  // zero curvature on the null space
  Vector g(2);
  g << 1, 0;
  Matrix A(1, 2);
  A << 1, 0;
  Vector b(1);
  b << 1;
  CHECK_THROWS_AS(oracle::kkt_equality_solve(H, g, A, b), std::runtime_error);
}

TEST_CASE("brute force puts one variable on its upper bound") {
  QpData qp;
  qp.H = Matrix::Identity(1, 1);
  qp.g = Vector::Constant(1, -3.0);
  qp.A_eq = Matrix(0, 1);
  qp.b_eq = Vector(0);
  qp.lb = Vector::Constant(1, -kInfiniteBound);
  qp.ub = Vector::Constant(1, 1.0);
  QpSolution sol = oracle::brute_force_box_qp(qp);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.mu[0] == doctest::Approx(2.0).epsilon(1e-12));  // H x + g + mu = 0
  REQUIRE(sol.working_set.size() == 1);
  CHECK(sol.working_set[0] == 0);
}

TEST_CASE("all-infinite bounds reduce to the equality solve") {
  std::mt19937 rng(7);
  std::normal_distribution<double> dist;
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 4, m = 2;
    Matrix M = Matrix::NullaryExpr(n, n, [&] { return dist(rng); });
    QpData qp;
    qp.H = M.transpose() * M + 0.5 * Matrix::Identity(n, n);
    qp.g = Vector::NullaryExpr(n, [&] { return dist(rng); });
    qp.A_eq = Matrix::NullaryExpr(m, n, [&] { return dist(rng); });
    qp.b_eq = Vector::NullaryExpr(m, [&] { return dist(rng); });
    qp.lb = Vector::Constant(n, -kInfiniteBound);
    qp.ub = Vector::Constant(n, kInfiniteBound);
    QpSolution sol = oracle::brute_force_box_qp(qp);
    auto [x, nu] = oracle::kkt_equality_solve(qp.H, qp.g, qp.A_eq, qp.b_eq);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK((sol.x - x).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((sol.nu - nu).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("enumeration reports infeasible when equalities conflict with bounds") {
  QpData qp;
  qp.H = Matrix::Identity(1, 1);
  qp.g = Vector::Zero(1);
  qp.A_eq = Matrix::Identity(1, 1);
  qp.b_eq = Vector::Constant(1, 5.0);
  qp.lb = Vector::Constant(1, -1.0);
  qp.ub = Vector::Constant(1, 1.0);
  CHECK(oracle::brute_force_box_qp(qp).status == QpStatus::infeasible);
}

TEST_CASE("uniqueness check passes on a weakly active instance") {
  // minimizer exactly on the bound: both the free and the active pattern
  // produce the same point
  QpData qp;
  qp.H = Matrix::Identity(1, 1);
  qp.g = Vector::Constant(1, -1.0);
  qp.A_eq = Matrix(0, 1);
  qp.b_eq = Vector(0);
  qp.lb = Vector::Constant(1, -kInfiniteBound);
  qp.ub = Vector::Constant(1, 1.0);
  QpSolution sol = oracle::brute_force_box_qp(qp, /*check_uniqueness=*/true);
  CHECK(sol.x[0] == doctest::Approx(1.0));
}

TEST_CASE("size guard") {
  QpData qp;
  qp.H = Matrix::Identity(13, 13);
  qp.g = Vector::Zero(13);
  qp.A_eq = Matrix(0, 13);
  qp.b_eq = Vector(0);
  qp.lb = Vector::Constant(13, -1.0);
  qp.ub = Vector::Constant(13, 1.0);
  CHECK_THROWS_AS(oracle::brute_force_box_qp(qp), std::invalid_argument);
}

TEST_CASE("separation of two stationary agents") {
  std::vector<std::vector<Vector>> traj(2);
  Vector a(4), b(4);
  a << 0, 0, 0, 0;
  b << 3, 0, 0, 0;
  for (int t = 0; t < 5; ++t) {
    traj[0].push_back(a);
    traj[1].push_back(b);
  }
  CHECK(oracle::min_separation(traj, 2) == doctest::Approx(3.0));
}

TEST_CASE("tracking error vanishes on an exactly tracked terminal point") {
  std::vector<Vector> traj{Vector::Zero(4), Vector::Ones(4)};
  std::vector<Vector> ref{Vector::Zero(4), Vector::Ones(4)};
  CHECK(oracle::tracking_error(traj, ref, 2) == 0.0);
  ref.back()[0] += 3.0;
  ref.back()[1] += 4.0;
  CHECK(oracle::tracking_error(traj, ref, 2) == doctest::Approx(5.0));
}

}  // TEST_SUITE
