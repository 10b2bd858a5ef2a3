#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hambvp/shooting.hpp"

using namespace hambvp;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

BoundaryCondition dirichlet1(double left, double right, double tau) {
  BoundaryCondition bc;
  bc.kind = BcKind::dirichlet;
  bc.left = vec1(left);
  bc.right = vec1(right);
  bc.tau = tau;
  return bc;
}

// Closed-form oracle for the combustion problem u'' + C e^u = 0 with
// u(0) = u(1) = 0: theta solves theta = sqrt(2C) cosh(theta/4) and the
// shooting value is u'(0) = theta tanh(theta/4). Two roots below the fold.
double bratu_theta(double C, bool upper) {
  auto f = [C](double th) { return th - std::sqrt(2 * C) * std::cosh(th / 4); };
  double peak = 4.0 * std::asinh(4.0 / std::sqrt(2 * C));
  double lo = upper ? peak : 0.0;
  double hi = upper ? 60.0 : peak;
  REQUIRE(f(lo) * f(hi) < 0.0);
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (f(lo) * f(mid) <= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

double bratu_p0(double C, bool upper) {
  double th = bratu_theta(C, upper);
  return th * std::tanh(th / 4);
}

ShootingProblem bratu_problem(int steps, double C) {
  return make_shooting_problem("bratu", "stormer-verlet", steps,
                               dirichlet1(0.0, 0.0, 1.0), vec1(C),
                               ParamBinding::mu(0));
}

}  // namespace

TEST_CASE("free flight: with C = 0 the residual is the unknown itself") {
  ShootingProblem prob = bratu_problem(16, 0.0);
  for (double p0 : {-1.5, 0.0, 2.25}) {
    ResidualEval ev = shooting_residual(prob, vec1(p0), 0.0);
    CHECK(ev.r[0] == doctest::Approx(p0).epsilon(1e-14));
  }
}

TEST_CASE("bratu oracle reproduces the known shooting values at C = 1.5") {
  // Frozen digits from the theta equation itself.
  double th1 = bratu_theta(1.5, false);
  double th2 = bratu_theta(1.5, true);
  CHECK(th1 == doctest::Approx(1.940).epsilon(5e-4));
  CHECK(th2 == doctest::Approx(9.58).epsilon(5e-3));
  double p_lo = bratu_p0(1.5, false);
  double p_hi = bratu_p0(1.5, true);
  CHECK(p_lo == doctest::Approx(0.8736).epsilon(5e-4));
  CHECK(p_hi == doctest::Approx(9.42).epsilon(5e-3));

  ShootingProblem prob = bratu_problem(400, 1.5);
  ResidualEval lo = shooting_residual(prob, vec1(p_lo), 1.5);
  CHECK(std::abs(lo.r[0]) <= 1e-4);
  ResidualEval hi = shooting_residual(prob, vec1(p_hi), 1.5);
  CHECK(std::abs(hi.r[0]) <= 2e-3);

  BvpSolution sol = newton_solve(prob, vec1(1.0), 1.5);
  CHECK(sol.iterations <= 8);
  CHECK(std::abs(sol.x[0] - p_lo) <= 1e-4);
  CHECK(sol.residual_norm <= 1e-11);

  BvpSolution sol_hi = newton_solve(prob, vec1(10.0), 1.5);
  CHECK(std::abs(sol_hi.x[0] - p_hi) <= 1e-3);
}

TEST_CASE("beyond the fold no solution exists") {
  ShootingProblem prob = bratu_problem(200, 4.0);
  CHECK_THROWS_AS(newton_solve(prob, vec1(1.0), 4.0), Error);
  CHECK_THROWS_AS(newton_solve(prob, vec1(10.0), 4.0), Error);
}

TEST_CASE("multistart finds exactly the known solution counts") {
  std::vector<Eigen::VectorXd> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(vec1(static_cast<double>(k)));

  SUBCASE("two solutions at C = 1.5") {
    ShootingProblem prob = bratu_problem(200, 1.5);
    auto sols = multistart_sweep(prob, 1.5, grid);
    REQUIRE(sols.size() == 2);
    CHECK(sols[0].x[0] < sols[1].x[0]);
    CHECK(sols[0].x[0] == doctest::Approx(bratu_p0(1.5, false)).epsilon(1e-3));
    CHECK(sols[1].x[0] == doctest::Approx(bratu_p0(1.5, true)).epsilon(1e-2));
  }
  SUBCASE("no solutions at C = 3.6") {
    ShootingProblem prob = bratu_problem(200, 3.6);
    auto sols = multistart_sweep(prob, 3.6, grid);
    CHECK(sols.empty());
  }
  SUBCASE("one solution for the linear oscillator") {
    ShootingProblem prob = make_shooting_problem(
        "harmonic", "stormer-verlet", 64, dirichlet1(0.0, 0.0, 1.0),
        Eigen::VectorXd(0));
    std::vector<Eigen::VectorXd> small_grid;
    for (double s : {-1.0, -0.3, 0.2, 0.9}) small_grid.push_back(vec1(s));
    auto sols = multistart_sweep(prob, 0.0, small_grid);
    REQUIRE(sols.size() == 1);
    CHECK(std::abs(sols[0].x[0]) <= 1e-9);
  }
}

TEST_CASE("residual jacobian agrees with finite differences") {
  ShootingProblem prob = bratu_problem(50, 2.0);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    double x = u(rng);
    ResidualEval ev = shooting_residual(prob, vec1(x), 2.0);
    const double fd = 1e-6;
    ResidualEval ep = shooting_residual(prob, vec1(x + fd), 2.0);
    ResidualEval em = shooting_residual(prob, vec1(x - fd), 2.0);
    double g = (ep.r[0] - em.r[0]) / (2 * fd);
    CHECK(std::abs(ev.jac_x(0, 0) - g) <= 1e-6 * std::max(1.0, std::abs(g)));
    // lambda = C direction
    ResidualEval lp = shooting_residual(prob, vec1(x), 2.0 + fd);
    ResidualEval lm = shooting_residual(prob, vec1(x), 2.0 - fd);
    double gl = (lp.r[0] - lm.r[0]) / (2 * fd);
    CHECK(std::abs(ev.jac_lambda[0] - gl) <=
          1e-6 * std::max(1.0, std::abs(gl)));
  }
}

TEST_CASE("newton converges quadratically away from folds") {
  ShootingProblem prob = bratu_problem(100, 1.5);
  // Track residual norms along the iteration by re-running with growing
  // iteration caps.
  std::vector<double> norms;
  Eigen::VectorXd x = vec1(1.6);
  for (int it = 0; it < 8; ++it) {
    ResidualEval ev = shooting_residual(prob, x, 1.5);
    norms.push_back(ev.r.norm());
    Eigen::VectorXd dx = ev.jac_x.partialPivLu().solve(ev.r);
    x -= dx;
  }
  // once r_k <= 1e-3, r_{k+1} <= C r_k^2 with a modest constant
  for (size_t k = 0; k + 1 < norms.size(); ++k) {
    if (norms[k] <= 1e-3 && norms[k] > 1e-14) {
      CHECK(norms[k + 1] <= 50.0 * norms[k] * norms[k] + 1e-15);
    }
  }
}

TEST_CASE("full flow jacobian is symplectic at solutions") {
  ShootingProblem prob = bratu_problem(100, 1.5);
  BvpSolution sol = newton_solve(prob, vec1(1.0), 1.5);
  FlowResult fr = flow(prob.method, *prob.sys, vec1(1.5), prob.mesh, sol.z0,
                       SeedSpec::state_only(2));
  CHECK(symplectic_defect(fr.jac) <= 1e-9);
}

TEST_CASE("multistart is deterministic across grid order and workers") {
  ShootingProblem prob = bratu_problem(120, 1.5);
  std::vector<Eigen::VectorXd> grid, shuffled;
  for (int k = 0; k <= 14; ++k) grid.push_back(vec1(0.5 + k));
  shuffled = grid;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(3));

  auto a = multistart_sweep(prob, 1.5, grid, Exec::serial);
  auto b = multistart_sweep(prob, 1.5, shuffled, Exec::serial);
  auto c = multistart_sweep(prob, 1.5, grid, Exec::parallel);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == c.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x[0] == b[i].x[0]);
    CHECK(a[i].x[0] == c[i].x[0]);
  }
}

TEST_CASE("neumann and periodic problems") {
  SUBCASE("harmonic neumann has the closed-form unique solution") {
    // p(0) = p(1) = c: q0 = c (cos 1 - 1) / sin 1.
    const double c = 0.8;
    BoundaryCondition bc;
    bc.kind = BcKind::neumann;
    bc.left = vec1(c);
    bc.right = vec1(c);
    bc.tau = 1.0;
    ShootingProblem prob = make_shooting_problem("harmonic", "rk4", 200, bc,
                                                 Eigen::VectorXd(0));
    BvpSolution sol = newton_solve(prob, vec1(0.0), 0.0);
    double expect = c * (std::cos(1.0) - 1.0) / std::sin(1.0);
    CHECK(sol.x[0] == doctest::Approx(expect).epsilon(1e-6));
  }
  SUBCASE("harmonic periodic over tau = 1 pins the origin") {
    BoundaryCondition bc;
    bc.kind = BcKind::periodic;
    bc.tau = 1.0;
    ShootingProblem prob = make_shooting_problem(
        "harmonic", "stormer-verlet", 64, bc, Eigen::VectorXd(0));
    Eigen::VectorXd x0(2);
    x0 << 0.3, -0.2;
    BvpSolution sol = newton_solve(prob, x0, 0.0);
    CHECK(sol.x.norm() <= 1e-9);
  }
}
