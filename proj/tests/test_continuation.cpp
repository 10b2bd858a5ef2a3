#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hambvp/continuation.hpp"

using namespace hambvp;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

ShootingFamily bratu_family(int steps) {
  BoundaryCondition bc;
  bc.kind = BcKind::dirichlet;
  bc.left = vec1(0.0);
  bc.right = vec1(0.0);
  bc.tau = 1.0;
  return ShootingFamily(make_shooting_problem("bratu", "stormer-verlet",
                                              steps, bc, vec1(1.0),
                                              ParamBinding::mu(0)));
}

// Critical points of the cusp model x^4 + mu2 x^2 + mu1 x at fixed mu2,
// lambda = mu1: r = 4x^3 + 2 mu2 x + lambda.
CallableFamily cusp_slice_family(double mu2) {
  return CallableFamily(
      1,
      [mu2](const Eigen::VectorXd& x, double lam) {
        Eigen::VectorXd r(1);
        r[0] = 4 * x[0] * x[0] * x[0] + 2 * mu2 * x[0] + lam;
        return r;
      },
      [mu2](const Eigen::VectorXd& x, double) {
        Eigen::MatrixXd j(1, 1);
        j(0, 0) = 12 * x[0] * x[0] + 2 * mu2;
        return j;
      });
}

}  // namespace

TEST_CASE("bratu branch turns at the critical parameter") {
  ShootingFamily fam = bratu_family(200);
  TraceOptions opts;
  opts.ds = 0.05;
  opts.lambda_min = 0.05;
  opts.lambda_max = 4.0;
  opts.direction = +1;

  auto seed = family_newton(fam, vec1(0.6), 0.5);
  REQUIRE(seed.has_value());
  Branch branch = trace_branch(fam, *seed, 0.5, opts);
  REQUIRE(branch.points.size() > 10);

  // every point solves the problem
  for (const auto& p : branch.points) {
    CHECK(fam.eval(p.x, p.lambda).r.norm() <= 1e-9);
  }

  auto folds = branch.folds();
  REQUIRE(folds.size() == 1);
  CHECK(folds[0]->lambda == doctest::Approx(3.513830719).epsilon(6e-4));
  CHECK(std::abs(folds[0]->tangent[1]) <= 1e-10);
  CHECK(folds[0]->min_sv_rel <= 1e-6);

  // the trace continues onto the upper family after the turn
  double max_x = 0.0;
  for (const auto& p : branch.points) max_x = std::max(max_x, p.x[0]);
  CHECK(max_x > 5.0);

  // consecutive points never jump more than 2 ds in (lambda, x)
  for (size_t i = 0; i + 1 < branch.points.size(); ++i) {
    double d = std::hypot(branch.points[i + 1].lambda - branch.points[i].lambda,
                          (branch.points[i + 1].x - branch.points[i].x).norm());
    CHECK(d <= 2.0 * opts.ds + 1e-12);
  }
}

TEST_CASE("straight branch of a linear problem has zero folds") {
  // Harmonic oscillator with a dummy parameter: the solution x = 0 is
  // independent of lambda.
  CallableFamily fam(
      1,
      [](const Eigen::VectorXd& x, double) {
        Eigen::VectorXd r(1);
        r[0] = std::sin(1.0) * x[0];
        return r;
      },
      [](const Eigen::VectorXd&, double) {
        Eigen::MatrixXd j(1, 1);
        j(0, 0) = std::sin(1.0);
        return j;
      });
  TraceOptions opts;
  opts.ds = 0.1;
  opts.lambda_min = 0.0;
  opts.lambda_max = 2.0;
  Branch b = trace_branch(fam, vec1(0.0), 0.0, opts);
  CHECK(b.folds().empty());
  CHECK(detect_fold(fam, b).empty());
  for (const auto& p : b.points) CHECK(std::abs(p.x[0]) <= 1e-12);
  CHECK(b.points.back().lambda == doctest::Approx(2.0));
}

TEST_CASE("cusp slice has the two closed-form folds") {
  // Folds of 4x^3 + 2 mu2 x + mu1 = 0 at mu2 = -1 sit at
  // mu1 = -+ 8 (1/6)^{3/2}: elimination of x from g' = g'' = 0.
  const double fold_mu1 = 8.0 * std::pow(1.0 / 6.0, 1.5);
  CallableFamily fam = cusp_slice_family(-1.0);
  TraceOptions opts;
  opts.ds = 0.02;
  opts.lambda_min = -2.0;
  opts.lambda_max = 2.0;
  Branch b = trace_branch(fam, vec1(0.7), -1.0, opts);
  auto folds = b.folds();
  REQUIRE(folds.size() == 2);
  double lo = std::min(folds[0]->lambda, folds[1]->lambda);
  double hi = std::max(folds[0]->lambda, folds[1]->lambda);
  CHECK(lo == doctest::Approx(-fold_mu1).epsilon(1e-8));
  CHECK(hi == doctest::Approx(fold_mu1).epsilon(1e-8));
  for (auto* f : folds) CHECK(f->min_sv_rel <= 1e-6);
}

TEST_CASE("halving the arclength step keeps the same curve") {
  ShootingFamily fam = bratu_family(60);
  TraceOptions coarse;
  coarse.ds = 0.02;
  coarse.lambda_min = 0.4;
  coarse.lambda_max = 1.6;
  auto seed = family_newton(fam, vec1(0.6), 0.5);
  REQUIRE(seed.has_value());
  Branch a = trace_branch(fam, *seed, 0.5, coarse);
  TraceOptions fine = coarse;
  fine.ds = 0.01;
  Branch b = trace_branch(fam, *seed, 0.5, fine);
  CHECK(branch_curve_distance(fam, b, a) <= 1e-6);
}

TEST_CASE("tracing from the far end reproduces the same curve") {
  ShootingFamily fam = bratu_family(60);
  TraceOptions opts;
  opts.ds = 0.02;
  opts.lambda_min = 0.4;
  opts.lambda_max = 1.6;
  auto seed_lo = family_newton(fam, vec1(0.5), 0.4);
  REQUIRE(seed_lo.has_value());
  Branch fwd = trace_branch(fam, *seed_lo, 0.4, opts);

  TraceOptions back = opts;
  back.direction = -1;
  auto seed_hi = family_newton(fam, vec1(1.5), 1.6);
  REQUIRE(seed_hi.has_value());
  Branch rev = trace_branch(fam, *seed_hi, 1.6, back);

  CHECK(branch_curve_distance(fam, fwd, rev) <= 1e-6);
  CHECK(branch_curve_distance(fam, rev, fwd) <= 1e-6);
}

TEST_CASE("diagram assembles branches and functionals") {
  ShootingFamily fam = bratu_family(100);
  DiagramOptions opts;
  opts.seed_lambdas = {0.5, 2.0};
  for (int k = 0; k <= 20; k += 2)
    opts.start_grid.push_back(vec1(static_cast<double>(k)));
  opts.trace.ds = 0.05;
  opts.trace.lambda_min = 0.05;
  opts.trace.lambda_max = 4.0;
  opts.trace.functional = "l2norm-q";

  Diagram dia = diagram(fam, opts);
  REQUIRE(dia.branches.size() >= 1);
  // the fold-back curve: exactly one fold over all branches
  int folds = 0;
  for (const auto& b : dia.branches) folds += static_cast<int>(b.folds().size());
  CHECK(folds == 1);
  // l2 norms are positive on nontrivial solutions and increase along the
  // upper limb
  for (const auto& b : dia.branches)
    for (const auto& p : b.points) CHECK(p.functional >= 0.0);
}

TEST_CASE("l2norm of the zero trajectory vanishes") {
  BoundaryCondition bc;
  bc.kind = BcKind::dirichlet;
  bc.left = vec1(0.0);
  bc.right = vec1(0.0);
  bc.tau = 1.0;
  ShootingFamily fam(make_shooting_problem("harmonic", "stormer-verlet", 32,
                                           bc, Eigen::VectorXd(0)));
  CHECK(fam.functional("l2norm-q", vec1(0.0), 0.0) == doctest::Approx(0.0));
}

TEST_CASE("empty diagram raises") {
  ShootingFamily fam = bratu_family(100);
  DiagramOptions opts;
  opts.seed_lambdas = {3.8};  // beyond the fold: no solutions
  for (int k = 0; k <= 12; k += 3)
    opts.start_grid.push_back(vec1(static_cast<double>(k)));
  opts.trace.lambda_min = 3.6;
  opts.trace.lambda_max = 4.0;
  CHECK_THROWS_AS(diagram(fam, opts), EmptyDiagramError);
}

TEST_CASE("corrector failure at the seed raises") {
  ShootingFamily fam = bratu_family(100);
  TraceOptions opts;
  opts.lambda_min = 3.6;
  opts.lambda_max = 4.0;
  CHECK_THROWS_AS(trace_branch(fam, vec1(1.0), 3.8, opts), Error);
}
