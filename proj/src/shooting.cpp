#include "hambvp/shooting.hpp"

#include <algorithm>
#include <cmath>

#include "hambvp/errors.hpp"

namespace hambvp {

namespace {

void check_problem(const ShootingProblem& prob) {
  if (!prob.sys) throw Error("shooting problem has no system");
  const int n = prob.sys->dof();
  if (prob.bc.kind != BcKind::periodic) {
    if (prob.bc.left.size() != n || prob.bc.right.size() != n)
      throw DimensionError("boundary data length must match system dof");
  }
  if (prob.mu0.size() != prob.sys->param_count())
    throw DimensionError("mu0 length must match system parameter count");
  if (std::abs(prob.mesh.tau() - prob.bc.tau) > 1e-12)
    throw MeshError("mesh duration differs from boundary-condition tau");
}

}  // namespace

ShootingProblem make_shooting_problem(const std::string& system,
                                      const std::string& method, int steps,
                                      BoundaryCondition bc,
                                      Eigen::VectorXd mu0,
                                      ParamBinding lambda) {
  ShootingProblem prob;
  prob.sys = &system_by_name(system);
  prob.method = method_by_name(method);
  prob.mesh = make_mesh(MeshKind::uniform, steps, bc.tau);
  prob.bc = std::move(bc);
  prob.mu0 = std::move(mu0);
  prob.lambda = lambda;
  check_problem(prob);
  return prob;
}

Eigen::VectorXd effective_mu(const ShootingProblem& prob, double lambda) {
  Eigen::VectorXd mu = prob.mu0;
  if (prob.lambda.target == ParamBinding::Target::mu)
    mu[prob.lambda.index] = lambda;
  return mu;
}

PhasePoint initial_point(const ShootingProblem& prob, const Eigen::VectorXd& x,
                         double lambda) {
  const int n = prob.sys->dof();
  using T = ParamBinding::Target;
  switch (prob.bc.kind) {
    case BcKind::dirichlet: {
      Eigen::VectorXd q = prob.bc.left;
      if (prob.lambda.target == T::left_q) q[prob.lambda.index] = lambda;
      return PhasePoint(q, x);
    }
    case BcKind::neumann: {
      Eigen::VectorXd p = prob.bc.left;
      if (prob.lambda.target == T::left_p) p[prob.lambda.index] = lambda;
      return PhasePoint(x, p);
    }
    case BcKind::periodic:
      if (x.size() != 2 * n)
        throw DimensionError("periodic unknown must have length 2n");
      return PhasePoint::from_flat(x);
  }
  throw Error("unhandled boundary kind");
}

ResidualEval shooting_residual(const ShootingProblem& prob,
                               const Eigen::VectorXd& x, double lambda,
                               bool record_trajectory) {
  check_problem(prob);
  const int n = prob.sys->dof();
  const int m = prob.unknown_dim();
  if (x.size() != m) throw DimensionError("unknown has wrong length");
  using T = ParamBinding::Target;

  SeedSpec seeds;
  seeds.record_trajectory = record_trajectory;
  switch (prob.bc.kind) {
    case BcKind::dirichlet:
      for (int i = 0; i < n; ++i) seeds.state_dirs.push_back(n + i);
      break;
    case BcKind::neumann:
      for (int i = 0; i < n; ++i) seeds.state_dirs.push_back(i);
      break;
    case BcKind::periodic:
      for (int i = 0; i < 2 * n; ++i) seeds.state_dirs.push_back(i);
      break;
  }
  // The parameter direction, when it needs a seed of its own.
  bool lambda_seeded = false;
  if (prob.lambda.target == T::mu) {
    seeds.param_dirs.push_back(prob.lambda.index);
    lambda_seeded = true;
  } else if (prob.lambda.target == T::left_q &&
             prob.bc.kind == BcKind::dirichlet) {
    seeds.state_dirs.push_back(prob.lambda.index);
    lambda_seeded = true;
  } else if (prob.lambda.target == T::left_p &&
             prob.bc.kind == BcKind::neumann) {
    seeds.state_dirs.push_back(n + prob.lambda.index);
    lambda_seeded = true;
  }

  PhasePoint z0 = initial_point(prob, x, lambda);
  Eigen::VectorXd mu = effective_mu(prob, lambda);
  FlowResult fr = flow(prob.method, *prob.sys, mu, prob.mesh, z0, seeds);

  ResidualEval out;
  out.r.resize(m);
  out.jac_x.resize(m, m);
  out.jac_lambda = Eigen::VectorXd::Zero(m);
  switch (prob.bc.kind) {
    case BcKind::dirichlet: {
      Eigen::VectorXd target = prob.bc.right;
      if (prob.lambda.target == T::right_q) target[prob.lambda.index] = lambda;
      out.r = fr.end.q - target;
      out.jac_x = fr.jac.topRows(n).leftCols(m);
      if (lambda_seeded) out.jac_lambda = fr.jac.topRows(n).col(m);
      if (prob.lambda.target == T::right_q)
        out.jac_lambda[prob.lambda.index] -= 1.0;
      break;
    }
    case BcKind::neumann: {
      Eigen::VectorXd target = prob.bc.right;
      if (prob.lambda.target == T::right_p) target[prob.lambda.index] = lambda;
      out.r = fr.end.p - target;
      out.jac_x = fr.jac.bottomRows(n).leftCols(m);
      if (lambda_seeded) out.jac_lambda = fr.jac.bottomRows(n).col(m);
      if (prob.lambda.target == T::right_p)
        out.jac_lambda[prob.lambda.index] -= 1.0;
      break;
    }
    case BcKind::periodic: {
      out.r = fr.end.flat() - x;
      out.jac_x = fr.jac.leftCols(m) - Eigen::MatrixXd::Identity(m, m);
      if (lambda_seeded) out.jac_lambda = fr.jac.col(m);
      break;
    }
  }
  out.flow = std::move(fr);
  return out;
}

namespace {

BvpSolution finish_solution(const ShootingProblem& prob,
                            const Eigen::VectorXd& x, double lambda,
                            double rn, int iterations, bool near_singular) {
  BvpSolution sol;
  sol.x = x;
  sol.lambda = lambda;
  sol.z0 = initial_point(prob, x, lambda);
  sol.residual_norm = rn;
  sol.iterations = iterations;
  sol.near_singular = near_singular;
  ResidualEval fin = shooting_residual(prob, x, lambda, true);
  sol.flow = std::move(fin.flow);
  return sol;
}

}  // namespace

BvpSolution newton_solve(const ShootingProblem& prob, Eigen::VectorXd x0,
                         double lambda, const NewtonOptions& opts) {
  const int m = prob.unknown_dim();
  if (x0.size() != m) throw DimensionError("start vector has wrong length");
  Eigen::VectorXd x = std::move(x0);
  ResidualEval ev = shooting_residual(prob, x, lambda);
  double rn = ev.r.norm();
  bool near_singular = false;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (rn <= opts.tol)
      return finish_solution(prob, x, lambda, rn, iter, near_singular);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        ev.jac_x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0), smin = sv(sv.size() - 1);
    Eigen::VectorXd dx;
    if (smin <= 0.0 || smax / smin > opts.singular_cond) {
      // Near-singular Jacobian: truncated pseudo-inverse step; the caller
      // sees the near-bifurcation warning on the solution.
      near_singular = true;
      svd.setThreshold(1e-12);
      dx = svd.solve(ev.r);
    } else {
      dx = ev.jac_x.partialPivLu().solve(ev.r);
    }

    double t = 1.0;
    ResidualEval trial;
    double trial_rn;
    for (int halvings = 0;; ++halvings) {
      trial = shooting_residual(prob, x - t * dx, lambda);
      trial_rn = trial.r.norm();
      if (trial_rn < rn || halvings >= opts.max_halvings) break;
      t *= 0.5;
    }
    x -= t * dx;
    ev = std::move(trial);
    rn = trial_rn;
  }
  if (rn <= opts.tol)
    return finish_solution(prob, x, lambda, rn, opts.max_iter, near_singular);
  throw NonConvergence("newton_solve: no convergence after " +
                       std::to_string(opts.max_iter) +
                       " iterations, residual " + std::to_string(rn));
}

std::vector<BvpSolution> multistart_sweep(
    const ShootingProblem& prob, double lambda,
    const std::vector<Eigen::VectorXd>& grid, Exec exec, int* dropped,
    const NewtonOptions& opts) {
  if (grid.empty()) throw Error("multistart grid must be nonempty");
  std::vector<std::optional<BvpSolution>> found(grid.size());
  for_each_index(exec, static_cast<int>(grid.size()), [&](int i) {
    try {
      found[static_cast<size_t>(i)] =
          newton_solve(prob, grid[static_cast<size_t>(i)], lambda, opts);
    } catch (const Error&) {
      // non-converged or diverged starts are dropped and counted
    }
  });

  std::vector<BvpSolution> sols;
  int drop_count = 0;
  for (auto& f : found) {
    if (f)
      sols.push_back(std::move(*f));
    else
      ++drop_count;
  }
  std::sort(sols.begin(), sols.end(),
            [](const BvpSolution& a, const BvpSolution& b) {
              for (int i = 0; i < a.x.size(); ++i) {
                if (a.x[i] != b.x[i]) return a.x[i] < b.x[i];
              }
              return false;
            });
  std::vector<BvpSolution> unique;
  for (auto& s : sols) {
    bool dup = false;
    for (const auto& u : unique) {
      if ((u.x - s.x).norm() <= 1e-6) {
        dup = true;
        break;
      }
    }
    if (!dup) unique.push_back(std::move(s));
  }
  if (dropped) *dropped = drop_count;
  return unique;
}

}  // namespace hambvp
