#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "hambvp/integrate.hpp"
#include "hambvp/parallel.hpp"

namespace hambvp {

enum class BcKind { dirichlet, neumann, periodic };

/// Lagrangian boundary data. Dirichlet fixes q at both ends (left = q*,
/// right = Q*), Neumann fixes p (left = p*, right = P*), periodic asks for
/// z(tau) = z(0) and carries no data vectors.
struct BoundaryCondition {
  BcKind kind = BcKind::dirichlet;
  Eigen::VectorXd left;
  Eigen::VectorXd right;
  double tau = 1.0;
};

/// What the continuation parameter lambda controls: a Hamiltonian parameter
/// or one component of the boundary data. `none` for problems without a
/// parameter.
struct ParamBinding {
  enum class Target { none, mu, left_q, left_p, right_q, right_p };
  Target target = Target::none;
  int index = 0;

  static ParamBinding mu(int index) {
    return ParamBinding{Target::mu, index};
  }
};

/// Hamiltonian system + integrator + mesh + boundary condition, reduced to
/// a residual map on an m-dimensional unknown (m = n for Dirichlet/Neumann,
/// m = 2n for periodic).
struct ShootingProblem {
  const System* sys = nullptr;
  Method method;
  Mesh mesh;
  BoundaryCondition bc;
  Eigen::VectorXd mu0;
  ParamBinding lambda;

  int unknown_dim() const {
    return bc.kind == BcKind::periodic ? 2 * sys->dof() : sys->dof();
  }
};

ShootingProblem make_shooting_problem(const std::string& system,
                                      const std::string& method, int steps,
                                      BoundaryCondition bc,
                                      Eigen::VectorXd mu0,
                                      ParamBinding lambda = {});

struct ResidualEval {
  Eigen::VectorXd r;
  Eigen::MatrixXd jac_x;
  Eigen::VectorXd jac_lambda;
  FlowResult flow;
};

/// Residual of the reduced boundary map at unknown x and parameter value
/// lambda, with the Jacobian assembled from the same jet flow.
ResidualEval shooting_residual(const ShootingProblem& prob,
                               const Eigen::VectorXd& x, double lambda,
                               bool record_trajectory = false);

struct NewtonOptions {
  double tol = 1e-11;
  int max_iter = 40;
  int max_halvings = 10;
  double singular_cond = 1e12;
};

struct BvpSolution {
  Eigen::VectorXd x;
  PhasePoint z0;
  double lambda = 0.0;
  double residual_norm = 0.0;
  FlowResult flow;
  int iterations = 0;
  bool near_singular = false;
};

/// Damped Newton on the shooting residual. Steps are halved until the
/// residual norm decreases; a residual Jacobian with condition number above
/// NewtonOptions::singular_cond switches to a pseudo-inverse step and marks
/// the solution near_singular.
BvpSolution newton_solve(const ShootingProblem& prob, Eigen::VectorXd x0,
                         double lambda, const NewtonOptions& opts = {});

/// Runs newton_solve from every start in the grid, drops failures, and
/// returns the distinct solutions sorted ascending by first component.
/// Output is independent of grid order and worker count.
std::vector<BvpSolution> multistart_sweep(const ShootingProblem& prob,
                                          double lambda,
                                          const std::vector<Eigen::VectorXd>& grid,
                                          Exec exec = Exec::parallel,
                                          int* dropped = nullptr,
                                          const NewtonOptions& opts = {});

/// Initial phase point assembled from the boundary data, the unknown and
/// the bound parameter.
PhasePoint initial_point(const ShootingProblem& prob, const Eigen::VectorXd& x,
                         double lambda);

/// Effective Hamiltonian parameters after applying the binding.
Eigen::VectorXd effective_mu(const ShootingProblem& prob, double lambda);

}  // namespace hambvp
