#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hambvp/parallel.hpp"
#include "hambvp/shooting.hpp"

namespace hambvp {

/// One-parameter residual family r(x; lambda) with Jacobians. Continuation,
/// fold detection and the singularity metrics all work against this
/// interface; shooting problems and the polynomial model families both
/// implement it.
class ResidualFamily {
 public:
  virtual ~ResidualFamily() = default;

  struct Eval {
    Eigen::VectorXd r;
    Eigen::MatrixXd jx;
    Eigen::VectorXd jl;
  };

  virtual int dim() const = 0;
  virtual Eval eval(const Eigen::VectorXd& x, double lambda) const = 0;

  /// Scalar plotted on the diagram's vertical axis. Base implementation
  /// understands "x0", "x1", ... (components of the unknown).
  virtual double functional(const std::string& id, const Eigen::VectorXd& x,
                            double lambda) const;
};

/// Family backed by a shooting problem; adds the trajectory functionals
/// "l2norm-q" (trapezoidal L2 norm of q over the mesh) and "energy".
class ShootingFamily : public ResidualFamily {
 public:
  explicit ShootingFamily(ShootingProblem prob) : prob_(std::move(prob)) {}
  int dim() const override { return prob_.unknown_dim(); }
  Eval eval(const Eigen::VectorXd& x, double lambda) const override;
  double functional(const std::string& id, const Eigen::VectorXd& x,
                    double lambda) const override;
  const ShootingProblem& problem() const { return prob_; }

 private:
  ShootingProblem prob_;
};

/// Family from plain callables, with finite-difference Jacobians when the
/// analytic ones are not supplied.
class CallableFamily : public ResidualFamily {
 public:
  using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;
  using JxFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)>;
  CallableFamily(int dim, Fn f, JxFn jx = {})
      : dim_(dim), f_(std::move(f)), jx_(std::move(jx)) {}
  int dim() const override { return dim_; }
  Eval eval(const Eigen::VectorXd& x, double lambda) const override;

 private:
  int dim_;
  Fn f_;
  JxFn jx_;
};

enum class PointTag { regular, fold, corank2_candidate };

struct BranchPoint {
  double lambda = 0.0;
  Eigen::VectorXd x;
  double functional = 0.0;
  double det = 0.0;
  Eigen::VectorXd tangent;  // (dx/ds, dlambda/ds), unit length
  PointTag tag = PointTag::regular;
  double min_sv_rel = 1.0;  // sigma_min / sigma_max of jx
};

struct Branch {
  std::vector<BranchPoint> points;
  int id = 0;
  std::string provenance;

  const BranchPoint* fold() const {
    for (const auto& p : points)
      if (p.tag == PointTag::fold) return &p;
    return nullptr;
  }
  std::vector<const BranchPoint*> folds() const {
    std::vector<const BranchPoint*> out;
    for (const auto& p : points)
      if (p.tag == PointTag::fold) out.push_back(&p);
    return out;
  }
};

struct TraceOptions {
  double ds = 0.02;
  double lambda_min = -1.0;
  double lambda_max = 1.0;
  int max_points = 4000;
  double corrector_tol = 1e-10;
  int max_halvings = 5;
  std::string functional = "x0";
  int direction = +1;  // initial sign of dlambda/ds when meaningful
  bool refine_folds = true;
};

/// Newton at fixed lambda. Returns nothing if the iteration does not reach
/// tol within max_iter steps.
std::optional<Eigen::VectorXd> family_newton(const ResidualFamily& family,
                                             Eigen::VectorXd x, double lambda,
                                             double tol = 1e-11,
                                             int max_iter = 40);

/// Secant-predictor / orthogonal-corrector pseudo-arclength tracing from a
/// converged seed. Folds are bracketed by the sign of the tangent's lambda
/// component and refined by bisection to |dlambda/ds| <= 1e-10.
Branch trace_branch(const ResidualFamily& family, const Eigen::VectorXd& x0,
                    double lambda0, const TraceOptions& opts);

/// Refined fold points of an already-traced branch.
std::vector<BranchPoint> detect_fold(const ResidualFamily& family,
                                     const Branch& branch,
                                     double tol = 1e-10);

struct DiagramOptions {
  std::vector<double> seed_lambdas;
  std::vector<Eigen::VectorXd> start_grid;
  TraceOptions trace;
};

struct Diagram {
  std::vector<Branch> branches;
  std::string functional;
};

/// Multistart at each seed lambda, then one branch per distinct solution
/// curve. Branch ids follow the (seed lambda, seed x) order, so the result
/// is deterministic.
Diagram diagram(const ResidualFamily& family, const DiagramOptions& opts,
                Exec exec = Exec::parallel);

struct SweepOptions {
  double lambda_lo = 0.0;
  double lambda_hi = 1.0;
  double lambda_step = 0.01;
  std::vector<Eigen::VectorXd> start_grid;
  int refresh_every = 10;  // multistart refresh cadence along the sweep
  std::string functional = "x0";
  double newton_tol = 1e-11;
};

/// Natural-parameter diagram: roots are enumerated on a lambda grid
/// (polishing each tracked root, with periodic multistart refreshes) and
/// linked across lambda into branches. Two tracks that merge are joined
/// through a fold point refined by the bordered turning-point system. This
/// builder keeps distinct branches apart even when they pass within far
/// less than any feasible arclength step of each other, which is exactly
/// the situation near a barely broken pitchfork.
Diagram sweep_diagram(const ResidualFamily& family, const SweepOptions& opts,
                      Exec exec = Exec::parallel);

/// Distance between two branches interpreted as curves: points of `a` are
/// matched against `b` at equal lambda (within fold-free segments) after a
/// Newton polish. Used by the step-halving and reversibility checks.
double branch_curve_distance(const ResidualFamily& family, const Branch& a,
                             const Branch& b);

}  // namespace hambvp
