#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "hambvp/classify.hpp"
#include "hambvp/integrate.hpp"
#include "hambvp/normal_forms.hpp"
#include "hambvp/parallel.hpp"

namespace hambvp {

/// One point of a level bifurcation set: a parameter location at which a
/// singular solution exists, with the phase-space witness attached.
struct LbsPoint {
  Eigen::VectorXd params;
  SingClass cls = SingClass::A2;
  Eigen::VectorXd witness;
  double det = 0.0;
};

struct LevelBifurcationSet {
  std::vector<LbsPoint> points;
  std::vector<std::string> param_names;
  std::vector<std::string> witness_names;
};

struct NormalFormScanOptions {
  double xy_lo = -1.2;
  double xy_hi = 1.2;
  int grid = 128;  // phase resolution per axis (>= 32)
  double mu3_lo = -0.8;
  double mu3_hi = 0.8;
  int mu3_slices = 33;
};

/// Scan of the D4 normal-form fields: singular points (det DF = 0) are
/// bracketed along grid lines, polished by 1D Newton and pushed forward to
/// (mu1, mu2, mu3).
LevelBifurcationSet level_set_normal_form(NormalFormProblem::Type type,
                                          double epsilon,
                                          const NormalFormScanOptions& opts,
                                          Exec exec = Exec::parallel);

struct NormalFormAnalysis {
  LevelBifurcationSet set;  // scan points plus refined cusp/swallowtail points
  std::vector<SingularityRecord> umbilics;
  std::vector<SingularityRecord> cusps;
  std::vector<SingularityRecord> swallowtails;
};

/// Level set plus refined features: corank-2 points, cusp points
/// (det = 0, reduced quadratic term = 0) and swallowtail points (reduced
/// cubic term also zero).
NormalFormAnalysis analyze_normal_form(NormalFormProblem::Type type,
                                       double epsilon,
                                       const NormalFormScanOptions& opts,
                                       Exec exec = Exec::parallel);

/// Corank-2 search for the normal forms: all four entries of the field
/// Jacobian driven to zero over (x, y, mu3) by Gauss-Newton. Empty when the
/// perturbation obstructs rank deficiency.
std::vector<SingularityRecord> find_corank2_normal_form(
    NormalFormProblem::Type type, double epsilon,
    const NormalFormScanOptions& opts);

/// Dirichlet configuration with a fixed first boundary component and scan
/// variables (q2, p1, p2); the level set is
/// { (q2, phi^Q) : det D_p phi^Q = 0 }.
struct ShootingScanConfig {
  const System* sys = nullptr;
  Method method;
  Mesh mesh;
  double q1_fixed = 0.0;
  Eigen::VectorXd mu;
  Eigen::Vector3d lo{-1.0, -1.0, -1.0};
  Eigen::Vector3d hi{1.0, 1.0, 1.0};
  int grid = 40;
  int seed_grid = 5;
  double corank2_tol = 1e-8;
};

/// Gauss-Newton on the four entries of D_p phi^Q from a seed grid. Accepted
/// points (all entries <= corank2_tol) are classified through the cubic of
/// the reduced generating family, built from D_p phi^P and the second
/// p-derivatives of phi^Q.
std::vector<SingularityRecord> find_corank2_shooting(
    const ShootingScanConfig& cfg, Exec exec = Exec::parallel);

LevelBifurcationSet level_set_shooting(const ShootingScanConfig& cfg,
                                       Exec exec = Exec::parallel);

/// Fold locus of the cusp model x^4 + mu2 x^2 + mu1 x, parametrized as
/// (mu1, mu2) = (8t^3, -6t^2); each sample satisfies g' = g'' = 0 at x = t.
struct CuspFoldSample {
  double t;
  double mu1;
  double mu2;
};
std::vector<CuspFoldSample> cusp_fold_locus(int samples, double t_lo,
                                            double t_hi);

}  // namespace hambvp
