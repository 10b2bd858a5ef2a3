#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace hambvp {

enum class SingClass { A1, A2, A3, A4, D4plus, D4minus, degenerate };
std::string to_string(SingClass c);

/// Classified bifurcation point. Corank-1 records carry the reduced
/// directional derivatives d2..d4 along the kernel; corank-2 records carry
/// the cubic form coefficients and its discriminant.
struct SingularityRecord {
  SingClass cls = SingClass::degenerate;
  Eigen::VectorXd phase;   // witness in phase/scan space
  Eigen::VectorXd params;  // location in parameter space
  int corank = 0;
  std::vector<Eigen::VectorXd> kernel;
  double d2 = 0.0, d3 = 0.0, d4 = 0.0;
  double cubic[4] = {0, 0, 0, 0};  // a, b, c, d
  double discriminant = 0.0;
};

/// R^m -> R^m field with an optional analytic Jacobian (finite differences
/// otherwise).
struct FieldFn {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jac;

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z, double fd = 1e-7) const;
};

/// Derivatives of the Lyapunov-Schmidt reduced scalar along the kernel of a
/// corank-1 singular point: psi(t) = w . F(z0 + t v + correction), where the
/// correction solves the range part of F = 0. d2 = psi'', d3 = psi''',
/// d4 = psi''''(0), from Richardson-extrapolated central differences.
struct LineReduction {
  double d2 = 0.0, d3 = 0.0, d4 = 0.0;
  Eigen::VectorXd v;  // right kernel direction (unit)
  Eigen::VectorXd w;  // left kernel direction (unit)
  double sv_ratio = 0.0;  // sigma_min / sigma_max of DF
};
LineReduction reduce_corank1(const FieldFn& F, const Eigen::VectorXd& z0,
                             double h = 1e-2);

/// A2/A3/A4 decision from the reduced derivatives: A2 if d2 != 0, A3 if
/// d2 ~ 0 and d3 != 0, A4 if d2, d3 ~ 0 and d4 != 0; "~0" means
/// |d_k| <= rel_tol * max(|d2|,|d3|,|d4|). Throws WrongClassifierError when
/// DF does not have exactly one singular value below 1e-6 relative.
SingularityRecord classify_corank1(const FieldFn& F, const Eigen::VectorXd& z0,
                                   const Eigen::VectorXd& params,
                                   double rel_tol = 1e-5, double h = 1e-2);

SingClass classify_from_reduction(const LineReduction& r, double rel_tol = 1e-5);

/// Discriminant 18abcd - 4b^3d + b^2c^2 - 4ac^3 - 27a^2d^2 of the binary
/// cubic ax^3 + bx^2y + cxy^2 + dy^3. Negative: one real linear factor
/// (hyperbolic umbilic D4+); positive: three distinct real factors
/// (elliptic umbilic D4-); zero to tolerance: degenerate.
std::pair<double, SingClass> umbilic_discriminant(double a, double b, double c,
                                                  double d);

}  // namespace hambvp
