#pragma once

#include <Eigen/Dense>

#include "hambvp/classify.hpp"

namespace hambvp {

/// Unfoldings g_mu of the first two D-series germs plus the planar cusp
/// model, together with the non-gradient perturbation f_eps = eps (-y, x).
/// eps = 0 reproduces the exact gradient field.
struct NormalFormProblem {
  enum class Type { D4plus, D4minus, cusp };
  Type type = Type::D4plus;
  Eigen::Vector3d mu = Eigen::Vector3d::Zero();  // mu1, mu2, mu3
  double epsilon = 0.0;
};

NormalFormProblem::Type nf_type_by_name(const std::string& name);
std::string to_string(NormalFormProblem::Type t);

/// Scan field F(x, y) = grad g_mu + f_eps of the D4 unfoldings.
Eigen::Vector2d nf_field(const NormalFormProblem& p, double x, double y);
Eigen::Matrix2d nf_jacobian(const NormalFormProblem& p, double x, double y);

/// Asymmetry max_ij |J_ij - J_ji| of the scan-field Jacobian; zero exactly
/// for the gradient case, 2 eps otherwise.
double nf_asymmetry(const NormalFormProblem& p, double x, double y);

/// The unfolding parameters mu1, mu2 enter the field affinely, so for every
/// (x, y, mu3) there is exactly one (mu1, mu2) making the point a root.
Eigen::Vector2d nf_params_for_zero(NormalFormProblem::Type type, double eps,
                                   double x, double y, double mu3);

/// Constant second-derivative tensor of the field, contracted with two
/// directions: returns (u^T H_1 v, u^T H_2 v).
Eigen::Vector2d nf_d2f(NormalFormProblem::Type type,
                       const Eigen::Vector2d& u, const Eigen::Vector2d& v);

/// Closed-form Lyapunov-Schmidt reduction at a singular point of the field
/// (the third and fourth derivative tensors of the D4 fields vanish, so the
/// reduced derivatives are rational in the Jacobian and the constant
/// second-derivative tensor). Directions are canonically oriented; flip
/// signs via the v/w members when tracking a curve.
LineReduction nf_reduce(const NormalFormProblem& p, double x, double y);

/// det DF and its (x, y) gradient.
double nf_det(const NormalFormProblem& p, double x, double y);
Eigen::Vector2d nf_det_grad(const NormalFormProblem& p, double x, double y);

/// Cusp model g(x) = x^4 + mu2 x^2 + mu1 x.
double cusp_grad(double x, double mu1, double mu2);    // g'
double cusp_hess(double x, double mu2);                // g''

}  // namespace hambvp
