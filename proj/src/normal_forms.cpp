#include "hambvp/normal_forms.hpp"

#include <cmath>

#include "hambvp/errors.hpp"

namespace hambvp {

namespace {

double sigma_of(NormalFormProblem::Type t) {
  if (t == NormalFormProblem::Type::cusp)
    throw Error("cusp model is one-dimensional; use cusp_grad/cusp_hess");
  return t == NormalFormProblem::Type::D4plus ? 1.0 : -1.0;
}

}  // namespace

NormalFormProblem::Type nf_type_by_name(const std::string& name) {
  if (name == "d4plus") return NormalFormProblem::Type::D4plus;
  if (name == "d4minus") return NormalFormProblem::Type::D4minus;
  if (name == "cusp") return NormalFormProblem::Type::cusp;
  throw Error("unknown normal form: " + name);
}

std::string to_string(NormalFormProblem::Type t) {
  switch (t) {
    case NormalFormProblem::Type::D4plus: return "d4plus";
    case NormalFormProblem::Type::D4minus: return "d4minus";
    case NormalFormProblem::Type::cusp: return "cusp";
  }
  return "?";
}

Eigen::Vector2d nf_field(const NormalFormProblem& p, double x, double y) {
  const double s = sigma_of(p.type);
  Eigen::Vector2d F;
  F[0] = 3 * x * x + s * y * y + 2 * p.mu[2] * x + p.mu[0] - p.epsilon * y;
  F[1] = 2 * s * x * y + 2 * p.mu[2] * y + p.mu[1] + p.epsilon * x;
  return F;
}

Eigen::Matrix2d nf_jacobian(const NormalFormProblem& p, double x, double y) {
  const double s = sigma_of(p.type);
  Eigen::Matrix2d J;
  J << 6 * x + 2 * p.mu[2], 2 * s * y - p.epsilon,
       2 * s * y + p.epsilon, 2 * s * x + 2 * p.mu[2];
  return J;
}

double nf_asymmetry(const NormalFormProblem& p, double x, double y) {
  Eigen::Matrix2d J = nf_jacobian(p, x, y);
  return std::abs(J(0, 1) - J(1, 0));
}

Eigen::Vector2d nf_params_for_zero(NormalFormProblem::Type type, double eps,
                                   double x, double y, double mu3) {
  const double s = type == NormalFormProblem::Type::D4plus ? 1.0 : -1.0;
  Eigen::Vector2d mu12;
  mu12[0] = -(3 * x * x + s * y * y + 2 * mu3 * x - eps * y);
  mu12[1] = -(2 * s * x * y + 2 * mu3 * y + eps * x);
  return mu12;
}

Eigen::Vector2d nf_d2f(NormalFormProblem::Type type, const Eigen::Vector2d& u,
                       const Eigen::Vector2d& v) {
  const double s = type == NormalFormProblem::Type::D4plus ? 1.0 : -1.0;
  // H1 = [[6, 0], [0, 2s]], H2 = [[0, 2s], [2s, 0]]
  Eigen::Vector2d out;
  out[0] = 6 * u[0] * v[0] + 2 * s * u[1] * v[1];
  out[1] = 2 * s * (u[0] * v[1] + u[1] * v[0]);
  return out;
}

double nf_det(const NormalFormProblem& p, double x, double y) {
  return nf_jacobian(p, x, y).determinant();
}

Eigen::Vector2d nf_det_grad(const NormalFormProblem& p, double x, double y) {
  const double s = sigma_of(p.type);
  // det = (6x + 2mu3)(2sx + 2mu3) - (4y^2 - eps^2)
  Eigen::Vector2d g;
  g[0] = 6 * (2 * s * x + 2 * p.mu[2]) + 2 * s * (6 * x + 2 * p.mu[2]);
  g[1] = -8 * y;
  return g;
}

LineReduction nf_reduce(const NormalFormProblem& p, double x, double y) {
  Eigen::Matrix2d J = nf_jacobian(p, x, y);
  LineReduction out;
  {
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(J);
    out.sv_ratio =
        svd.singularValues()(1) / std::max(svd.singularValues()(0), 1e-300);
  }
  // Right kernel from the larger row; canonical orientation: first
  // substantial component positive.
  Eigen::Vector2d r0 = J.row(0), r1 = J.row(1);
  Eigen::Vector2d row = r0.norm() >= r1.norm() ? r0 : r1;
  Eigen::Vector2d v(row[1], -row[0]);
  v.normalize();
  if (std::abs(v[0]) > 1e-8 ? v[0] < 0 : v[1] < 0) v = -v;
  Eigen::Vector2d u(-v[1], v[0]);
  Eigen::Vector2d Ju = J * u;
  const double ju = Ju.norm();
  Eigen::Vector2d rhat = Ju / ju;
  Eigen::Vector2d w(-rhat[1], rhat[0]);
  if (std::abs(w[0]) > 1e-8 ? w[0] < 0 : w[1] < 0) w = -w;

  const auto type = p.type;
  const Eigen::Vector2d Fvv = nf_d2f(type, v, v);
  const Eigen::Vector2d Fvu = nf_d2f(type, v, u);
  const Eigen::Vector2d Fuu = nf_d2f(type, u, u);
  const double s2 = -rhat.dot(Fvv) / ju;
  const double s3 = -3.0 * s2 * rhat.dot(Fvu) / ju;
  out.d2 = w.dot(Fvv);
  out.d3 = 3.0 * s2 * w.dot(Fvu);
  out.d4 = 3.0 * s2 * s2 * w.dot(Fuu) + 4.0 * s3 * w.dot(Fvu);
  out.v = v;
  out.w = w;
  return out;
}

double cusp_grad(double x, double mu1, double mu2) {
  return 4 * x * x * x + 2 * mu2 * x + mu1;
}

double cusp_hess(double x, double mu2) { return 12 * x * x + 2 * mu2; }

}  // namespace hambvp
