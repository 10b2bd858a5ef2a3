#include "hambvp/classify.hpp"

#include <cmath>

#include "hambvp/errors.hpp"

namespace hambvp {

std::string to_string(SingClass c) {
  switch (c) {
    case SingClass::A1: return "A1";
    case SingClass::A2: return "A2";
    case SingClass::A3: return "A3";
    case SingClass::A4: return "A4";
    case SingClass::D4plus: return "D4plus";
    case SingClass::D4minus: return "D4minus";
    case SingClass::degenerate: return "degenerate";
  }
  return "?";
}

Eigen::MatrixXd FieldFn::jacobian(const Eigen::VectorXd& z, double fd) const {
  if (jac) return jac(z);
  const int m = static_cast<int>(z.size());
  Eigen::MatrixXd J(m, m);
  for (int j = 0; j < m; ++j) {
    Eigen::VectorXd zp = z, zm = z;
    zp[j] += fd;
    zm[j] -= fd;
    J.col(j) = (f(zp) - f(zm)) / (2 * fd);
  }
  return J;
}

namespace {

/// psi(t) = w . F(z0 + t v + Vc s(t)), with s solving the range equations
/// Ur^T F = 0 by Newton. For m = 1 there is no complement and psi is the
/// plain restriction.
class ReducedScalar {
 public:
  ReducedScalar(const FieldFn& F, Eigen::VectorXd z0, Eigen::VectorXd v,
                Eigen::VectorXd w, Eigen::MatrixXd Vc, Eigen::MatrixXd Ur)
      : F_(F),
        z0_(std::move(z0)),
        v_(std::move(v)),
        w_(std::move(w)),
        Vc_(std::move(Vc)),
        Ur_(std::move(Ur)) {}

  double operator()(double t) const {
    const int mc = static_cast<int>(Vc_.cols());
    if (mc == 0) return w_.dot(F_.f(z0_ + t * v_));
    Eigen::VectorXd s = Eigen::VectorXd::Zero(mc);
    for (int it = 0; it < 30; ++it) {
      Eigen::VectorXd z = z0_ + t * v_ + Vc_ * s;
      Eigen::VectorXd g = Ur_.transpose() * F_.f(z);
      if (g.norm() <= 1e-13) break;
      Eigen::MatrixXd Jg = Ur_.transpose() * F_.jacobian(z) * Vc_;
      Eigen::VectorXd ds = Jg.partialPivLu().solve(g);
      if (!ds.allFinite()) break;
      s -= ds;
    }
    return w_.dot(F_.f(z0_ + t * v_ + Vc_ * s));
  }

 private:
  const FieldFn& F_;
  Eigen::VectorXd z0_, v_, w_;
  Eigen::MatrixXd Vc_, Ur_;
};

}  // namespace

LineReduction reduce_corank1(const FieldFn& F, const Eigen::VectorXd& z0,
                             double h) {
  const int m = static_cast<int>(z0.size());
  Eigen::MatrixXd J = F.jacobian(z0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      J, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  LineReduction out;
  out.sv_ratio = sv(m - 1) / std::max(sv(0), 1e-300);
  out.v = svd.matrixV().col(m - 1);
  out.w = svd.matrixU().col(m - 1);
  Eigen::MatrixXd Vc = svd.matrixV().leftCols(m - 1);
  Eigen::MatrixXd Ur = svd.matrixU().leftCols(m - 1);

  ReducedScalar psi(F, z0, out.v, out.w, Vc, Ur);
  const double p0 = psi(0.0);
  auto stencil = [&](double hh, double& c2, double& c3, double& c4) {
    double p1 = psi(hh), m1 = psi(-hh), p2 = psi(2 * hh), m2 = psi(-2 * hh);
    c2 = (p1 - 2 * p0 + m1) / (hh * hh);
    c3 = (p2 - 2 * p1 + 2 * m1 - m2) / (2 * hh * hh * hh);
    c4 = (p2 - 4 * p1 + 6 * p0 - 4 * m1 + m2) / (hh * hh * hh * hh);
  };
  double c2a, c3a, c4a, c2b, c3b, c4b;
  stencil(h, c2a, c3a, c4a);
  stencil(h / 2, c2b, c3b, c4b);
  out.d2 = (4 * c2b - c2a) / 3;
  out.d3 = (4 * c3b - c3a) / 3;
  out.d4 = (4 * c4b - c4a) / 3;
  return out;
}

SingClass classify_from_reduction(const LineReduction& r, double rel_tol) {
  const double scale =
      std::max({std::abs(r.d2), std::abs(r.d3), std::abs(r.d4)});
  if (scale == 0.0) return SingClass::degenerate;
  const double tol = rel_tol * scale;
  if (std::abs(r.d2) > tol) return SingClass::A2;
  if (std::abs(r.d3) > tol) return SingClass::A3;
  if (std::abs(r.d4) > tol) return SingClass::A4;
  return SingClass::degenerate;
}

SingularityRecord classify_corank1(const FieldFn& F, const Eigen::VectorXd& z0,
                                   const Eigen::VectorXd& params,
                                   double rel_tol, double h) {
  const int m = static_cast<int>(z0.size());
  Eigen::MatrixXd J = F.jacobian(z0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  const auto& sv = svd.singularValues();
  const double smax = std::max(sv(0), 1e-300);
  int small = 0;
  for (int i = 0; i < m; ++i)
    if (sv(i) <= 1e-6 * smax) ++small;
  if (m > 1 && small != 1)
    throw WrongClassifierError(
        "classify_corank1 needs exactly one vanishing singular value, got " +
        std::to_string(small));
  if (m == 1 && std::abs(J(0, 0)) > 1e-6)
    throw WrongClassifierError("classify_corank1: jacobian is regular");

  LineReduction r = reduce_corank1(F, z0, h);
  SingularityRecord rec;
  rec.cls = classify_from_reduction(r, rel_tol);
  rec.phase = z0;
  rec.params = params;
  rec.corank = 1;
  rec.kernel = {r.v};
  rec.d2 = r.d2;
  rec.d3 = r.d3;
  rec.d4 = r.d4;
  return rec;
}

std::pair<double, SingClass> umbilic_discriminant(double a, double b, double c,
                                                  double d) {
  const double scale =
      std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
  if (scale <= 1e-10)
    throw Error("umbilic_discriminant: cubic is numerically zero");
  const double delta = 18 * a * b * c * d - 4 * b * b * b * d +
                       b * b * c * c - 4 * a * c * c * c -
                       27 * a * a * d * d;
  const double tol = 1e-10 * scale * scale * scale * scale;
  SingClass cls = SingClass::degenerate;
  if (delta < -tol)
    cls = SingClass::D4plus;
  else if (delta > tol)
    cls = SingClass::D4minus;
  return {delta, cls};
}

}  // namespace hambvp
