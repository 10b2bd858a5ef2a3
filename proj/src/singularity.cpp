#include "hambvp/singularity.hpp"

#include "hambvp/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "hambvp/errors.hpp"

namespace hambvp {

namespace {

// ---------------------------------------------------------------------------
// Normal-form machinery. Kernel directions are taken from a fixed branch of
// the adjugate of DF, which is polynomial in position: no sign flips along
// curves, so the reduced quantities below are smooth scalar fields and their
// zero sets can be found by plain Newton iterations.

struct SmoothReduction {
  double det = 0.0;
  double c2 = 0.0;  // w . D2F(v, v); zero on cusp curves
  double c3 = 0.0;  // reduced cubic term; zero at swallowtail points
  double c4 = 0.0;  // reduced quartic term
  bool valid = false;
};

SmoothReduction smooth_reduce(NormalFormProblem::Type type, double eps,
                              double mu3, double x, double y) {
  NormalFormProblem p{type, Eigen::Vector3d(0, 0, mu3), eps};
  Eigen::Matrix2d J = nf_jacobian(p, x, y);
  SmoothReduction out;
  out.det = J.determinant();
  Eigen::Vector2d v(-J(0, 1), J(0, 0));  // adjugate column: right kernel
  Eigen::Vector2d w(-J(1, 0), J(0, 0));  // adjugate row: left kernel
  const double vn = v.norm(), wn = w.norm();
  if (vn < 1e-10 || wn < 1e-10) return out;
  v /= vn;
  w /= wn;
  Eigen::Vector2d u(-v[1], v[0]);
  Eigen::Vector2d Ju = J * u;
  const double ju = Ju.norm();
  if (ju < 1e-10) return out;
  Eigen::Vector2d rhat = Ju / ju;
  const Eigen::Vector2d Fvv = nf_d2f(type, v, v);
  const Eigen::Vector2d Fvu = nf_d2f(type, v, u);
  const Eigen::Vector2d Fuu = nf_d2f(type, u, u);
  const double s2 = -rhat.dot(Fvv) / ju;
  const double s3 = -3.0 * s2 * rhat.dot(Fvu) / ju;
  out.c2 = w.dot(Fvv);
  out.c3 = 3.0 * s2 * w.dot(Fvu);
  out.c4 = 3.0 * s2 * s2 * w.dot(Fuu) + 4.0 * s3 * w.dot(Fvu);
  out.valid = true;
  return out;
}

LbsPoint make_nf_point(NormalFormProblem::Type type, double eps, double mu3,
                       double x, double y, SingClass cls, double det) {
  LbsPoint pt;
  Eigen::Vector2d mu12 = nf_params_for_zero(type, eps, x, y, mu3);
  pt.params.resize(3);
  pt.params << mu12[0], mu12[1], mu3;
  pt.witness.resize(2);
  pt.witness << x, y;
  pt.cls = cls;
  pt.det = det;
  return pt;
}

SingClass classify_nf_point(NormalFormProblem::Type type, double eps,
                            double mu3, double x, double y) {
  NormalFormProblem p{type, Eigen::Vector3d(0, 0, mu3), eps};
  LineReduction r = nf_reduce(p, x, y);
  return classify_from_reduction(r);
}

/// Newton on k smooth component functions of (x, y[, mu3]).
template <int K>
bool newton_on(const std::function<Eigen::Matrix<double, K, 1>(
                   const Eigen::Matrix<double, K, 1>&)>& G,
               Eigen::Matrix<double, K, 1>& z, double tol, int iters = 80) {
  const double fd = 1e-6;
  for (int it = 0; it < iters; ++it) {
    Eigen::Matrix<double, K, 1> g = G(z);
    if (g.template lpNorm<Eigen::Infinity>() <= tol) return true;
    Eigen::Matrix<double, K, K> J;
    for (int j = 0; j < K; ++j) {
      Eigen::Matrix<double, K, 1> zp = z, zm = z;
      zp[j] += fd;
      zm[j] -= fd;
      J.col(j) = (G(zp) - G(zm)) / (2 * fd);
    }
    Eigen::Matrix<double, K, 1> d = J.partialPivLu().solve(g);
    if (!d.allFinite()) return false;
    z -= d;
    if (d.norm() > 10.0) return false;
  }
  return false;
}

}  // namespace

LevelBifurcationSet level_set_normal_form(NormalFormProblem::Type type,
                                          double epsilon,
                                          const NormalFormScanOptions& opts,
                                          Exec exec) {
  if (opts.grid < 32) throw Error("level set scan needs grid >= 32 per axis");
  LevelBifurcationSet out;
  out.param_names = {"mu1", "mu2", "mu3"};
  out.witness_names = {"x", "y"};

  const int G = opts.grid;
  const double span = opts.xy_hi - opts.xy_lo;
  auto coord = [&](int i) { return opts.xy_lo + span * i / G; };

  std::vector<std::vector<LbsPoint>> per_slice(
      static_cast<size_t>(opts.mu3_slices));
  for_each_index(exec, opts.mu3_slices, [&](int si) {
    const double mu3 =
        opts.mu3_lo + (opts.mu3_hi - opts.mu3_lo) * si /
                          std::max(1, opts.mu3_slices - 1);
    NormalFormProblem p{type, Eigen::Vector3d(0, 0, mu3), epsilon};
    std::vector<LbsPoint>& pts = per_slice[static_cast<size_t>(si)];

    // 1D Newton polish along the scan coordinate (0 = x, 1 = y).
    auto polish = [&](double& x, double& y, int axis) -> bool {
      for (int it = 0; it < 60; ++it) {
        double d = nf_det(p, x, y);
        if (std::abs(d) <= 1e-11) return true;
        double slope = nf_det_grad(p, x, y)[axis];
        if (std::abs(slope) < 1e-13) return false;
        (axis == 0 ? x : y) -= d / slope;
      }
      return false;
    };
    auto emit = [&](double x, double y) {
      if (x < opts.xy_lo || x > opts.xy_hi || y < opts.xy_lo ||
          y > opts.xy_hi)
        return;
      SingClass cls = classify_nf_point(type, epsilon, mu3, x, y);
      pts.push_back(make_nf_point(type, epsilon, mu3, x, y, cls,
                                  nf_det(p, x, y)));
    };

    for (int iy = 0; iy <= G; ++iy) {
      double y = coord(iy);
      double prev = nf_det(p, coord(0), y);
      for (int ix = 1; ix <= G; ++ix) {
        double cur = nf_det(p, coord(ix), y);
        if (prev * cur < 0) {
          double xr = 0.5 * (coord(ix - 1) + coord(ix)), yr = y;
          if (polish(xr, yr, 0)) emit(xr, yr);
        }
        prev = cur;
      }
    }
    for (int ix = 0; ix <= G; ++ix) {
      double x = coord(ix);
      double prev = nf_det(p, x, coord(0));
      for (int iy = 1; iy <= G; ++iy) {
        double cur = nf_det(p, x, coord(iy));
        if (prev * cur < 0) {
          double xr = x, yr = 0.5 * (coord(iy - 1) + coord(iy));
          if (polish(xr, yr, 1)) emit(xr, yr);
        }
        prev = cur;
      }
    }
  });

  for (auto& slice : per_slice)
    for (auto& pt : slice) out.points.push_back(std::move(pt));
  std::sort(out.points.begin(), out.points.end(),
            [](const LbsPoint& a, const LbsPoint& b) {
              for (int i = 0; i < 3; ++i)
                if (a.params[i] != b.params[i]) return a.params[i] < b.params[i];
              return false;
            });
  return out;
}

std::vector<SingularityRecord> find_corank2_normal_form(
    NormalFormProblem::Type type, double epsilon,
    const NormalFormScanOptions& opts) {
  // The Jacobian entries are affine in (x, y, mu3); Gauss-Newton from any
  // seed reaches the least-squares point in one step.
  const double s = type == NormalFormProblem::Type::D4plus ? 1.0 : -1.0;
  Eigen::Matrix<double, 4, 3> A;
  Eigen::Vector4d b;
  A << 6, 0, 2,
       0, 2 * s, 0,
       0, 2 * s, 0,
       2 * s, 0, 2;
  b << 0, -epsilon, epsilon, 0;
  (void)opts;
  std::vector<SingularityRecord> out;
  Eigen::Vector3d u = A.colPivHouseholderQr().solve(-b);
  NormalFormProblem p{type, Eigen::Vector3d(0, 0, u[2]), epsilon};
  Eigen::Matrix2d J = nf_jacobian(p, u[0], u[1]);
  if (J.cwiseAbs().maxCoeff() > 1e-8) return out;

  SingularityRecord rec;
  rec.corank = 2;
  rec.phase.resize(2);
  rec.phase << u[0], u[1];
  Eigen::Vector2d mu12 =
      nf_params_for_zero(type, epsilon, u[0], u[1], u[2]);
  rec.params.resize(3);
  rec.params << mu12[0], mu12[1], u[2];
  rec.kernel = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  // Cubic of the potential from the constant second derivatives of the
  // field (the skew perturbation drops out of them).
  // F1: H1 = [[6,0],[0,2s]]; F2: H2 = [[0,2s],[2s,0]].
  rec.cubic[0] = 6.0 / 6.0;
  rec.cubic[1] = 0.0;
  rec.cubic[2] = (2 * s + 2 * s) / 4.0;
  rec.cubic[3] = 0.0;
  auto [delta, cls] = umbilic_discriminant(rec.cubic[0], rec.cubic[1],
                                           rec.cubic[2], rec.cubic[3]);
  rec.discriminant = delta;
  rec.cls = cls;
  out.push_back(std::move(rec));
  return out;
}

NormalFormAnalysis analyze_normal_form(NormalFormProblem::Type type,
                                       double epsilon,
                                       const NormalFormScanOptions& opts,
                                       Exec exec) {
  NormalFormAnalysis out;
  out.set = level_set_normal_form(type, epsilon, opts, exec);
  out.umbilics = find_corank2_normal_form(type, epsilon, opts);

  // Cusp points: Newton on (det, c2) within each slice, seeded from every
  // scan point of that slice.
  std::map<double, std::vector<Eigen::Vector2d>> cusps_by_slice;
  for (const LbsPoint& pt : out.set.points) {
    const double mu3 = pt.params[2];
    Eigen::Vector2d z(pt.witness[0], pt.witness[1]);
    auto G = [&](const Eigen::Vector2d& zz) {
      SmoothReduction r = smooth_reduce(type, epsilon, mu3, zz[0], zz[1]);
      return Eigen::Vector2d(r.det, r.valid ? r.c2 : 1.0);
    };
    Eigen::Vector2d z0 = z;
    if (!newton_on<2>(G, z0, 1e-11)) continue;
    if (z0[0] < opts.xy_lo || z0[0] > opts.xy_hi || z0[1] < opts.xy_lo ||
        z0[1] > opts.xy_hi)
      continue;
    SingClass cls = classify_nf_point(type, epsilon, mu3, z0[0], z0[1]);
    if (cls != SingClass::A3 && cls != SingClass::A4) continue;
    auto& list = cusps_by_slice[mu3];
    bool dup = false;
    for (const auto& c : list)
      if ((c - z0).norm() <= 1e-7) dup = true;
    if (!dup) list.push_back(z0);
  }
  for (const auto& [mu3, list] : cusps_by_slice) {
    for (const auto& c : list) {
      NormalFormProblem p{type, Eigen::Vector3d(0, 0, mu3), epsilon};
      LineReduction r = nf_reduce(p, c[0], c[1]);
      SingularityRecord rec;
      rec.cls = SingClass::A3;
      rec.phase = c;
      Eigen::Vector2d mu12 = nf_params_for_zero(type, epsilon, c[0], c[1], mu3);
      rec.params.resize(3);
      rec.params << mu12[0], mu12[1], mu3;
      rec.corank = 1;
      rec.kernel = {r.v};
      rec.d2 = r.d2;
      rec.d3 = r.d3;
      rec.d4 = r.d4;
      out.cusps.push_back(std::move(rec));
      out.set.points.push_back(
          make_nf_point(type, epsilon, mu3, c[0], c[1], SingClass::A3, 0.0));
    }
  }

  // Swallowtails: the cusp locus {det = 0, c2 = 0} is a curve over mu3.
  // Trace it by pseudo-arclength from the found cusp points (the curve
  // turns around in mu3 exactly where a cusp pair annihilates) and locate
  // the zeros of the reduced cubic term c3 along it. For the unperturbed
  // forms c3 diverges at the umbilic instead of vanishing, so no
  // swallowtail is found.
  CallableFamily cusp_curve(
      2,
      [type, epsilon](const Eigen::VectorXd& z, double mu3) {
        SmoothReduction r = smooth_reduce(type, epsilon, mu3, z[0], z[1]);
        Eigen::VectorXd g(2);
        g << r.det, (r.valid ? r.c2 : 1.0);
        return g;
      });
  auto c3_at = [type, epsilon](const Eigen::VectorXd& z, double mu3) {
    return smooth_reduce(type, epsilon, mu3, z[0], z[1]).c3;
  };

  std::vector<Branch> curves;
  for (const auto& rec : out.cusps) {
    Eigen::VectorXd seed = rec.phase;
    const double mu3 = rec.params[2];
    bool covered = false;
    for (const Branch& br : curves) {
      for (const auto& p : br.points) {
        if (std::abs(p.lambda - mu3) > 0.05) continue;
        auto polished = family_newton(cusp_curve, p.x, mu3);
        if (polished && (*polished - seed).norm() <= 1e-5) {
          covered = true;
          break;
        }
      }
      if (covered) break;
    }
    if (covered) continue;
    TraceOptions topts;
    topts.ds = 0.02;
    topts.lambda_min = opts.mu3_lo;
    topts.lambda_max = opts.mu3_hi;
    topts.max_points = 6000;
    topts.refine_folds = true;
    try {
      TraceOptions fwd = topts;
      fwd.direction = +1;
      TraceOptions bwd = topts;
      bwd.direction = -1;
      Branch a = trace_branch(cusp_curve, seed, mu3, fwd);
      Branch b = trace_branch(cusp_curve, seed, mu3, bwd);
      Branch joined;
      for (auto it = b.points.rbegin(); it != b.points.rend(); ++it)
        joined.points.push_back(*it);
      for (size_t i = 1; i < a.points.size(); ++i)
        joined.points.push_back(a.points[i]);
      curves.push_back(std::move(joined));
    } catch (const Error&) {
    }
  }

  std::vector<Eigen::Vector3d> found;
  auto try_swallowtail = [&](Eigen::Vector3d z) {
    auto G = [&](const Eigen::Vector3d& zz) {
      SmoothReduction r = smooth_reduce(type, epsilon, zz[2], zz[0], zz[1]);
      if (!r.valid) return Eigen::Vector3d(r.det, 1.0, 1.0);
      return Eigen::Vector3d(r.det, r.c2, r.c3);
    };
    if (!newton_on<3>(G, z, 1e-10)) return;
    if (z[0] < opts.xy_lo || z[0] > opts.xy_hi || z[1] < opts.xy_lo ||
        z[1] > opts.xy_hi || z[2] < opts.mu3_lo || z[2] > opts.mu3_hi)
      return;
    NormalFormProblem p{type, Eigen::Vector3d(0, 0, z[2]), epsilon};
    LineReduction r = nf_reduce(p, z[0], z[1]);
    if (classify_from_reduction(r) != SingClass::A4) return;
    for (const auto& f : found)
      if ((f - z).norm() <= 1e-5) return;
    found.push_back(z);
    SingularityRecord rec2;
    rec2.cls = SingClass::A4;
    rec2.phase = z.head<2>();
    Eigen::Vector2d mu12 =
        nf_params_for_zero(type, epsilon, z[0], z[1], z[2]);
    rec2.params.resize(3);
    rec2.params << mu12[0], mu12[1], z[2];
    rec2.corank = 1;
    rec2.kernel = {r.v};
    rec2.d2 = r.d2;
    rec2.d3 = r.d3;
    rec2.d4 = r.d4;
    out.swallowtails.push_back(std::move(rec2));
    out.set.points.push_back(
        make_nf_point(type, epsilon, z[2], z[0], z[1], SingClass::A4, 0.0));
  };

  for (const Branch& curve : curves) {
    double prev_c3 = 0.0;
    bool have_prev = false;
    for (const auto& pt : curve.points) {
      double c3 = c3_at(pt.x, pt.lambda);
      if (have_prev && prev_c3 * c3 < 0 && std::abs(prev_c3) < 1e3 &&
          std::abs(c3) < 1e3) {
        try_swallowtail(Eigen::Vector3d(pt.x[0], pt.x[1], pt.lambda));
      }
      prev_c3 = c3;
      have_prev = true;
      if (pt.tag == PointTag::fold)
        try_swallowtail(Eigen::Vector3d(pt.x[0], pt.x[1], pt.lambda));
    }
  }
  std::sort(out.swallowtails.begin(), out.swallowtails.end(),
            [](const SingularityRecord& a, const SingularityRecord& b) {
              return a.params[2] < b.params[2];
            });
  std::sort(out.set.points.begin(), out.set.points.end(),
            [](const LbsPoint& a, const LbsPoint& b) {
              for (int i = 0; i < 3; ++i)
                if (a.params[i] != b.params[i]) return a.params[i] < b.params[i];
              return false;
            });
  return out;
}

// ---------------------------------------------------------------------------
// Shooting (Dirichlet, fixed first boundary component) corank-2 search and
// level set over the scan variables u = (q2, p1, p2).

namespace {

struct ScanDerivs {
  Eigen::Matrix2d A;   // D_p phi^Q
  Eigen::Matrix2d B;   // D_p phi^P
  Eigen::Vector2d Q;   // phi^Q
  double det = 0.0;
  Eigen::Vector3d det_grad;             // d det / d (q2, p1, p2)
  Eigen::Matrix<double, 4, 3> entry_grad;  // d vec(A) / d u (rows Q1p1,Q1p2,Q2p1,Q2p2)
  Eigen::Matrix2d GQ[2];                // Hess of phi^Q_i over (p1, p2)
};

ScanDerivs scan_derivs(const ShootingScanConfig& cfg,
                       const Eigen::Vector3d& u) {
  Eigen::VectorXd q(2), p(2);
  q << cfg.q1_fixed, u[0];
  p << u[1], u[2];
  SeedSpec seeds;
  seeds.state_dirs = {1, 2, 3};  // q2, p1, p2
  FlowResult fr =
      flow(cfg.method, *cfg.sys, cfg.mu, cfg.mesh, PhasePoint(q, p), seeds);
  ScanDerivs out;
  // jac rows: (Q1, Q2, P1, P2); seed cols: (q2, p1, p2)
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      out.A(i, j) = fr.jac(i, 1 + j);
      out.B(i, j) = fr.jac(2 + i, 1 + j);
    }
  out.Q = fr.end.q;
  out.det = out.A.determinant();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 3; ++k)
        out.entry_grad(2 * i + j, k) = fr.hess[static_cast<size_t>(i)](1 + j, k);
  for (int k = 0; k < 3; ++k) {
    out.det_grad[k] = out.entry_grad(0, k) * out.A(1, 1) +
                      out.A(0, 0) * out.entry_grad(3, k) -
                      out.entry_grad(1, k) * out.A(1, 0) -
                      out.A(0, 1) * out.entry_grad(2, k);
  }
  for (int i = 0; i < 2; ++i)
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c)
        out.GQ[i](a, c) = fr.hess[static_cast<size_t>(i)](1 + a, 1 + c);
  return out;
}

SingularityRecord corank2_record(const ShootingScanConfig& cfg,
                                 const Eigen::Vector3d& u,
                                 const ScanDerivs& d) {
  SingularityRecord rec;
  rec.corank = 2;
  rec.phase.resize(4);
  rec.phase << cfg.q1_fixed, u[0], u[1], u[2];
  rec.params.resize(3);
  rec.params << u[0], d.Q[0], d.Q[1];
  rec.kernel = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  // Cubic of the reduced generating family at a fully degenerate point:
  // C(xi) = -1/6 sum_i (B xi)_i (xi^T GQ_i xi).
  const Eigen::Matrix2d& B = d.B;
  const Eigen::Matrix2d& G0 = d.GQ[0];
  const Eigen::Matrix2d& G1 = d.GQ[1];
  rec.cubic[0] = -(B(0, 0) * G0(0, 0) + B(1, 0) * G1(0, 0)) / 6.0;
  rec.cubic[1] = -(B(0, 1) * G0(0, 0) + B(1, 1) * G1(0, 0) +
                   2 * (B(0, 0) * G0(0, 1) + B(1, 0) * G1(0, 1))) /
                 6.0;
  rec.cubic[2] = -(B(0, 0) * G0(1, 1) + B(1, 0) * G1(1, 1) +
                   2 * (B(0, 1) * G0(0, 1) + B(1, 1) * G1(0, 1))) /
                 6.0;
  rec.cubic[3] = -(B(0, 1) * G0(1, 1) + B(1, 1) * G1(1, 1)) / 6.0;
  auto [delta, cls] = umbilic_discriminant(rec.cubic[0], rec.cubic[1],
                                           rec.cubic[2], rec.cubic[3]);
  rec.discriminant = delta;
  rec.cls = cls;
  return rec;
}

}  // namespace

std::vector<SingularityRecord> find_corank2_shooting(
    const ShootingScanConfig& cfg, Exec exec) {
  if (!cfg.sys || cfg.sys->dof() != 2)
    throw DimensionError("corank-2 search needs a system with n = 2");
  const int S = cfg.seed_grid;
  std::vector<Eigen::Vector3d> seeds;
  for (int a = 0; a < S; ++a)
    for (int b = 0; b < S; ++b)
      for (int c = 0; c < S; ++c) {
        Eigen::Vector3d f(static_cast<double>(a), static_cast<double>(b),
                          static_cast<double>(c));
        f /= std::max(1, S - 1);
        seeds.emplace_back(cfg.lo + (cfg.hi - cfg.lo).cwiseProduct(f));
      }

  std::vector<std::optional<Eigen::Vector3d>> hits(seeds.size());
  for_each_index(exec, static_cast<int>(seeds.size()), [&](int si) {
    Eigen::Vector3d u = seeds[static_cast<size_t>(si)];
    double best = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 60; ++it) {
      ScanDerivs d;
      try {
        d = scan_derivs(cfg, u);
      } catch (const Error&) {
        return;
      }
      Eigen::Vector4d r(d.A(0, 0), d.A(0, 1), d.A(1, 0), d.A(1, 1));
      const double rn = r.lpNorm<Eigen::Infinity>();
      if (rn <= cfg.corank2_tol) {
        hits[static_cast<size_t>(si)] = u;
        return;
      }
      if (rn > 1e3 * best + 1.0) return;  // wandering off
      best = std::min(best, rn);
      Eigen::Vector3d step =
          d.entry_grad.colPivHouseholderQr().solve(r);
      if (!step.allFinite()) return;
      double damp = 1.0;
      if (step.norm() > 0.5) damp = 0.5 / step.norm();
      u -= damp * step;
    }
  });

  std::vector<Eigen::Vector3d> accepted;
  for (const auto& h : hits) {
    if (!h) continue;
    bool dup = false;
    for (const auto& a : accepted)
      if ((a - *h).norm() <= 1e-6 * (1.0 + a.norm())) dup = true;
    if (!dup) accepted.push_back(*h);
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
              for (int i = 0; i < 3; ++i)
                if (a[i] != b[i]) return a[i] < b[i];
              return false;
            });
  std::vector<SingularityRecord> out;
  for (const auto& u : accepted)
    out.push_back(corank2_record(cfg, u, scan_derivs(cfg, u)));
  return out;
}

LevelBifurcationSet level_set_shooting(const ShootingScanConfig& cfg,
                                       Exec exec) {
  if (!cfg.sys || cfg.sys->dof() != 2)
    throw DimensionError("level set scan needs a system with n = 2");
  const int G = cfg.grid;
  if (G < 32) throw Error("level set scan needs grid >= 32 per axis");
  LevelBifurcationSet out;
  out.param_names = {"q2", "Q1", "Q2"};
  out.witness_names = {"q2", "p1", "p2"};

  auto coord = [&](int axis, int i) {
    return cfg.lo[axis] + (cfg.hi[axis] - cfg.lo[axis]) * i / G;
  };
  const int NN = (G + 1) * (G + 1) * (G + 1);
  std::vector<float> dets(static_cast<size_t>(NN),
                          std::numeric_limits<float>::quiet_NaN());
  auto idx = [&](int a, int b, int c) {
    return (a * (G + 1) + b) * (G + 1) + c;
  };
  for_each_index(exec, NN, [&](int flat) {
    int c = flat % (G + 1);
    int b = (flat / (G + 1)) % (G + 1);
    int a = flat / ((G + 1) * (G + 1));
    Eigen::Vector3d u(coord(0, a), coord(1, b), coord(2, c));
    try {
      dets[static_cast<size_t>(flat)] =
          static_cast<float>(scan_derivs(cfg, u).det);
    } catch (const Error&) {
    }
  });

  // Bracket along each axis and polish by 1D Newton along that axis.
  struct Bracket {
    Eigen::Vector3d u;
    int axis;
  };
  std::vector<Bracket> brackets;
  for (int a = 0; a <= G; ++a)
    for (int b = 0; b <= G; ++b)
      for (int c = 0; c + 1 <= G; ++c) {
        // axis 2 runs over c; axis 0/1 by permuting the roles below
        float d0 = dets[static_cast<size_t>(idx(a, b, c))];
        float d1 = dets[static_cast<size_t>(idx(a, b, c + 1))];
        if (std::isfinite(d0) && std::isfinite(d1) && d0 * d1 < 0)
          brackets.push_back(
              {Eigen::Vector3d(coord(0, a), coord(1, b),
                               0.5 * (coord(2, c) + coord(2, c + 1))),
               2});
      }
  for (int a = 0; a <= G; ++a)
    for (int c = 0; c <= G; ++c)
      for (int b = 0; b + 1 <= G; ++b) {
        float d0 = dets[static_cast<size_t>(idx(a, b, c))];
        float d1 = dets[static_cast<size_t>(idx(a, b + 1, c))];
        if (std::isfinite(d0) && std::isfinite(d1) && d0 * d1 < 0)
          brackets.push_back(
              {Eigen::Vector3d(coord(0, a),
                               0.5 * (coord(1, b) + coord(1, b + 1)),
                               coord(2, c)),
               1});
      }
  for (int b = 0; b <= G; ++b)
    for (int c = 0; c <= G; ++c)
      for (int a = 0; a + 1 <= G; ++a) {
        float d0 = dets[static_cast<size_t>(idx(a, b, c))];
        float d1 = dets[static_cast<size_t>(idx(a + 1, b, c))];
        if (std::isfinite(d0) && std::isfinite(d1) && d0 * d1 < 0)
          brackets.push_back(
              {Eigen::Vector3d(0.5 * (coord(0, a) + coord(0, a + 1)),
                               coord(1, b), coord(2, c)),
               0});
      }

  std::vector<std::optional<LbsPoint>> pts(brackets.size());
  for_each_index(exec, static_cast<int>(brackets.size()), [&](int bi) {
    Bracket br = brackets[static_cast<size_t>(bi)];
    Eigen::Vector3d u = br.u;
    ScanDerivs d;
    try {
      for (int it = 0; it < 50; ++it) {
        d = scan_derivs(cfg, u);
        if (std::abs(d.det) <= 1e-10) break;
        double slope = d.det_grad[br.axis];
        if (std::abs(slope) < 1e-13) return;
        u[br.axis] -= d.det / slope;
      }
      d = scan_derivs(cfg, u);
    } catch (const Error&) {
      return;
    }
    if (std::abs(d.det) > 1e-9) return;
    for (int k = 0; k < 3; ++k)
      if (u[k] < cfg.lo[k] - 1e-9 || u[k] > cfg.hi[k] + 1e-9) return;

    // Classify through the p-residual at fixed q2.
    LbsPoint pt;
    pt.params.resize(3);
    pt.params << u[0], d.Q[0], d.Q[1];
    pt.witness = u;
    pt.det = d.det;
    pt.cls = SingClass::A2;
    const Eigen::Vector2d Qref = d.Q;
    FieldFn F;
    F.f = [&cfg, &u, &Qref](const Eigen::VectorXd& pp) {
      Eigen::VectorXd q(2), p(2);
      q << cfg.q1_fixed, u[0];
      p << pp[0], pp[1];
      PhasePoint end =
          flow_primal(cfg.method, *cfg.sys, cfg.mu, cfg.mesh, PhasePoint(q, p));
      return Eigen::VectorXd(end.q - Qref);
    };
    F.jac = [&cfg, &u](const Eigen::VectorXd& pp) {
      Eigen::VectorXd q(2), p(2);
      q << cfg.q1_fixed, u[0];
      p << pp[0], pp[1];
      SeedSpec seeds;
      seeds.state_dirs = {2, 3};
      FlowResult fr = flow(cfg.method, *cfg.sys, cfg.mu, cfg.mesh,
                           PhasePoint(q, p), seeds);
      return Eigen::MatrixXd(fr.jac.topRows(2));
    };
    try {
      Eigen::VectorXd pp(2);
      pp << u[1], u[2];
      LineReduction r = reduce_corank1(F, pp, 5e-3);
      pt.cls = classify_from_reduction(r, 1e-4);
      if (pt.cls == SingClass::degenerate) pt.cls = SingClass::A2;
    } catch (const Error&) {
    }
    pts[static_cast<size_t>(bi)] = std::move(pt);
  });

  for (auto& p : pts)
    if (p) out.points.push_back(std::move(*p));
  std::sort(out.points.begin(), out.points.end(),
            [](const LbsPoint& a, const LbsPoint& b) {
              for (int i = 0; i < 3; ++i)
                if (a.params[i] != b.params[i]) return a.params[i] < b.params[i];
              return false;
            });
  return out;
}

std::vector<CuspFoldSample> cusp_fold_locus(int samples, double t_lo,
                                            double t_hi) {
  std::vector<CuspFoldSample> out;
  for (int i = 0; i < samples; ++i) {
    double t = samples == 1
                   ? t_lo
                   : t_lo + (t_hi - t_lo) * i / (samples - 1);
    out.push_back({t, 8 * t * t * t, -6 * t * t});
  }
  return out;
}

}  // namespace hambvp
