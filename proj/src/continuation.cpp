#include "hambvp/continuation.hpp"

#include <algorithm>
#include <cmath>

#include "hambvp/errors.hpp"

namespace hambvp {

namespace {

Eigen::VectorXd extend(const Eigen::VectorXd& x, double lambda) {
  Eigen::VectorXd y(x.size() + 1);
  y << x, lambda;
  return y;
}

/// Unit kernel vector of the m x (m+1) extended Jacobian [jx | jl]; the
/// branch tangent up to sign.
Eigen::VectorXd nullspace_tangent(const ResidualFamily::Eval& ev) {
  const int m = static_cast<int>(ev.r.size());
  Eigen::MatrixXd ext(m, m + 1);
  ext << ev.jx, ev.jl;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ext, Eigen::ComputeFullV);
  Eigen::VectorXd t = svd.matrixV().col(m);
  return t / t.norm();
}

struct Corrected {
  Eigen::VectorXd x;
  double lambda;
  ResidualFamily::Eval ev;
};

/// Newton on [r(x, lambda); t . (y - y_ref)] from y_ref.
std::optional<Corrected> correct(const ResidualFamily& family,
                                 const Eigen::VectorXd& y_ref,
                                 const Eigen::VectorXd& t, double tol) {
  const int m = family.dim();
  Eigen::VectorXd y = y_ref;
  for (int it = 0; it < 25; ++it) {
    Eigen::VectorXd x = y.head(m);
    double lambda = y[m];
    ResidualFamily::Eval ev;
    try {
      ev = family.eval(x, lambda);
    } catch (const Error&) {
      return std::nullopt;
    }
    double constraint = t.dot(y - y_ref);
    if (ev.r.norm() <= tol && std::abs(constraint) <= 1e-12)
      return Corrected{x, lambda, std::move(ev)};
    Eigen::MatrixXd J(m + 1, m + 1);
    J.topLeftCorner(m, m) = ev.jx;
    J.topRightCorner(m, 1) = ev.jl;
    J.bottomRows(1) = t.transpose();
    Eigen::VectorXd rhs(m + 1);
    rhs << ev.r, constraint;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    Eigen::VectorXd dy = lu.solve(rhs);
    if (!dy.allFinite()) return std::nullopt;
    y -= dy;
    if (dy.norm() > 1e6) return std::nullopt;
  }
  return std::nullopt;
}

BranchPoint make_point(const ResidualFamily& family, const std::string& fid,
                       const Eigen::VectorXd& x, double lambda,
                       const ResidualFamily::Eval& ev,
                       const Eigen::VectorXd& tangent) {
  BranchPoint bp;
  bp.lambda = lambda;
  bp.x = x;
  bp.functional = family.functional(fid, x, lambda);
  bp.det = ev.jx.determinant();
  bp.tangent = tangent;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ev.jx);
  const auto& sv = svd.singularValues();
  // Scale against the extended Jacobian [jx | jl]; otherwise m = 1 folds,
  // where jx is a single vanishing entry, would look perfectly conditioned.
  const double scale = std::max({sv(0), ev.jl.norm(), 1e-300});
  bp.min_sv_rel = sv(sv.size() - 1) / scale;
  if (ev.jx.rows() >= 2 && sv.size() >= 2 && sv(sv.size() - 2) <= 1e-6 * scale)
    bp.tag = PointTag::corank2_candidate;
  return bp;
}

/// Fold refinement between two consecutive branch points whose tangents
/// straddle the turning point. Solves the bordered system
///   r(x, lambda) = 0,  jx(x, lambda) v = 0,  c . v = 1
/// by Newton from the bracket midpoint; at the solution the branch tangent
/// has |dlambda/ds| below tol (the turning point is exact up to roundoff).
std::optional<BranchPoint> refine_fold_between(const ResidualFamily& family,
                                               const std::string& fid,
                                               const BranchPoint& a,
                                               const BranchPoint& b,
                                               double tol) {
  const int m = family.dim();
  Eigen::VectorXd ya = extend(a.x, a.lambda), yb = extend(b.x, b.lambda);
  const double chord = (yb - ya).norm();
  if (chord == 0.0) return std::nullopt;
  Eigen::VectorXd u = (yb - ya) / chord;

  Eigen::VectorXd x = 0.5 * (a.x + b.x);
  double lambda = 0.5 * (a.lambda + b.lambda);
  ResidualFamily::Eval ev;
  try {
    ev = family.eval(x, lambda);
  } catch (const Error&) {
    return std::nullopt;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd0(ev.jx, Eigen::ComputeFullV);
  Eigen::VectorXd v = svd0.matrixV().col(m - 1);
  const Eigen::VectorXd c = v;

  auto jx_times = [&](const Eigen::VectorXd& xx, double ll,
                      const Eigen::VectorXd& vv) {
    return Eigen::VectorXd(family.eval(xx, ll).jx * vv);
  };

  bool converged = false;
  for (int it = 0; it < 40 && !converged; ++it) {
    Eigen::VectorXd g(2 * m + 1);
    g.head(m) = ev.r;
    g.segment(m, m) = ev.jx * v;
    g[2 * m] = c.dot(v) - 1.0;
    if (g.head(2 * m).lpNorm<Eigen::Infinity>() <= 1e-12 &&
        std::abs(g[2 * m]) <= 1e-12) {
      converged = true;
      break;
    }
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * m + 1, 2 * m + 1);
    J.topLeftCorner(m, m) = ev.jx;
    J.block(0, m, m, 1) = ev.jl;
    const double fd = 1e-6 * (1.0 + x.norm() + std::abs(lambda));
    try {
      for (int j = 0; j < m; ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += fd;
        xm[j] -= fd;
        J.block(m, j, m, 1) =
            (jx_times(xp, lambda, v) - jx_times(xm, lambda, v)) / (2 * fd);
      }
      J.block(m, m, m, 1) = (jx_times(x, lambda + fd, v) -
                             jx_times(x, lambda - fd, v)) /
                            (2 * fd);
    } catch (const Error&) {
      return std::nullopt;
    }
    J.block(m, m + 1, m, m) = ev.jx;
    J.block(2 * m, m + 1, 1, m) = c.transpose();
    Eigen::VectorXd d = J.fullPivLu().solve(g);
    if (!d.allFinite()) return std::nullopt;
    x -= d.head(m);
    lambda -= d[m];
    v -= d.tail(m);
    if (d.norm() > 20.0 * (1.0 + chord)) return std::nullopt;
    try {
      ev = family.eval(x, lambda);
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  if (!converged) return std::nullopt;
  // The refined point must belong to the bracketing segment.
  if ((extend(x, lambda) - 0.5 * (ya + yb)).norm() > 5.0 * chord + 1e-9)
    return std::nullopt;

  Eigen::VectorXd t = nullspace_tangent(ev);
  if (std::abs(t[m]) > tol) return std::nullopt;
  if (t.dot(u) < 0) t = -t;  // oriented along the chord
  BranchPoint bp = make_point(family, fid, x, lambda, ev, t);
  bp.tag = PointTag::fold;
  return bp;
}

}  // namespace

double ResidualFamily::functional(const std::string& id,
                                  const Eigen::VectorXd& x, double) const {
  if (id.rfind("x", 0) == 0) {
    int k = id.size() > 1 ? std::stoi(id.substr(1)) : 0;
    if (k < 0 || k >= x.size()) throw Error("functional component out of range");
    return x[k];
  }
  throw Error("unknown functional: " + id);
}

ResidualFamily::Eval ShootingFamily::eval(const Eigen::VectorXd& x,
                                          double lambda) const {
  ResidualEval ev = shooting_residual(prob_, x, lambda);
  return Eval{std::move(ev.r), std::move(ev.jac_x), std::move(ev.jac_lambda)};
}

double ShootingFamily::functional(const std::string& id,
                                  const Eigen::VectorXd& x,
                                  double lambda) const {
  if (id == "l2norm-q") {
    ResidualEval ev = shooting_residual(prob_, x, lambda, true);
    const auto& traj = ev.flow.trajectory;
    const auto& times = prob_.mesh.times;
    double acc = 0.0;
    for (size_t i = 0; i + 1 < traj.size(); ++i) {
      double a = traj[i].q.squaredNorm();
      double b = traj[i + 1].q.squaredNorm();
      acc += 0.5 * (a + b) * (times[i + 1] - times[i]);
    }
    return std::sqrt(acc);
  }
  if (id == "energy") {
    PhasePoint z0 = initial_point(prob_, x, lambda);
    return energy_value(*prob_.sys, z0, effective_mu(prob_, lambda));
  }
  return ResidualFamily::functional(id, x, lambda);
}

ResidualFamily::Eval CallableFamily::eval(const Eigen::VectorXd& x,
                                          double lambda) const {
  Eval ev;
  ev.r = f_(x, lambda);
  if (jx_) {
    ev.jx = jx_(x, lambda);
  } else {
    const double fd = 1e-7;
    ev.jx.resize(dim_, dim_);
    for (int j = 0; j < dim_; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += fd;
      xm[j] -= fd;
      ev.jx.col(j) = (f_(xp, lambda) - f_(xm, lambda)) / (2 * fd);
    }
  }
  const double fd = 1e-7;
  ev.jl = (f_(x, lambda + fd) - f_(x, lambda - fd)) / (2 * fd);
  return ev;
}

std::optional<Eigen::VectorXd> family_newton(const ResidualFamily& family,
                                             Eigen::VectorXd x, double lambda,
                                             double tol, int max_iter) {
  for (int it = 0; it < max_iter; ++it) {
    ResidualFamily::Eval ev;
    try {
      ev = family.eval(x, lambda);
    } catch (const Error&) {
      return std::nullopt;
    }
    double rn = ev.r.norm();
    if (rn <= tol) return x;
    Eigen::VectorXd dx = ev.jx.partialPivLu().solve(ev.r);
    if (!dx.allFinite()) return std::nullopt;
    // step halving against divergence
    double t = 1.0;
    for (int k = 0; k < 8; ++k) {
      Eigen::VectorXd trial = x - t * dx;
      try {
        if (family.eval(trial, lambda).r.norm() < rn) {
          x = trial;
          t = -1.0;
          break;
        }
      } catch (const Error&) {
      }
      t *= 0.5;
    }
    if (t > 0) x -= t * dx;  // accept the smallest step and keep iterating
  }
  try {
    if (family.eval(x, lambda).r.norm() <= tol) return x;
  } catch (const Error&) {
  }
  return std::nullopt;
}

Branch trace_branch(const ResidualFamily& family, const Eigen::VectorXd& x0,
                    double lambda0, const TraceOptions& opts) {
  const int m = family.dim();
  auto seeded = family_newton(family, x0, lambda0, opts.corrector_tol);
  if (!seeded) throw Error("trace_branch: corrector failure at the seed");
  Eigen::VectorXd x = *seeded;
  double lambda = lambda0;
  ResidualFamily::Eval ev = family.eval(x, lambda);

  Eigen::VectorXd t = nullspace_tangent(ev);
  if (t[m] != 0.0) {
    if ((opts.direction >= 0 && t[m] < 0) || (opts.direction < 0 && t[m] > 0))
      t = -t;
  } else if (t[0] < 0) {
    t = -t;
  }

  Branch branch;
  branch.points.push_back(make_point(family, opts.functional, x, lambda, ev, t));

  double ds = opts.ds;
  int halvings = 0;
  while (static_cast<int>(branch.points.size()) < opts.max_points) {
    Eigen::VectorXd y_prev = extend(x, lambda);
    Eigen::VectorXd y_pred = y_prev + ds * t;
    auto c = correct(family, y_pred, t, opts.corrector_tol);
    if (!c || (extend(c->x, c->lambda) - y_prev).norm() > 2.0 * opts.ds) {
      ds *= 0.5;
      if (++halvings > opts.max_halvings) break;
      continue;
    }
    halvings = 0;

    // Stop at the window boundary, landing exactly on it.
    if (c->lambda < opts.lambda_min || c->lambda > opts.lambda_max) {
      double bound =
          c->lambda < opts.lambda_min ? opts.lambda_min : opts.lambda_max;
      auto xb = family_newton(family, x, bound, opts.corrector_tol);
      if (xb) {
        ResidualFamily::Eval evb = family.eval(*xb, bound);
        Eigen::VectorXd tb = extend(*xb, bound) - y_prev;
        if (tb.norm() > 0) tb /= tb.norm();
        branch.points.push_back(
            make_point(family, opts.functional, *xb, bound, evb, tb));
      }
      break;
    }

    Eigen::VectorXd t_new = extend(c->x, c->lambda) - y_prev;
    t_new /= t_new.norm();
    if (t_new.dot(t) < 0) t_new = -t_new;
    branch.points.push_back(
        make_point(family, opts.functional, c->x, c->lambda, c->ev, t_new));

    // Fold bracketing: the tangent's lambda component changed sign.
    const size_t np = branch.points.size();
    if (opts.refine_folds && np >= 2) {
      const BranchPoint& a = branch.points[np - 2];
      const BranchPoint& b = branch.points[np - 1];
      if (a.tangent[m] * b.tangent[m] < 0) {
        auto fold = refine_fold_between(family, opts.functional, a, b, 1e-10);
        if (fold) branch.points.insert(branch.points.end() - 1, *fold);
      }
    }

    x = c->x;
    lambda = c->lambda;
    t = t_new;
    ds = std::min(opts.ds, ds * 1.7);
  }
  return branch;
}

std::vector<BranchPoint> detect_fold(const ResidualFamily& family,
                                     const Branch& branch, double tol) {
  std::vector<BranchPoint> out;
  if (branch.points.size() < 3) return out;
  const int m = family.dim();
  for (size_t i = 0; i + 1 < branch.points.size(); ++i) {
    const BranchPoint& a = branch.points[i];
    const BranchPoint& b = branch.points[i + 1];
    if (a.tag == PointTag::fold || b.tag == PointTag::fold) continue;
    if (a.tangent.size() != m + 1 || b.tangent.size() != m + 1) continue;
    if (a.tangent[m] * b.tangent[m] < 0) {
      auto fold = refine_fold_between(family, "x0", a, b, tol);
      if (fold) out.push_back(*fold);
    }
  }
  return out;
}

namespace {

/// True when (lambda, x) lies on the branch's solution curve: matched by
/// the nearest stored point and polished at equal lambda.
bool lies_on_branch(const ResidualFamily& family, const Branch& branch,
                    double lambda, const Eigen::VectorXd& x, double ds) {
  const double window = std::max(2.0 * ds, 1e-3);
  const BranchPoint* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : branch.points) {
    if (std::abs(p.lambda - lambda) > window) continue;
    double d = (p.x - x).norm();
    if (d < best) {
      best = d;
      nearest = &p;
    }
  }
  if (!nearest) return false;
  if (best <= 1e-6) return true;
  auto polished = family_newton(family, nearest->x, lambda);
  return polished && (*polished - x).norm() <= 1e-6;
}

}  // namespace

Diagram diagram(const ResidualFamily& family, const DiagramOptions& opts,
                Exec exec) {
  if (opts.seed_lambdas.empty() || opts.start_grid.empty())
    throw Error("diagram needs seed lambdas and a start grid");

  Diagram dia;
  dia.functional = opts.trace.functional;

  // Seed solutions: multistart at each seed lambda.
  struct Seed {
    double lambda;
    Eigen::VectorXd x;
  };
  std::vector<Seed> seeds;
  for (double sl : opts.seed_lambdas) {
    std::vector<std::optional<Eigen::VectorXd>> hits(opts.start_grid.size());
    for_each_index(exec, static_cast<int>(opts.start_grid.size()), [&](int i) {
      hits[static_cast<size_t>(i)] =
          family_newton(family, opts.start_grid[static_cast<size_t>(i)], sl);
    });
    std::vector<Eigen::VectorXd> sols;
    for (auto& h : hits)
      if (h) sols.push_back(std::move(*h));
    std::sort(sols.begin(), sols.end(),
              [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                for (int i = 0; i < a.size(); ++i)
                  if (a[i] != b[i]) return a[i] < b[i];
                return false;
              });
    for (const auto& s : sols) {
      bool dup = false;
      for (const auto& kept : seeds) {
        if (kept.lambda == sl && (kept.x - s).norm() <= 1e-6) {
          dup = true;
          break;
        }
      }
      if (!dup) seeds.push_back({sl, s});
    }
  }
  if (seeds.empty())
    throw EmptyDiagramError("diagram: no seed solutions found by multistart");

  for (const Seed& seed : seeds) {
    bool covered = false;
    for (const Branch& b : dia.branches) {
      if (lies_on_branch(family, b, seed.lambda, seed.x, opts.trace.ds)) {
        covered = true;
        break;
      }
    }
    if (covered) continue;
    TraceOptions up = opts.trace;
    up.direction = +1;
    TraceOptions down = opts.trace;
    down.direction = -1;
    Branch fwd = trace_branch(family, seed.x, seed.lambda, up);
    Branch bwd = trace_branch(family, seed.x, seed.lambda, down);
    Branch joined;
    joined.id = static_cast<int>(dia.branches.size());
    joined.provenance = "seed lambda=" + std::to_string(seed.lambda);
    for (auto it = bwd.points.rbegin(); it != bwd.points.rend(); ++it)
      joined.points.push_back(*it);
    for (size_t i = 1; i < fwd.points.size(); ++i)
      joined.points.push_back(fwd.points[i]);
    dia.branches.push_back(std::move(joined));
  }
  return dia;
}

double branch_curve_distance(const ResidualFamily& family, const Branch& a,
                             const Branch& b) {
  double worst = 0.0;
  for (const auto& pa : a.points) {
    // nearest b point in (lambda, x) space
    const BranchPoint* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& pb : b.points) {
      double d = std::hypot(pa.lambda - pb.lambda, (pa.x - pb.x).norm());
      if (d < best) {
        best = d;
        nearest = &pb;
      }
    }
    if (!nearest) continue;
    auto polished = family_newton(family, nearest->x, pa.lambda);
    double dist = polished ? (*polished - pa.x).norm() : best;
    worst = std::max(worst, std::min(dist, best));
  }
  return worst;
}

}  // namespace hambvp
