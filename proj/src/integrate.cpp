#include "hambvp/integrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "hambvp/errors.hpp"
#include "hambvp/jet.hpp"

namespace hambvp {

namespace {

const std::vector<Method>& method_table() {
  static const std::vector<Method> table = {
      {MethodId::stormer_verlet, "stormer-verlet", 2, true, false},
      {MethodId::implicit_midpoint, "implicit-midpoint", 2, true, true},
      {MethodId::rk2, "rk2", 2, false, false},
      {MethodId::rk4, "rk4", 4, false, false},
      {MethodId::lobatto3a, "lobatto3a", 4, false, true},
  };
  return table;
}

template <class S>
S zero_like(const S& x) {
  return x * 0.0;
}

/// (dH/dq, dH/dp) at a phase point over scalar S, one energy evaluation
/// through a first-order dual layer seeded on all 2n phase directions.
template <class S>
void energy_gradient(const System& sys, std::span<const S> mu, const S* q,
                     const S* p, S* dHdq, S* dHdp) {
  using D = Dual<S>;
  const int n = sys.dof();
  const int m = 2 * n;
  std::array<D, 2> qd, pd;
  std::array<D, 4> mud;
  for (int i = 0; i < n; ++i) {
    qd[static_cast<size_t>(i)] = D::variable(q[i], m, i);
    pd[static_cast<size_t>(i)] = D::variable(p[i], m, n + i);
  }
  for (size_t j = 0; j < mu.size(); ++j) mud[j] = D(mu[j], m);
  D H = sys.energy(std::span<const D>(qd.data(), static_cast<size_t>(n)),
                   std::span<const D>(pd.data(), static_cast<size_t>(n)),
                   std::span<const D>(mud.data(), mu.size()));
  for (int i = 0; i < n; ++i) {
    dHdq[i] = H.du[static_cast<size_t>(i)];
    dHdp[i] = H.du[static_cast<size_t>(n + i)];
  }
}

/// grad of V(q; mu) for separable systems.
template <class S>
void potential_gradient(const System& sys, std::span<const S> mu, const S* q,
                        S* dV) {
  using D = Dual<S>;
  const int n = sys.dof();
  std::array<D, 2> qd;
  std::array<D, 4> mud;
  for (int i = 0; i < n; ++i)
    qd[static_cast<size_t>(i)] = D::variable(q[i], n, i);
  for (size_t j = 0; j < mu.size(); ++j) mud[j] = D(mu[j], n);
  D V = sys.potential(std::span<const D>(qd.data(), static_cast<size_t>(n)),
                      std::span<const D>(mud.data(), mu.size()));
  for (int i = 0; i < n; ++i) dV[i] = V.du[static_cast<size_t>(i)];
}

/// grad of T(p; mu) for separable systems.
template <class S>
void kinetic_gradient(const System& sys, std::span<const S> mu, const S* p,
                      S* dT) {
  using D = Dual<S>;
  const int n = sys.dof();
  std::array<D, 2> pd;
  std::array<D, 4> mud;
  for (int i = 0; i < n; ++i)
    pd[static_cast<size_t>(i)] = D::variable(p[i], n, i);
  for (size_t j = 0; j < mu.size(); ++j) mud[j] = D(mu[j], n);
  D T = sys.kinetic(std::span<const D>(pd.data(), static_cast<size_t>(n)),
                    std::span<const D>(mud.data(), mu.size()));
  for (int i = 0; i < n; ++i) dT[i] = T.du[static_cast<size_t>(i)];
}

/// Hamiltonian vector field f(z) = (dH/dp, -dH/dq).
template <class S>
void vector_field(const System& sys, std::span<const S> mu, const S* q,
                  const S* p, S* fq, S* fp) {
  const int n = sys.dof();
  S dq[2], dp[2];
  energy_gradient<S>(sys, mu, q, p, dq, dp);
  for (int i = 0; i < n; ++i) {
    fq[i] = dp[i];
    fp[i] = -dq[i];
  }
}

/// Jacobian of the vector field at a primal point:
/// Df = [[H_pq, H_pp], [-H_qq, -H_qp]].
Eigen::MatrixXd field_jacobian(const System& sys,
                               std::span<const double> mu_span,
                               const double* q, const double* p) {
  const int n = sys.dof();
  const int m = 2 * n;
  std::vector<Jet2> qj(static_cast<size_t>(n)), pj(static_cast<size_t>(n));
  std::vector<Jet2> muj(mu_span.size());
  for (int i = 0; i < n; ++i) {
    qj[static_cast<size_t>(i)] = Jet2::variable(q[i], m, i);
    pj[static_cast<size_t>(i)] = Jet2::variable(p[i], m, n + i);
  }
  for (size_t j = 0; j < mu_span.size(); ++j) muj[j] = Jet2(mu_span[j], m);
  Jet2 H = sys.energy(std::span<const Jet2>(qj), std::span<const Jet2>(pj),
                      std::span<const Jet2>(muj));
  Eigen::MatrixXd df(m, m);
  for (int col = 0; col < m; ++col) {
    for (int i = 0; i < n; ++i) {
      df(i, col) = H.hess(n + i, col);   // d(dH/dp_i)/dz_col
      df(n + i, col) = -H.hess(i, col);  // d(-dH/dq_i)/dz_col
    }
  }
  return df;
}

/// Applies a primal LU solve to every Taylor coefficient of a jet vector.
void lu_solve_jets(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu,
                   std::vector<Jet2>& b) {
  const int m = static_cast<int>(b.size());
  const int s = b[0].seeds();
  Eigen::VectorXd col(m);
  for (int i = 0; i < m; ++i) col[i] = b[static_cast<size_t>(i)].value();
  col = lu.solve(col);
  for (int i = 0; i < m; ++i) b[static_cast<size_t>(i)].set_value(col[i]);
  for (int k = 0; k < s; ++k) {
    for (int i = 0; i < m; ++i) col[i] = b[static_cast<size_t>(i)].grad(k);
    col = lu.solve(col);
    for (int i = 0; i < m; ++i) b[static_cast<size_t>(i)].set_grad(k, col[i]);
  }
  for (int a = 0; a < s; ++a) {
    for (int c = 0; c <= a; ++c) {
      for (int i = 0; i < m; ++i) col[i] = b[static_cast<size_t>(i)].hess(a, c);
      col = lu.solve(col);
      for (int i = 0; i < m; ++i)
        b[static_cast<size_t>(i)].set_hess(a, c, col[i]);
    }
  }
}

double primal_inf_norm(const std::vector<double>& r) {
  double m = 0.0;
  for (double x : r) m = std::max(m, std::abs(x));
  return m;
}

constexpr double kStageTol = 1e-13;
constexpr int kStageMaxIter = 50;
constexpr int kJetSweeps = 2;

template <class S>
std::span<const S> cspan(const std::vector<S>& v) {
  return std::span<const S>(v.data(), v.size());
}

// ---------------------------------------------------------------------------
// Explicit schemes, shared between primal and jet evaluation.

template <class S>
void step_sv_separable(const System& sys, std::span<const S> mu, double h,
                       S* q, S* p) {
  const int n = sys.dof();
  S g[2];
  potential_gradient<S>(sys, mu, q, g);
  for (int i = 0; i < n; ++i) p[i] = p[i] - (0.5 * h) * g[i];
  kinetic_gradient<S>(sys, mu, p, g);
  for (int i = 0; i < n; ++i) q[i] = q[i] + h * g[i];
  potential_gradient<S>(sys, mu, q, g);
  for (int i = 0; i < n; ++i) p[i] = p[i] - (0.5 * h) * g[i];
}

template <class S>
void step_rk2(const System& sys, std::span<const S> mu, double h, S* q,
              S* p) {
  const int n = sys.dof();
  S k1q[2], k1p[2], k2q[2], k2p[2], mq[2], mp[2];
  vector_field<S>(sys, mu, q, p, k1q, k1p);
  for (int i = 0; i < n; ++i) {
    mq[i] = q[i] + (0.5 * h) * k1q[i];
    mp[i] = p[i] + (0.5 * h) * k1p[i];
  }
  vector_field<S>(sys, mu, mq, mp, k2q, k2p);
  for (int i = 0; i < n; ++i) {
    q[i] = q[i] + h * k2q[i];
    p[i] = p[i] + h * k2p[i];
  }
}

template <class S>
void step_rk4(const System& sys, std::span<const S> mu, double h, S* q,
              S* p) {
  const int n = sys.dof();
  S k1q[2], k1p[2], k2q[2], k2p[2], k3q[2], k3p[2], k4q[2], k4p[2];
  S tq[2], tp[2];
  vector_field<S>(sys, mu, q, p, k1q, k1p);
  for (int i = 0; i < n; ++i) {
    tq[i] = q[i] + (0.5 * h) * k1q[i];
    tp[i] = p[i] + (0.5 * h) * k1p[i];
  }
  vector_field<S>(sys, mu, tq, tp, k2q, k2p);
  for (int i = 0; i < n; ++i) {
    tq[i] = q[i] + (0.5 * h) * k2q[i];
    tp[i] = p[i] + (0.5 * h) * k2p[i];
  }
  vector_field<S>(sys, mu, tq, tp, k3q, k3p);
  for (int i = 0; i < n; ++i) {
    tq[i] = q[i] + h * k3q[i];
    tp[i] = p[i] + h * k3p[i];
  }
  vector_field<S>(sys, mu, tq, tp, k4q, k4p);
  for (int i = 0; i < n; ++i) {
    q[i] = q[i] + (h / 6.0) * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i]);
    p[i] = p[i] + (h / 6.0) * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
  }
}

// ---------------------------------------------------------------------------
// Implicit stage solves. The primal part runs full Newton to kStageTol; jet
// coefficients are then propagated through the fixed point by extra Newton
// sweeps in jet arithmetic using the factored primal Jacobian.

struct StageProblem {
  // Residual over doubles; fills r (size m).
  std::function<void(const std::vector<double>&, std::vector<double>&)>
      residual;
  // Jacobian at the current iterate.
  std::function<Eigen::MatrixXd(const std::vector<double>&)> jacobian;
  int m;
};

std::vector<double> solve_stage(const StageProblem& prob,
                                std::vector<double> y, double t, double h) {
  std::vector<double> r(static_cast<size_t>(prob.m));
  for (int it = 0; it < kStageMaxIter; ++it) {
    prob.residual(y, r);
    const double norm = primal_inf_norm(r);
    if (norm <= kStageTol) return y;
    Eigen::MatrixXd J = prob.jacobian(y);
    Eigen::Map<Eigen::VectorXd> rv(r.data(), prob.m);
    Eigen::VectorXd dy = J.partialPivLu().solve(rv);
    for (int i = 0; i < prob.m; ++i) y[static_cast<size_t>(i)] -= dy[i];
  }
  prob.residual(y, r);
  const double norm = primal_inf_norm(r);
  if (norm <= kStageTol) return y;
  throw StepFailure("implicit stage solve did not converge", t, h, norm);
}

/// Two Newton sweeps in jet arithmetic around the converged primal stage.
template <class RFun>
void jet_sweeps(const RFun& residual_jets, const Eigen::MatrixXd& jac,
                std::vector<Jet2>& y) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
  std::vector<Jet2> r(y.size());
  for (int sweep = 0; sweep < kJetSweeps; ++sweep) {
    residual_jets(y, r);
    lu_solve_jets(lu, r);
    for (size_t i = 0; i < y.size(); ++i) y[i] -= r[i];
  }
}

// Implicit midpoint: y = z + h f((z + y) / 2).
template <class S>
void step_implicit_midpoint(const System& sys, std::span<const S> mu,
                            double t, double h, S* q, S* p) {
  const int n = sys.dof();
  const int m = 2 * n;
  std::vector<double> mu_primal(mu.size());
  for (size_t j = 0; j < mu.size(); ++j) mu_primal[j] = primal(mu[j]);
  std::vector<double> z0(static_cast<size_t>(m));
  for (int i = 0; i < n; ++i) {
    z0[static_cast<size_t>(i)] = primal(q[i]);
    z0[static_cast<size_t>(n + i)] = primal(p[i]);
  }

  auto residual_primal = [&](const std::vector<double>& y,
                             std::vector<double>& r) {
    double mq[2], mp[2], fq[2], fp[2];
    for (int i = 0; i < n; ++i) {
      mq[i] = 0.5 * (z0[static_cast<size_t>(i)] + y[static_cast<size_t>(i)]);
      mp[i] = 0.5 * (z0[static_cast<size_t>(n + i)] +
                     y[static_cast<size_t>(n + i)]);
    }
    vector_field<double>(sys, std::span<const double>(mu_primal), mq, mp, fq,
                         fp);
    for (int i = 0; i < n; ++i) {
      r[static_cast<size_t>(i)] =
          y[static_cast<size_t>(i)] - z0[static_cast<size_t>(i)] - h * fq[i];
      r[static_cast<size_t>(n + i)] = y[static_cast<size_t>(n + i)] -
                                      z0[static_cast<size_t>(n + i)] -
                                      h * fp[i];
    }
  };
  auto jacobian = [&](const std::vector<double>& y) {
    double mq[2], mp[2];
    for (int i = 0; i < n; ++i) {
      mq[i] = 0.5 * (z0[static_cast<size_t>(i)] + y[static_cast<size_t>(i)]);
      mp[i] = 0.5 * (z0[static_cast<size_t>(n + i)] +
                     y[static_cast<size_t>(n + i)]);
    }
    Eigen::MatrixXd df =
        field_jacobian(sys, std::span<const double>(mu_primal), mq, mp);
    return Eigen::MatrixXd(Eigen::MatrixXd::Identity(m, m) - 0.5 * h * df);
  };

  // Explicit Euler predictor.
  std::vector<double> y = z0;
  {
    double fq[2], fp[2];
    vector_field<double>(sys, std::span<const double>(mu_primal), z0.data(),
                         z0.data() + n, fq, fp);
    for (int i = 0; i < n; ++i) {
      y[static_cast<size_t>(i)] += h * fq[i];
      y[static_cast<size_t>(n + i)] += h * fp[i];
    }
  }
  y = solve_stage({residual_primal, jacobian, m}, std::move(y), t, h);

  if constexpr (std::is_same_v<S, double>) {
    for (int i = 0; i < n; ++i) {
      q[i] = y[static_cast<size_t>(i)];
      p[i] = y[static_cast<size_t>(n + i)];
    }
  } else {
    // Promote the converged stage to jets and refine the Taylor
    // coefficients through the fixed point.
    std::vector<Jet2> yj(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i)
      yj[static_cast<size_t>(i)] =
          zero_like(q[0]) + y[static_cast<size_t>(i)];
    auto residual_jets = [&](const std::vector<Jet2>& yy,
                             std::vector<Jet2>& r) {
      Jet2 mq[2], mp[2], fq[2], fp[2];
      for (int i = 0; i < n; ++i) {
        mq[i] = 0.5 * (q[i] + yy[static_cast<size_t>(i)]);
        mp[i] = 0.5 * (p[i] + yy[static_cast<size_t>(n + i)]);
      }
      vector_field<Jet2>(sys, mu, mq, mp, fq, fp);
      for (int i = 0; i < n; ++i) {
        r[static_cast<size_t>(i)] =
            yy[static_cast<size_t>(i)] - q[i] - h * fq[i];
        r[static_cast<size_t>(n + i)] =
            yy[static_cast<size_t>(n + i)] - p[i] - h * fp[i];
      }
    };
    jet_sweeps(residual_jets, jacobian(y), yj);
    for (int i = 0; i < n; ++i) {
      q[i] = yj[static_cast<size_t>(i)];
      p[i] = yj[static_cast<size_t>(n + i)];
    }
  }
}

// General (non-separable) Stoermer-Verlet:
//   p_h = p0 - h/2 dH/dq(q0, p_h)
//   q1  = q0 + h/2 [dH/dp(q0, p_h) + dH/dp(q1, p_h)]
//   p1  = p_h - h/2 dH/dq(q1, p_h)
template <class S>
void step_sv_general(const System& sys, std::span<const S> mu, double t,
                     double h, S* q, S* p) {
  const int n = sys.dof();
  std::vector<double> mu_primal(mu.size());
  for (size_t j = 0; j < mu.size(); ++j) mu_primal[j] = primal(mu[j]);
  std::span<const double> mup(mu_primal);
  double q0[2], p0[2];
  for (int i = 0; i < n; ++i) {
    q0[i] = primal(q[i]);
    p0[i] = primal(p[i]);
  }

  auto hess_primal = [&](const double* qq, const double* pp) {
    return field_jacobian(sys, mup, qq, pp);
  };

  // Substep A: momentum half step, implicit in p_h.
  auto res_a = [&](const std::vector<double>& ph, std::vector<double>& r) {
    double dq[2], dp[2];
    energy_gradient<double>(sys, mup, q0, ph.data(), dq, dp);
    for (int i = 0; i < n; ++i)
      r[static_cast<size_t>(i)] =
          ph[static_cast<size_t>(i)] - p0[i] + 0.5 * h * dq[i];
  };
  auto jac_a = [&](const std::vector<double>& ph) {
    // d r / d p_h = I + h/2 * d(dH/dq)/dp; -df.bottom-left... use the
    // field Jacobian blocks: d(dH/dq_i)/dp_j = -df(n+i, n+j).
    Eigen::MatrixXd df = hess_primal(q0, ph.data());
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) J(i, j) -= 0.5 * h * df(n + i, n + j);
    return J;
  };
  std::vector<double> ph(p0, p0 + n);
  {
    double dq[2], dp[2];
    energy_gradient<double>(sys, mup, q0, p0, dq, dp);
    for (int i = 0; i < n; ++i) ph[static_cast<size_t>(i)] -= 0.5 * h * dq[i];
  }
  ph = solve_stage({res_a, jac_a, n}, std::move(ph), t, h);

  // Substep B: position full step, implicit in q1.
  auto res_b = [&](const std::vector<double>& q1, std::vector<double>& r) {
    double dq0[2], dp0[2], dq1[2], dp1[2];
    energy_gradient<double>(sys, mup, q0, ph.data(), dq0, dp0);
    energy_gradient<double>(sys, mup, q1.data(), ph.data(), dq1, dp1);
    for (int i = 0; i < n; ++i)
      r[static_cast<size_t>(i)] = q1[static_cast<size_t>(i)] - q0[i] -
                                  0.5 * h * (dp0[i] + dp1[i]);
  };
  auto jac_b = [&](const std::vector<double>& q1) {
    Eigen::MatrixXd df = hess_primal(q1.data(), ph.data());
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) J(i, j) -= 0.5 * h * df(i, j);
    return J;
  };
  std::vector<double> q1(q0, q0 + n);
  {
    double dq[2], dp[2];
    energy_gradient<double>(sys, mup, q0, ph.data(), dq, dp);
    for (int i = 0; i < n; ++i) q1[static_cast<size_t>(i)] += h * dp[i];
  }
  q1 = solve_stage({res_b, jac_b, n}, std::move(q1), t, h);

  if constexpr (std::is_same_v<S, double>) {
    double dq[2], dp[2];
    energy_gradient<double>(sys, mup, q1.data(), ph.data(), dq, dp);
    for (int i = 0; i < n; ++i) {
      q[i] = q1[static_cast<size_t>(i)];
      p[i] = ph[static_cast<size_t>(i)] - 0.5 * h * dq[i];
    }
  } else {
    // Jet refinement of both implicit substeps, then the explicit tail.
    std::vector<Jet2> phj(static_cast<size_t>(n)), q1j(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      phj[static_cast<size_t>(i)] =
          zero_like(q[0]) + ph[static_cast<size_t>(i)];
    auto res_a_j = [&](const std::vector<Jet2>& y, std::vector<Jet2>& r) {
      Jet2 dq[2], dp[2];
      energy_gradient<Jet2>(sys, mu, q, y.data(), dq, dp);
      for (int i = 0; i < n; ++i)
        r[static_cast<size_t>(i)] =
            y[static_cast<size_t>(i)] - p[i] + (0.5 * h) * dq[i];
    };
    jet_sweeps(res_a_j, jac_a(ph), phj);

    for (int i = 0; i < n; ++i)
      q1j[static_cast<size_t>(i)] =
          zero_like(q[0]) + q1[static_cast<size_t>(i)];
    auto res_b_j = [&](const std::vector<Jet2>& y, std::vector<Jet2>& r) {
      Jet2 dq0[2], dp0[2], dq1[2], dp1[2];
      energy_gradient<Jet2>(sys, mu, q, phj.data(), dq0, dp0);
      energy_gradient<Jet2>(sys, mu, y.data(), phj.data(), dq1, dp1);
      for (int i = 0; i < n; ++i)
        r[static_cast<size_t>(i)] = y[static_cast<size_t>(i)] - q[i] -
                                    (0.5 * h) * (dp0[i] + dp1[i]);
    };
    jet_sweeps(res_b_j, jac_b(q1), q1j);

    Jet2 dq[2], dp[2];
    energy_gradient<Jet2>(sys, mu, q1j.data(), phj.data(), dq, dp);
    for (int i = 0; i < n; ++i) {
      q[i] = q1j[static_cast<size_t>(i)];
      p[i] = phj[static_cast<size_t>(i)] - (0.5 * h) * dq[i];
    }
  }
}

// 3-stage Lobatto IIIA (order 4, stiffly accurate; first stage explicit).
constexpr double kLobattoA[3][3] = {
    {0.0, 0.0, 0.0},
    {5.0 / 24.0, 1.0 / 3.0, -1.0 / 24.0},
    {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
};

template <class S>
void step_lobatto3a(const System& sys, std::span<const S> mu, double t,
                    double h, S* q, S* p) {
  const int n = sys.dof();
  const int m = 2 * n;
  std::vector<double> mu_primal(mu.size());
  for (size_t j = 0; j < mu.size(); ++j) mu_primal[j] = primal(mu[j]);
  std::span<const double> mup(mu_primal);
  std::vector<double> z0(static_cast<size_t>(m));
  for (int i = 0; i < n; ++i) {
    z0[static_cast<size_t>(i)] = primal(q[i]);
    z0[static_cast<size_t>(n + i)] = primal(p[i]);
  }

  auto field_at = [&](const double* z, double* f) {
    vector_field<double>(sys, mup, z, z + n, f, f + n);
  };

  double f1[4];
  field_at(z0.data(), f1);

  // Unknowns: stages Y2, Y3 stacked (2m doubles).
  auto res_primal = [&](const std::vector<double>& u,
                        std::vector<double>& r) {
    double f2[4], f3[4];
    field_at(u.data(), f2);
    field_at(u.data() + m, f3);
    const double* fs[3] = {f1, f2, f3};
    for (int stage = 0; stage < 2; ++stage) {
      const double* a = kLobattoA[stage + 1];
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += a[j] * fs[j][i];
        r[static_cast<size_t>(stage * m + i)] =
            u[static_cast<size_t>(stage * m + i)] -
            z0[static_cast<size_t>(i)] - h * acc;
      }
    }
  };
  auto jac_primal = [&](const std::vector<double>& u) {
    Eigen::MatrixXd df2 = field_jacobian(sys, mup, u.data(), u.data() + n);
    Eigen::MatrixXd df3 =
        field_jacobian(sys, mup, u.data() + m, u.data() + m + n);
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(2 * m, 2 * m);
    J.block(0, 0, m, m) -= h * kLobattoA[1][1] * df2;
    J.block(0, m, m, m) -= h * kLobattoA[1][2] * df3;
    J.block(m, 0, m, m) -= h * kLobattoA[2][1] * df2;
    J.block(m, m, m, m) -= h * kLobattoA[2][2] * df3;
    return J;
  };

  // Explicit Euler predictor for the stage values.
  std::vector<double> u(static_cast<size_t>(2 * m));
  for (int i = 0; i < m; ++i) {
    u[static_cast<size_t>(i)] = z0[static_cast<size_t>(i)] + 0.5 * h * f1[i];
    u[static_cast<size_t>(m + i)] = z0[static_cast<size_t>(i)] + h * f1[i];
  }
  u = solve_stage({res_primal, jac_primal, 2 * m}, std::move(u), t, h);

  if constexpr (std::is_same_v<S, double>) {
    for (int i = 0; i < n; ++i) {
      q[i] = u[static_cast<size_t>(m + i)];
      p[i] = u[static_cast<size_t>(m + n + i)];
    }
  } else {
    std::vector<Jet2> uj(static_cast<size_t>(2 * m));
    for (int i = 0; i < 2 * m; ++i)
      uj[static_cast<size_t>(i)] = zero_like(q[0]) + u[static_cast<size_t>(i)];
    auto res_jets = [&](const std::vector<Jet2>& uu, std::vector<Jet2>& r) {
      Jet2 f1j[4], f2j[4], f3j[4];
      vector_field<Jet2>(sys, mu, q, p, f1j, f1j + n);
      vector_field<Jet2>(sys, mu, uu.data(), uu.data() + n, f2j, f2j + n);
      vector_field<Jet2>(sys, mu, uu.data() + m, uu.data() + m + n, f3j,
                         f3j + n);
      const Jet2* fs[3] = {f1j, f2j, f3j};
      for (int stage = 0; stage < 2; ++stage) {
        const double* a = kLobattoA[stage + 1];
        for (int i = 0; i < m; ++i) {
          Jet2 acc = zero_like(q[0]);
          for (int j = 0; j < 3; ++j) acc += a[j] * fs[j][i];
          const S& base = (i < n) ? q[i] : p[i - n];
          r[static_cast<size_t>(stage * m + i)] =
              uu[static_cast<size_t>(stage * m + i)] - base - h * acc;
        }
      }
    };
    jet_sweeps(res_jets, jac_primal(u), uj);
    // Stiffly accurate: the step result is the last stage.
    for (int i = 0; i < n; ++i) {
      q[i] = uj[static_cast<size_t>(m + i)];
      p[i] = uj[static_cast<size_t>(m + n + i)];
    }
  }
}

template <class S>
void step_impl(const Method& method, const System& sys,
               std::span<const S> mu, double t, double h, S* q, S* p) {
  switch (method.id) {
    case MethodId::stormer_verlet:
      if (sys.separable())
        step_sv_separable<S>(sys, mu, h, q, p);
      else
        step_sv_general<S>(sys, mu, t, h, q, p);
      return;
    case MethodId::implicit_midpoint:
      step_implicit_midpoint<S>(sys, mu, t, h, q, p);
      return;
    case MethodId::rk2:
      step_rk2<S>(sys, mu, h, q, p);
      return;
    case MethodId::rk4:
      step_rk4<S>(sys, mu, h, q, p);
      return;
    case MethodId::lobatto3a:
      step_lobatto3a<S>(sys, mu, t, h, q, p);
      return;
  }
  throw Error("unhandled method id");
}

}  // namespace

const Method& method_by_name(const std::string& name) {
  for (const Method& m : method_table())
    if (m.name == name) return m;
  throw Error("unknown method: " + name);
}

std::vector<Method> all_methods() { return method_table(); }

void step_primal(const Method& method, const System& sys,
                 const Eigen::VectorXd& mu, double t, double h,
                 PhasePoint& z) {
  const int n = sys.dof();
  std::vector<double> mv(mu.data(), mu.data() + mu.size());
  std::vector<double> q(z.q.data(), z.q.data() + n);
  std::vector<double> p(z.p.data(), z.p.data() + n);
  step_impl<double>(method, sys, std::span<const double>(mv), t, h, q.data(),
                    p.data());
  for (int i = 0; i < n; ++i) {
    z.q[i] = q[static_cast<size_t>(i)];
    z.p[i] = p[static_cast<size_t>(i)];
  }
}

PhasePoint flow_primal(const Method& method, const System& sys,
                       const Eigen::VectorXd& mu, const Mesh& mesh,
                       const PhasePoint& z0,
                       std::vector<PhasePoint>* trajectory) {
  if (z0.dof() != sys.dof()) throw DimensionError("flow: dof mismatch");
  if (!z0.finite()) throw DivergenceError("flow: non-finite start", 0);
  PhasePoint z = z0;
  if (trajectory) {
    trajectory->clear();
    trajectory->push_back(z);
  }
  for (int i = 0; i < mesh.steps(); ++i) {
    step_primal(method, sys, mu, mesh.times[static_cast<size_t>(i)],
                mesh.step(i), z);
    if (!z.finite())
      throw DivergenceError("flow diverged at step " + std::to_string(i), i);
    if (trajectory) trajectory->push_back(z);
  }
  return z;
}

FlowResult flow(const Method& method, const System& sys,
                const Eigen::VectorXd& mu, const Mesh& mesh,
                const PhasePoint& z0, const SeedSpec& seeds) {
  const int n = sys.dof();
  if (z0.dof() != n) throw DimensionError("flow: dof mismatch");
  if (mu.size() != sys.param_count())
    throw DimensionError("flow: parameter count mismatch");
  if (!z0.finite()) throw DivergenceError("flow: non-finite start", 0);

  const int s = seeds.total();
  if (s > kMaxSeeds) throw DimensionError("too many seed directions");

  std::vector<Jet2> q(static_cast<size_t>(n)), p(static_cast<size_t>(n));
  std::vector<Jet2> muj(static_cast<size_t>(mu.size()));
  Eigen::VectorXd zflat = z0.flat();
  for (int i = 0; i < n; ++i) {
    q[static_cast<size_t>(i)] = Jet2(zflat[i], s);
    p[static_cast<size_t>(i)] = Jet2(zflat[n + i], s);
  }
  for (int j = 0; j < mu.size(); ++j)
    muj[static_cast<size_t>(j)] = Jet2(mu[j], s);
  int seed = 0;
  for (int d : seeds.state_dirs) {
    if (d < 0 || d >= 2 * n) throw DimensionError("bad state seed index");
    Jet2& target = (d < n) ? q[static_cast<size_t>(d)]
                           : p[static_cast<size_t>(d - n)];
    target.set_grad(seed, 1.0);
    ++seed;
  }
  for (int j : seeds.param_dirs) {
    if (j < 0 || j >= mu.size()) throw DimensionError("bad param seed index");
    muj[static_cast<size_t>(j)].set_grad(seed, 1.0);
    ++seed;
  }

  FlowResult out;
  if (seeds.record_trajectory) {
    out.trajectory.push_back(z0);
  }
  for (int i = 0; i < mesh.steps(); ++i) {
    step_impl<Jet2>(method, sys, cspan(muj),
                    mesh.times[static_cast<size_t>(i)], mesh.step(i), q.data(),
                    p.data());
    for (int k = 0; k < n; ++k) {
      if (!std::isfinite(q[static_cast<size_t>(k)].value()) ||
          !std::isfinite(p[static_cast<size_t>(k)].value()))
        throw DivergenceError("flow diverged at step " + std::to_string(i),
                              i);
    }
    if (seeds.record_trajectory) {
      Eigen::VectorXd qq(n), pp(n);
      for (int k = 0; k < n; ++k) {
        qq[k] = q[static_cast<size_t>(k)].value();
        pp[k] = p[static_cast<size_t>(k)].value();
      }
      out.trajectory.emplace_back(qq, pp);
    }
  }

  Eigen::VectorXd qq(n), pp(n);
  for (int k = 0; k < n; ++k) {
    qq[k] = q[static_cast<size_t>(k)].value();
    pp[k] = p[static_cast<size_t>(k)].value();
  }
  out.end = PhasePoint(qq, pp);
  out.jac.resize(2 * n, s);
  out.hess.assign(static_cast<size_t>(2 * n), Eigen::MatrixXd::Zero(s, s));
  for (int row = 0; row < 2 * n; ++row) {
    const Jet2& c =
        (row < n) ? q[static_cast<size_t>(row)] : p[static_cast<size_t>(row - n)];
    for (int a = 0; a < s; ++a) {
      out.jac(row, a) = c.grad(a);
      for (int b = 0; b < s; ++b)
        out.hess[static_cast<size_t>(row)](a, b) = c.hess(a, b);
    }
  }
  return out;
}

double symplectic_defect(const Eigen::MatrixXd& jac) {
  const int m = static_cast<int>(jac.rows());
  if (jac.cols() != m || m % 2 != 0)
    throw DimensionError("symplectic defect needs a square even-dim matrix");
  const int n = m / 2;
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(m, m);
  omega.block(0, n, n, n) = Eigen::MatrixXd::Identity(n, n);
  omega.block(n, 0, n, n) = -Eigen::MatrixXd::Identity(n, n);
  return (jac.transpose() * omega * jac - omega).norm();
}

double order_slope(const Method& method, const System& sys,
                   const Eigen::VectorXd& mu, double tau,
                   std::span<const int> n_list, const PhasePoint& z0) {
  if (n_list.size() < 3)
    throw Error("order_slope needs at least 3 step counts");
  Eigen::VectorXd ref;
  if (sys.id() == "harmonic") {
    const double c = std::cos(tau), s = std::sin(tau);
    ref.resize(2);
    ref[0] = z0.q[0] * c + z0.p[0] * s;
    ref[1] = -z0.q[0] * s + z0.p[0] * c;
  } else {
    const Method& sv = method_by_name("stormer-verlet");
    Mesh fine = make_mesh(MeshKind::uniform, 1 << 16, tau);
    ref = flow_primal(sv, sys, mu, fine, z0).flat();
  }
  Eigen::VectorXd logh(static_cast<Eigen::Index>(n_list.size()));
  Eigen::VectorXd loge(static_cast<Eigen::Index>(n_list.size()));
  for (size_t k = 0; k < n_list.size(); ++k) {
    Mesh mesh = make_mesh(MeshKind::uniform, n_list[k], tau);
    Eigen::VectorXd end = flow_primal(method, sys, mu, mesh, z0).flat();
    logh[static_cast<Eigen::Index>(k)] = std::log(tau / n_list[k]);
    loge[static_cast<Eigen::Index>(k)] = std::log((end - ref).norm());
  }
  const double mh = logh.mean(), me = loge.mean();
  double num = 0.0, den = 0.0;
  for (Eigen::Index k = 0; k < logh.size(); ++k) {
    num += (logh[k] - mh) * (loge[k] - me);
    den += (logh[k] - mh) * (logh[k] - mh);
  }
  return num / den;
}

double energy_value(const System& sys, const PhasePoint& z,
                    const Eigen::VectorXd& mu) {
  std::vector<double> q(z.q.data(), z.q.data() + z.dof());
  std::vector<double> p(z.p.data(), z.p.data() + z.dof());
  std::vector<double> m(mu.data(), mu.data() + mu.size());
  return sys.energy(std::span<const double>(q), std::span<const double>(p),
                    std::span<const double>(m));
}

}  // namespace hambvp
