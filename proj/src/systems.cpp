#include "hambvp/system.hpp"

#include <map>
#include <stdexcept>

#include "hambvp/errors.hpp"

namespace hambvp {

namespace {

/// H = 1/2 p^2 + 1/2 q^2. Closed-form flow is a rotation; used as the
/// analytic oracle in convergence tests.
struct Harmonic : SystemModel<Harmonic> {
  Harmonic()
      : SystemModel("harmonic", 1, 0, true,
                    "harmonic oscillator H = p^2/2 + q^2/2 (test oracle)") {}
  template <class S>
  S kinetic_impl(std::span<const S> p, std::span<const S>) const {
    return 0.5 * p[0] * p[0];
  }
  template <class S>
  S potential_impl(std::span<const S> q, std::span<const S>) const {
    return 0.5 * q[0] * q[0];
  }
  template <class S>
  S energy_impl(std::span<const S> q, std::span<const S> p,
                std::span<const S> mu) const {
    return kinetic_impl<S>(p, mu) + potential_impl<S>(q, mu);
  }
};

/// H = 1/2 p^2 + C e^q, C = mu[0]. First-order form of u'' + C e^u = 0.
struct Bratu : SystemModel<Bratu> {
  Bratu()
      : SystemModel("bratu", 1, 1, true,
                    "combustion steady states H = p^2/2 + C e^q") {}
  template <class S>
  S kinetic_impl(std::span<const S> p, std::span<const S>) const {
    return 0.5 * p[0] * p[0];
  }
  template <class S>
  S potential_impl(std::span<const S> q, std::span<const S> mu) const {
    return mu[0] * exp(q[0]);
  }
  template <class S>
  S energy_impl(std::span<const S> q, std::span<const S> p,
                std::span<const S> mu) const {
    return kinetic_impl<S>(p, mu) + potential_impl<S>(q, mu);
  }
};

/// Planar family H = p^2 + 0.1 p^3 - 0.01 cos p + q^3 - 0.01 q^2 + mu q.
/// Completely integrable (planar, autonomous); hosts the periodic pitchfork.
struct Pitchfork : SystemModel<Pitchfork> {
  Pitchfork()
      : SystemModel("pitchfork", 1, 1, true,
                    "planar pitchfork family "
                    "H = p^2 + 0.1p^3 - 0.01cos p + q^3 - 0.01q^2 + mu q") {}
  template <class S>
  S kinetic_impl(std::span<const S> p, std::span<const S>) const {
    return p[0] * p[0] + 0.1 * powi(p[0], 3) - 0.01 * cos(p[0]);
  }
  template <class S>
  S potential_impl(std::span<const S> q, std::span<const S> mu) const {
    return powi(q[0], 3) - 0.01 * q[0] * q[0] + mu[0] * q[0];
  }
  template <class S>
  S energy_impl(std::span<const S> q, std::span<const S> p,
                std::span<const S> mu) const {
    return kinetic_impl<S>(p, mu) + potential_impl<S>(q, mu);
  }
};

/// H = 1/2 |p|^2 + 1/2 |q|^2 + a (q1^2 q2 - q2^3 / 3) with a = mu[0];
/// the experiments run a = -10.
struct HenonHeiles : SystemModel<HenonHeiles> {
  HenonHeiles()
      : SystemModel("henon-heiles", 2, 1, true,
                    "Henon-Heiles H = |p|^2/2 + |q|^2/2 + a(q1^2 q2 - "
                    "q2^3/3)") {}
  template <class S>
  S kinetic_impl(std::span<const S> p, std::span<const S>) const {
    return 0.5 * (p[0] * p[0] + p[1] * p[1]);
  }
  template <class S>
  S potential_impl(std::span<const S> q, std::span<const S> mu) const {
    return 0.5 * (q[0] * q[0] + q[1] * q[1]) +
           mu[0] * (q[0] * q[0] * q[1] - powi(q[1], 3) / 3.0);
  }
  template <class S>
  S energy_impl(std::span<const S> q, std::span<const S> p,
                std::span<const S> mu) const {
    return kinetic_impl<S>(p, mu) + potential_impl<S>(q, mu);
  }
};

/// Cotangent-lifted image of Hbar = (qb1)^3 + mu qb1 + pb1 pb2 + pb1^2 +
/// (pb1^3 + pb2^3)/10 under q = M qbar, pbar = M^T p with
/// M = [[-1, 2], [3, 1]]. The momentum pbar2 = 2 p1 + p2 is a linear
/// invariant of the flow.
struct LinearInvariant4d : SystemModel<LinearInvariant4d> {
  LinearInvariant4d()
      : SystemModel("linear-invariant-4d", 2, 1, true,
                    "4D system with linear invariant 2p1 + p2 (transformed "
                    "coordinates)") {}
  template <class S>
  S kinetic_impl(std::span<const S> p, std::span<const S>) const {
    S pb1 = -1.0 * p[0] + 3.0 * p[1];
    S pb2 = 2.0 * p[0] + p[1];
    return pb1 * pb2 + pb1 * pb1 + 0.1 * (powi(pb1, 3) + powi(pb2, 3));
  }
  template <class S>
  S potential_impl(std::span<const S> q, std::span<const S> mu) const {
    S qb1 = (-1.0 / 7.0) * q[0] + (2.0 / 7.0) * q[1];
    return powi(qb1, 3) + mu[0] * qb1;
  }
  template <class S>
  S energy_impl(std::span<const S> q, std::span<const S> p,
                std::span<const S> mu) const {
    return kinetic_impl<S>(p, mu) + potential_impl<S>(q, mu);
  }
};

/// Cotangent-lifted image of Hbar = pb1^3 + mu pb1 + pb2^2 under the point
/// transformation qb1 = q1 + 0.1 cos q2, qb2 = q2 + 0.1 cos q1. The momenta
/// pbar are nonlinear in (q, p), so the system is not separable. Angles are
/// represented on the real line.
struct Torus4d : SystemModel<Torus4d> {
  Torus4d()
      : SystemModel("torus-4d", 2, 1, false,
                    "4D torus system Hbar = pb1^3 + mu pb1 + pb2^2 under a "
                    "nonlinear lift") {}
  template <class S>
  S kinetic_impl(std::span<const S>, std::span<const S>) const {
    throw Error("torus-4d is not separable");
  }
  template <class S>
  S potential_impl(std::span<const S>, std::span<const S>) const {
    throw Error("torus-4d is not separable");
  }
  template <class S>
  S energy_impl(std::span<const S> q, std::span<const S> p,
                std::span<const S> mu) const {
    // Dpsi(q)^T = [[1, -0.1 sin q1], [-0.1 sin q2, 1]]; pbar solves
    // p = Dpsi(q)^T pbar.
    S s1 = sin(q[0]);
    S s2 = sin(q[1]);
    S det = 1.0 - 0.01 * s1 * s2;
    S pb1 = (p[0] + 0.1 * s1 * p[1]) / det;
    S pb2 = (0.1 * s2 * p[0] + p[1]) / det;
    return powi(pb1, 3) + mu[0] * pb1 + pb2 * pb2;
  }
};

std::map<std::string, std::shared_ptr<const System>>& registry() {
  static std::map<std::string, std::shared_ptr<const System>> reg = [] {
    std::map<std::string, std::shared_ptr<const System>> r;
    auto add = [&r](std::shared_ptr<const System> s) {
      r.emplace(s->id(), std::move(s));
    };
    add(std::make_shared<Harmonic>());
    add(std::make_shared<Bratu>());
    add(std::make_shared<Pitchfork>());
    add(std::make_shared<HenonHeiles>());
    add(std::make_shared<LinearInvariant4d>());
    add(std::make_shared<Torus4d>());
    return r;
  }();
  return reg;
}

}  // namespace

const System& system_by_name(const std::string& id) {
  auto& reg = registry();
  auto it = reg.find(id);
  if (it == reg.end()) throw Error("unknown system: " + id);
  return *it->second;
}

std::vector<const System*> all_systems() {
  std::vector<const System*> out;
  for (const auto& [_, sys] : registry()) out.push_back(sys.get());
  return out;
}

void register_system(std::shared_ptr<const System> sys) {
  registry()[sys->id()] = std::move(sys);
}

EnergyDerivatives eval_system(const System& sys, const PhasePoint& z,
                              const Eigen::VectorXd& mu) {
  const int n = sys.dof();
  if (z.dof() != n) throw DimensionError("phase point dof mismatch");
  if (mu.size() != sys.param_count())
    throw DimensionError("parameter vector length mismatch");
  const int s = 2 * n;
  std::vector<Jet2> q(n), p(n), muj(mu.size());
  for (int i = 0; i < n; ++i) {
    q[i] = Jet2::variable(z.q[i], s, i);
    p[i] = Jet2::variable(z.p[i], s, n + i);
  }
  for (int j = 0; j < mu.size(); ++j) muj[j] = Jet2(mu[j], s);
  Jet2 H = sys.energy(std::span<const Jet2>(q), std::span<const Jet2>(p),
                      std::span<const Jet2>(muj));
  EnergyDerivatives out;
  out.value = H.value();
  out.grad.resize(s);
  out.hess.resize(s, s);
  for (int i = 0; i < s; ++i) {
    out.grad[i] = H.grad(i);
    for (int j = 0; j < s; ++j) out.hess(i, j) = H.hess(i, j);
  }
  return out;
}

}  // namespace hambvp
