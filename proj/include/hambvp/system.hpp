#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hambvp/jet.hpp"
#include "hambvp/phase.hpp"

namespace hambvp {

/// A parameter-dependent Hamiltonian H(q, p; mu) evaluated over generic
/// scalars, so the same definition serves plain evaluation, phase-space
/// gradients (via Dual) and seed-direction derivatives (via Jet2).
///
/// Systems declared separable (H = T(p; mu) + V(q; mu)) additionally expose
/// the split, which the Stoermer-Verlet scheme uses for its explicit form.
class System {
 public:
  virtual ~System() = default;

  const std::string& id() const { return id_; }
  int dof() const { return n_; }
  int param_count() const { return params_; }
  bool separable() const { return separable_; }
  const std::string& description() const { return desc_; }

  virtual double energy(std::span<const double> q, std::span<const double> p,
                        std::span<const double> mu) const = 0;
  virtual Jet2 energy(std::span<const Jet2> q, std::span<const Jet2> p,
                      std::span<const Jet2> mu) const = 0;
  virtual Dual<double> energy(std::span<const Dual<double>> q,
                              std::span<const Dual<double>> p,
                              std::span<const Dual<double>> mu) const = 0;
  virtual Dual<Jet2> energy(std::span<const Dual<Jet2>> q,
                            std::span<const Dual<Jet2>> p,
                            std::span<const Dual<Jet2>> mu) const = 0;

  // Split parts; only meaningful when separable() is true.
  virtual double kinetic(std::span<const double> p,
                         std::span<const double> mu) const = 0;
  virtual Jet2 kinetic(std::span<const Jet2> p,
                       std::span<const Jet2> mu) const = 0;
  virtual Dual<double> kinetic(std::span<const Dual<double>> p,
                               std::span<const Dual<double>> mu) const = 0;
  virtual Dual<Jet2> kinetic(std::span<const Dual<Jet2>> p,
                             std::span<const Dual<Jet2>> mu) const = 0;
  virtual double potential(std::span<const double> q,
                           std::span<const double> mu) const = 0;
  virtual Jet2 potential(std::span<const Jet2> q,
                         std::span<const Jet2> mu) const = 0;
  virtual Dual<double> potential(std::span<const Dual<double>> q,
                                 std::span<const Dual<double>> mu) const = 0;
  virtual Dual<Jet2> potential(std::span<const Dual<Jet2>> q,
                               std::span<const Dual<Jet2>> mu) const = 0;

 protected:
  System(std::string id, int n, int params, bool separable, std::string desc)
      : id_(std::move(id)),
        n_(n),
        params_(params),
        separable_(separable),
        desc_(std::move(desc)) {}

 private:
  std::string id_;
  int n_;
  int params_;
  bool separable_;
  std::string desc_;
};

/// Fills the per-scalar virtuals from one templated definition. Derived
/// provides:
///   template <class S> S energy_impl(span q, span p, span mu) const;
/// and, when separable,
///   template <class S> S kinetic_impl(span p, span mu) const;
///   template <class S> S potential_impl(span q, span mu) const;
template <class Derived>
class SystemModel : public System {
 public:
  using System::System;

#define HAMBVP_ENERGY_OVERRIDE(S)                                         \
  S energy(std::span<const S> q, std::span<const S> p,                    \
           std::span<const S> mu) const override {                        \
    return self().template energy_impl<S>(q, p, mu);                      \
  }                                                                       \
  S kinetic(std::span<const S> p, std::span<const S> mu) const override { \
    return self().template kinetic_impl<S>(p, mu);                        \
  }                                                                       \
  S potential(std::span<const S> q, std::span<const S> mu)                \
      const override {                                                    \
    return self().template potential_impl<S>(q, mu);                      \
  }

  HAMBVP_ENERGY_OVERRIDE(double)
  HAMBVP_ENERGY_OVERRIDE(Jet2)
  HAMBVP_ENERGY_OVERRIDE(Dual<double>)
  HAMBVP_ENERGY_OVERRIDE(Dual<Jet2>)
#undef HAMBVP_ENERGY_OVERRIDE

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

/// Registry of the named systems. Lookup throws DimensionError-free
/// Error on unknown ids; names are part of the CLI contract.
const System& system_by_name(const std::string& id);
std::vector<const System*> all_systems();
void register_system(std::shared_ptr<const System> sys);

/// H, grad H (length 2n, ordered dH/dq then dH/dp) and the symmetric
/// 2n x 2n Hessian of H at a phase point.
struct EnergyDerivatives {
  double value;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};
EnergyDerivatives eval_system(const System& sys, const PhasePoint& z,
                              const Eigen::VectorXd& mu);

}  // namespace hambvp
