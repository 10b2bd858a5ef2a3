#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "hambvp/mesh.hpp"
#include "hambvp/phase.hpp"
#include "hambvp/system.hpp"

namespace hambvp {

enum class MethodId {
  stormer_verlet,
  implicit_midpoint,
  rk2,
  rk4,
  lobatto3a,
};

/// One-step method approximating the Hamiltonian time-h map.
struct Method {
  MethodId id;
  std::string name;
  int order;
  bool symplectic;
  bool implicit;
};

const Method& method_by_name(const std::string& name);
std::vector<Method> all_methods();

/// Which derivatives of the flow map to carry: indices into the flat state
/// (q then p, 0..2n-1) and indices into the parameter vector. The jet seed
/// order is state_dirs followed by param_dirs.
struct SeedSpec {
  std::vector<int> state_dirs;
  std::vector<int> param_dirs;
  bool record_trajectory = false;

  int total() const {
    return static_cast<int>(state_dirs.size() + param_dirs.size());
  }
  static SeedSpec state_only(int n2, bool record = false) {
    SeedSpec s;
    for (int i = 0; i < n2; ++i) s.state_dirs.push_back(i);
    s.record_trajectory = record;
    return s;
  }
};

/// Endpoint of the composed flow plus first and second derivatives with
/// respect to the seeded directions.
struct FlowResult {
  PhasePoint end;
  Eigen::MatrixXd jac;                // 2n x seeds
  std::vector<Eigen::MatrixXd> hess;  // one seeds x seeds matrix per row
  std::vector<PhasePoint> trajectory; // mesh samples when requested
};

FlowResult flow(const Method& method, const System& sys,
                const Eigen::VectorXd& mu, const Mesh& mesh,
                const PhasePoint& z0, const SeedSpec& seeds);

PhasePoint flow_primal(const Method& method, const System& sys,
                       const Eigen::VectorXd& mu, const Mesh& mesh,
                       const PhasePoint& z0,
                       std::vector<PhasePoint>* trajectory = nullptr);

/// Single primal step, exposed for consistency tests.
void step_primal(const Method& method, const System& sys,
                 const Eigen::VectorXd& mu, double t, double h,
                 PhasePoint& z);

/// || J^T Omega J - Omega ||_F for the canonical skew form Omega. Zero for
/// the Jacobian of a symplectic map.
double symplectic_defect(const Eigen::MatrixXd& jac);

/// Least-squares slope of log(endpoint error) against log(h) over the given
/// step counts. The reference is the closed-form rotation for the harmonic
/// system and a fine Stoermer-Verlet composite (N = 2^16) otherwise.
double order_slope(const Method& method, const System& sys,
                   const Eigen::VectorXd& mu, double tau,
                   std::span<const int> n_list, const PhasePoint& z0);

/// Plain H(q, p; mu).
double energy_value(const System& sys, const PhasePoint& z,
                    const Eigen::VectorXd& mu);

}  // namespace hambvp
