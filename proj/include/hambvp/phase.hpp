#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "hambvp/errors.hpp"

namespace hambvp {

/// Point in 2n-dimensional phase space: configuration q and momentum p.
struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;

  PhasePoint() = default;
  PhasePoint(Eigen::VectorXd q_, Eigen::VectorXd p_)
      : q(std::move(q_)), p(std::move(p_)) {
    if (q.size() != p.size())
      throw DimensionError("phase point needs len(q) == len(p)");
  }

  int dof() const { return static_cast<int>(q.size()); }

  bool finite() const {
    return q.allFinite() && p.allFinite();
  }

  /// Flat (q, p) vector of length 2n.
  Eigen::VectorXd flat() const {
    Eigen::VectorXd z(2 * dof());
    z << q, p;
    return z;
  }

  static PhasePoint from_flat(const Eigen::VectorXd& z) {
    const int n = static_cast<int>(z.size()) / 2;
    if (z.size() != 2 * n || n == 0)
      throw DimensionError("flat phase vector must have even length");
    return PhasePoint(z.head(n), z.tail(n));
  }
};

}  // namespace hambvp
