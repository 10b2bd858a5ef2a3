#pragma once

#include <functional>
#include <string>
#include <vector>

namespace hambvp {

/// Time grid t_0 = 0 < t_1 < ... < t_N = tau over which one-step maps are
/// composed. Step sizes are times[i+1] - times[i].
struct Mesh {
  std::vector<double> times;
  bool uniform = true;

  int steps() const { return static_cast<int>(times.size()) - 1; }
  double tau() const { return times.back(); }
  double step(int i) const { return times[static_cast<size_t>(i) + 1] - times[static_cast<size_t>(i)]; }
};

enum class MeshKind { uniform, warped, explicit_points };

/// Builds a mesh with N steps over [0, tau]. For `warped`, times[i] =
/// tau * warp(i/N); warp must fix 0 and 1 and be strictly increasing on the
/// sample grid, otherwise a MeshError is thrown.
Mesh make_mesh(MeshKind kind, int N, double tau,
               const std::function<double(double)>& warp = {});

/// Wraps explicit time points (validated) into a Mesh.
Mesh make_mesh_explicit(std::vector<double> times);

/// Named mesh warps usable from the CLI. "exp-sin" is
/// t -> exp(5t) sin(2.6t) / (exp(5) sin(2.6)).
std::function<double(double)> warp_by_name(const std::string& id);

}  // namespace hambvp
