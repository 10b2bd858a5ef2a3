#include "hambvp/mesh.hpp"

#include <cmath>

#include "hambvp/errors.hpp"

namespace hambvp {

namespace {

void validate(const Mesh& m) {
  if (m.times.size() < 2) throw MeshError("mesh needs at least one step");
  if (m.times.front() != 0.0) throw MeshError("mesh must start at t = 0");
  for (size_t i = 0; i + 1 < m.times.size(); ++i) {
    if (!(m.times[i + 1] > m.times[i]))
      throw MeshError("mesh times not strictly increasing at index " +
                      std::to_string(i));
  }
  for (double t : m.times)
    if (!std::isfinite(t)) throw MeshError("non-finite mesh time");
}

}  // namespace

Mesh make_mesh(MeshKind kind, int N, double tau,
               const std::function<double(double)>& warp) {
  if (N < 1) throw MeshError("mesh needs N >= 1 steps");
  if (!(tau > 0.0)) throw MeshError("mesh duration must be positive");
  Mesh m;
  m.times.resize(static_cast<size_t>(N) + 1);
  switch (kind) {
    case MeshKind::uniform:
      for (int i = 0; i <= N; ++i)
        m.times[static_cast<size_t>(i)] = tau * static_cast<double>(i) / N;
      m.uniform = true;
      break;
    case MeshKind::warped: {
      if (!warp) throw MeshError("warped mesh needs a warp map");
      if (std::abs(warp(0.0)) > 1e-12 || std::abs(warp(1.0) - 1.0) > 1e-12)
        throw MeshError("warp must fix 0 and 1");
      for (int i = 0; i <= N; ++i)
        m.times[static_cast<size_t>(i)] =
            tau * warp(static_cast<double>(i) / N);
      m.times.front() = 0.0;
      m.times.back() = tau;
      m.uniform = false;
      break;
    }
    case MeshKind::explicit_points:
      throw MeshError("use make_mesh_explicit for explicit time points");
  }
  validate(m);
  return m;
}

Mesh make_mesh_explicit(std::vector<double> times) {
  Mesh m;
  m.times = std::move(times);
  m.uniform = false;
  validate(m);
  return m;
}

std::function<double(double)> warp_by_name(const std::string& id) {
  if (id == "identity") return [](double t) { return t; };
  if (id == "exp-sin") {
    const double denom = std::exp(5.0) * std::sin(2.6);
    return [denom](double t) {
      return std::exp(5.0 * t) * std::sin(2.6 * t) / denom;
    };
  }
  throw MeshError("unknown warp id: " + id);
}

}  // namespace hambvp
