#include "hambvp/breaks.hpp"

#include <algorithm>
#include <cmath>

#include "hambvp/errors.hpp"

namespace hambvp {

namespace {

using Poly = std::vector<Eigen::Vector2d>;  // scaled (lambda, value) polyline

Poly scaled_polyline(const Branch& b, const BreakScales& s) {
  Poly out;
  out.reserve(b.points.size());
  for (const auto& p : b.points)
    out.emplace_back(p.lambda / s.lambda_scale, p.functional / s.value_scale);
  return out;
}

double point_segment_distance(const Eigen::Vector2d& p,
                              const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
  Eigen::Vector2d ab = b - a;
  double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double point_polyline_distance(const Eigen::Vector2d& p, const Poly& poly) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < poly.size(); ++i)
    best = std::min(best, point_segment_distance(p, poly[i], poly[i + 1]));
  if (poly.size() == 1) best = (p - poly[0]).norm();
  return best;
}

bool segments_cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                    const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  auto orient = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q,
                   const Eigen::Vector2d& r) {
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  };
  double o1 = orient(a, b, c), o2 = orient(a, b, d);
  double o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 * o2 < 0 && o3 * o4 < 0;
}

bool polylines_cross(const Poly& x, const Poly& y) {
  for (size_t i = 0; i + 1 < x.size(); ++i)
    for (size_t j = 0; j + 1 < y.size(); ++j)
      if (segments_cross(x[i], x[i + 1], y[j], y[j + 1])) return true;
  return false;
}

}  // namespace

BreakResult break_magnitude(const Diagram& dia, const BreakScales& scales) {
  if (dia.branches.empty())
    throw UnmeasurableError("break_magnitude: empty diagram");

  // Continuous branch: fold-free with the largest lambda span.
  int continuous = -1;
  double best_span = -1.0;
  for (const auto& b : dia.branches) {
    if (b.points.empty() || !b.folds().empty()) continue;
    double lo = b.points.front().lambda, hi = lo;
    for (const auto& p : b.points) {
      lo = std::min(lo, p.lambda);
      hi = std::max(hi, p.lambda);
    }
    if (hi - lo > best_span) {
      best_span = hi - lo;
      continuous = b.id;
    }
  }
  if (continuous < 0)
    throw UnmeasurableError(
        "break_magnitude: no fold-free continuous branch in the diagram");
  const Branch* cont = nullptr;
  for (const auto& b : dia.branches)
    if (b.id == continuous) cont = &b;
  Poly cont_poly = scaled_polyline(*cont, scales);

  BreakResult out;
  out.continuous_branch = continuous;
  double best_gap = std::numeric_limits<double>::infinity();
  bool measured = false;
  for (const auto& b : dia.branches) {
    if (b.id == continuous) continue;
    Poly poly = scaled_polyline(b, scales);
    const bool crossing = polylines_cross(poly, cont_poly);
    for (const auto* fold : b.folds()) {
      measured = true;
      Eigen::Vector2d fp(fold->lambda / scales.lambda_scale,
                         fold->functional / scales.value_scale);
      double gap = crossing ? 0.0 : point_polyline_distance(fp, cont_poly);
      if (gap < best_gap) {
        best_gap = gap;
        out.folded_branch = b.id;
        out.fold_lambda = fold->lambda;
        out.fold_value = fold->functional;
      }
    }
    if (b.folds().empty() && crossing) {
      // transversal crossing without a fold: a perfect crossing
      measured = true;
      if (0.0 < best_gap) {
        best_gap = 0.0;
        out.folded_branch = b.id;
      }
    }
  }
  if (!measured)
    throw UnmeasurableError(
        "break_magnitude: no disconnected branch with a fold and no "
        "crossing");
  if (best_gap <= 1e-12) best_gap = 0.0;
  out.gap = best_gap;
  out.magnitude = best_gap * best_gap * best_gap;
  return out;
}

ScalingFit scaling_fit(std::span<const int> n_list,
                       std::span<const double> breaks, double tau) {
  if (n_list.size() != breaks.size())
    throw DimensionError("scaling_fit: mismatched lists");
  if (n_list.size() < 4) throw Error("scaling_fit needs at least 4 points");
  for (double b : breaks)
    if (!(b > 0.0)) throw Error("scaling_fit needs positive break values");

  const int k = static_cast<int>(n_list.size());
  Eigen::VectorXd logb(k), nn(k), logh(k);
  for (int i = 0; i < k; ++i) {
    logb[i] = std::log(breaks[i]);
    nn[i] = static_cast<double>(n_list[i]);
    logh[i] = std::log(tau / n_list[i]);
  }
  auto fit = [&](const Eigen::VectorXd& xs, double& slope) {
    const double mx = xs.mean(), my = logb.mean();
    double num = 0.0, den = 0.0;
    for (int i = 0; i < k; ++i) {
      num += (xs[i] - mx) * (logb[i] - my);
      den += (xs[i] - mx) * (xs[i] - mx);
    }
    slope = num / den;
    const double icept = my - slope * mx;
    double ssr = 0.0;
    for (int i = 0; i < k; ++i) {
      double e = logb[i] - (icept + slope * xs[i]);
      ssr += e * e;
    }
    return ssr;
  };
  double beta = 0.0, kappa = 0.0;
  ScalingFit out;
  out.ssr_exponential = fit(nn, beta);
  out.ssr_power = fit(logh, kappa);
  if (out.ssr_exponential < out.ssr_power) {
    out.model = FitModel::exponential;
    out.rate = beta;
  } else {
    out.model = FitModel::power;
    out.rate = kappa;
  }
  return out;
}

}  // namespace hambvp
