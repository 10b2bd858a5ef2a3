#pragma once

#include <span>

#include "hambvp/continuation.hpp"

namespace hambvp {

/// Axis scales used to normalize diagram coordinates before measuring the
/// gap; experiments keep them fixed across step counts so magnitudes are
/// comparable.
struct BreakScales {
  double lambda_scale = 1.0;
  double value_scale = 1.0;
};

/// How far a diagram is from a perfect pitchfork crossing. The gap is the
/// scaled minimum distance between the disconnected branch's fold point and
/// the continuous branch (zero when the branches cross transversally). The
/// reported magnitude is the cube of the gap: near a broken pitchfork the
/// geometric gap grows like the cube root of the unfolding amplitude, so
/// the cubed gap tracks the symmetry-breaking term linearly and fits the
/// step-size scaling laws directly.
struct BreakResult {
  double magnitude = 0.0;
  double gap = 0.0;
  int folded_branch = -1;
  int continuous_branch = -1;
  double fold_lambda = 0.0;
  double fold_value = 0.0;
};

BreakResult break_magnitude(const Diagram& dia, const BreakScales& scales);

enum class FitModel { exponential, power };

/// Fits log b against N (exponential in 1/h) and against log h (power law);
/// whichever leaves the smaller residual wins. rate is the slope of the
/// winning fit: beta per step for the exponential model, the exponent kappa
/// for the power model.
struct ScalingFit {
  FitModel model = FitModel::power;
  double rate = 0.0;
  double ssr_exponential = 0.0;
  double ssr_power = 0.0;
};

ScalingFit scaling_fit(std::span<const int> n_list,
                       std::span<const double> breaks, double tau);

}  // namespace hambvp
