// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "mesrnn/scene.hpp"

namespace mesrnn::train {

/// Per-axis min-max statistics mapping [min, max] onto [-1, 1].
struct NormStats {
  double min_x = -1.0;
  double max_x = 1.0;
  double min_y = -1.0;
  double max_y = 1.0;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Fits over every present position of every scene. Throws DataError when
/// there are no positions or an axis is degenerate (max == min).
NormStats minmax_fit(std::span<const Scene> scenes);

/// Affine map to [-1, 1]; values outside [min, max] extrapolate linearly.
Vec2 minmax_apply(const NormStats& stats, Vec2 world);
/// Exact affine inverse of minmax_apply.
Vec2 minmax_invert(const NormStats& stats, Vec2 normalized);

Scene normalize_scene(const NormStats& stats, const Scene& world);
Scene denormalize_scene(const NormStats& stats, const Scene& normalized);

}  // namespace mesrnn::train
