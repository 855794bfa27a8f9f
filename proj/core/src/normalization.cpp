// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/normalization.hpp"

#include <algorithm>
#include <limits>

#include "mesrnn/error.hpp"

namespace mesrnn::train {
namespace {

template <typename F>
Scene map_scene(const Scene& in, F f) {
  Scene out = in;
  for (std::size_t i = 0; i < in.num_peds(); ++i) {
    for (std::size_t t = 0; t < in.length(); ++t) {
      if (in.present(i, t)) out.set(i, t, f(in.position(i, t)));
    }
  }
  return out;
}

}  // namespace

NormStats minmax_fit(std::span<const Scene> scenes) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  NormStats s{inf, -inf, inf, -inf};
  std::size_t count = 0;
  for (const Scene& scene : scenes) {
    for (std::size_t i = 0; i < scene.num_peds(); ++i) {
      for (std::size_t t = 0; t < scene.length(); ++t) {
        if (!scene.present(i, t)) continue;
        const Vec2 p = scene.position(i, t);
        s.min_x = std::min(s.min_x, p.x);
        s.max_x = std::max(s.max_x, p.x);
        s.min_y = std::min(s.min_y, p.y);
        s.max_y = std::max(s.max_y, p.y);
        ++count;
      }
    }
  }
  if (count == 0) throw DataError("normalization fit needs at least one position");
  if (!(s.max_x > s.min_x) || !(s.max_y > s.min_y)) {
    throw DataError("normalization fit is degenerate: an axis has max == min");
  }
  return s;
}

Vec2 minmax_apply(const NormStats& s, Vec2 p) {
  return {2.0 * (p.x - s.min_x) / (s.max_x - s.min_x) - 1.0,
          2.0 * (p.y - s.min_y) / (s.max_y - s.min_y) - 1.0};
}

Vec2 minmax_invert(const NormStats& s, Vec2 p) {
  return {(p.x + 1.0) * 0.5 * (s.max_x - s.min_x) + s.min_x,
          (p.y + 1.0) * 0.5 * (s.max_y - s.min_y) + s.min_y};
}

Scene normalize_scene(const NormStats& stats, const Scene& world) {
  return map_scene(world, [&](Vec2 p) { return minmax_apply(stats, p); });
}

Scene denormalize_scene(const NormStats& stats, const Scene& normalized) {
  return map_scene(normalized,
                   [&](Vec2 p) { return minmax_invert(stats, p); });
}

}  // namespace mesrnn::train
