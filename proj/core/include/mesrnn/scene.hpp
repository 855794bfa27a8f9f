// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mesrnn {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double norm() const { return std::hypot(x, y); }
  friend bool operator==(Vec2, Vec2) = default;
};

/// Fixed-rate window of pedestrian positions with a presence mask.
///
/// Steps are 0-based. Positions are only meaningful where the pedestrian is
/// present; reading an absent position raises PresenceError.
class Scene {
 public:
  static constexpr double kDefaultFrameInterval = 0.4;

  Scene() = default;
  Scene(std::vector<long> ped_ids, std::size_t length,
        double frame_interval = kDefaultFrameInterval);

  std::size_t num_peds() const { return ped_ids_.size(); }
  std::size_t length() const { return length_; }
  double frame_interval() const { return frame_interval_; }
  const std::vector<long>& ped_ids() const { return ped_ids_; }

  /// First source frame tick of the window, when it came from a table.
  long start_frame() const { return start_frame_; }
  void set_start_frame(long frame) { start_frame_ = frame; }

  bool present(std::size_t ped, std::size_t step) const;
  Vec2 position(std::size_t ped, std::size_t step) const;
  std::optional<Vec2> maybe_position(std::size_t ped, std::size_t step) const;

  void set(std::size_t ped, std::size_t step, Vec2 position);
  void clear(std::size_t ped, std::size_t step);

  /// True when `ped` is present at every step in [first, last].
  bool present_over(std::size_t ped, std::size_t first,
                    std::size_t last) const;

  /// Throws DataError unless the scene is usable (length >= 3, positions
  /// finite wherever present).
  void validate() const;

  /// Copy restricted to the listed pedestrians, in the listed order.
  Scene select(std::span<const std::size_t> peds) const;
  /// Copy with every present position shifted by `offset`.
  Scene translated(Vec2 offset) const;

  /// Content hash over ids, presence and position bits.
  std::uint64_t fingerprint() const;

  friend bool operator==(const Scene&, const Scene&) = default;

 private:
  std::size_t index(std::size_t ped, std::size_t step) const;

  std::vector<long> ped_ids_;
  std::size_t length_ = 0;
  double frame_interval_ = kDefaultFrameInterval;
  long start_frame_ = 0;
  std::vector<Vec2> positions_;
  std::vector<std::uint8_t> presence_;
};

/// FNV-1a over raw bytes; used for scene fingerprints and input digests.
std::uint64_t fnv1a(std::span<const std::byte> bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace mesrnn
