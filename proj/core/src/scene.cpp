// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/scene.hpp"

#include <string>

#include "mesrnn/error.hpp"

namespace mesrnn {

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

Scene::Scene(std::vector<long> ped_ids, std::size_t length,
             double frame_interval)
    : ped_ids_(std::move(ped_ids)),
      length_(length),
      frame_interval_(frame_interval),
      positions_(ped_ids_.size() * length),
      presence_(ped_ids_.size() * length, 0) {}

std::size_t Scene::index(std::size_t ped, std::size_t step) const {
  if (ped >= num_peds() || step >= length_) {
    throw ContractError("scene index (ped " + std::to_string(ped) + ", step " +
                        std::to_string(step) + ") out of range");
  }
  return ped * length_ + step;
}

bool Scene::present(std::size_t ped, std::size_t step) const {
  return presence_[index(ped, step)] != 0;
}

Vec2 Scene::position(std::size_t ped, std::size_t step) const {
  const auto i = index(ped, step);
  if (!presence_[i]) {
    throw PresenceError("pedestrian " + std::to_string(ped_ids_[ped]) +
                        " is not present at step " + std::to_string(step));
  }
  return positions_[i];
}

std::optional<Vec2> Scene::maybe_position(std::size_t ped,
                                          std::size_t step) const {
  const auto i = index(ped, step);
  if (!presence_[i]) return std::nullopt;
  return positions_[i];
}

void Scene::set(std::size_t ped, std::size_t step, Vec2 position) {
  const auto i = index(ped, step);
  positions_[i] = position;
  presence_[i] = 1;
}

void Scene::clear(std::size_t ped, std::size_t step) {
  const auto i = index(ped, step);
  positions_[i] = Vec2{};
  presence_[i] = 0;
}

bool Scene::present_over(std::size_t ped, std::size_t first,
                         std::size_t last) const {
  for (std::size_t t = first; t <= last; ++t) {
    if (!present(ped, t)) return false;
  }
  return true;
}

void Scene::validate() const {
  if (length_ < 3) {
    throw DataError("scene length " + std::to_string(length_) +
                    " is below the minimum of 3 steps");
  }
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    if (presence_[i] &&
        !(std::isfinite(positions_[i].x) && std::isfinite(positions_[i].y))) {
      throw DataError("scene holds a non-finite position for pedestrian " +
                      std::to_string(ped_ids_[i / length_]));
    }
  }
}

Scene Scene::select(std::span<const std::size_t> peds) const {
  std::vector<long> ids;
  for (auto p : peds) ids.push_back(ped_ids_.at(p));
  Scene out(std::move(ids), length_, frame_interval_);
  out.start_frame_ = start_frame_;
  for (std::size_t k = 0; k < peds.size(); ++k) {
    for (std::size_t t = 0; t < length_; ++t) {
      if (present(peds[k], t)) out.set(k, t, positions_[index(peds[k], t)]);
    }
  }
  return out;
}

Scene Scene::translated(Vec2 offset) const {
  Scene out = *this;
  for (std::size_t i = 0; i < out.positions_.size(); ++i) {
    if (out.presence_[i]) out.positions_[i] += offset;
  }
  return out;
}

std::uint64_t Scene::fingerprint() const {
  std::uint64_t h = fnv1a(std::as_bytes(std::span(ped_ids_)));
  h = fnv1a(std::as_bytes(std::span(presence_)), h);
  h = fnv1a(std::as_bytes(std::span(positions_)), h);
  return h;
}

}  // namespace mesrnn
