// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mesrnn/scene.hpp"

namespace mesrnn::data {

enum class Scenario { kCrossing, kOvertaking, kParallelGroup, kStationaryMix };

std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view text);

/// Deterministic synthetic crowd description.
///
/// Every pedestrian follows a constant-velocity base path laid out by the
/// scenario; a capped pairwise repulsion and Gaussian jitter are added each
/// step. Scenes are then rotated and translated by a seeded rigid motion
/// (disabled by `randomize_pose = false`).
struct SynthSpec {
  Scenario scenario = Scenario::kCrossing;
  std::size_t pedestrians = 4;
  double speed_min = 0.2;  // units per step
  double speed_max = 0.6;
  double noise = 0.02;      // jitter standard deviation per step
  double repulsion = 0.15;  // peak repulsive displacement per step
  double repulsion_range = 0.8;
  std::size_t scenes = 10;
  std::uint64_t seed = 0;
  std::size_t length = 20;
  double frame_interval = Scene::kDefaultFrameInterval;
  bool randomize_pose = true;
};

/// Parses `scenario[:key=value,...]`. Keys: n (or pedestrians), scenes,
/// seed, noise, repulsion, range, speed_min, speed_max, length, pose (0/1).
/// Throws ContractError on unknown keys or invalid values.
SynthSpec parse_synth_spec(std::string_view text);
std::string format_synth_spec(const SynthSpec& spec);

/// Throws ContractError on invalid counts or ranges.
std::vector<Scene> synth_generate(const SynthSpec& spec);

}  // namespace mesrnn::data
