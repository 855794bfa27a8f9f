// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mesrnn/checkpoint.hpp"
#include "mesrnn/scene.hpp"
#include "mesrnn/train.hpp"

namespace mesrnn::eval {

struct PedestrianPrediction {
  long ped_id = 0;
  std::vector<Vec2> observed;                // obs steps, world units
  std::vector<Vec2> predicted;               // pred steps, world units
  std::vector<std::optional<Vec2>> truth;    // pred steps, where known

  /// Ground truth covers the whole prediction window.
  bool evaluable() const;
};

struct ScenePrediction {
  std::size_t scene_index = 0;
  long start_frame = 0;
  std::vector<PedestrianPrediction> peds;
};

struct PredictionResult {
  model::Variant variant = model::Variant::kMesrnn;
  train::NormStats norm;
  std::size_t obs = 8;
  std::size_t pred = 12;
  std::vector<ScenePrediction> scenes;
};

/// Autoregressive rollout of one world-unit scene.
///
/// Steps 0 .. obs-1 read ground truth. Every later step reads the model's
/// own predictions for all pedestrians at once, with features rebuilt from
/// those believed positions. Pedestrians must be present over the observed
/// steps; anything after them is only used as truth. Throws DataError when
/// the scene is shorter than `obs` or an observed position is missing.
ScenePrediction rollout(const model::Checkpoint& checkpoint, const Scene& scene,
                        std::size_t obs, std::size_t pred,
                        const graph::GraphOptions& options = {});

/// Rolls out every scene; `workers` threads share the read-only model.
PredictionResult predict(const model::Checkpoint& checkpoint,
                         std::span<const Scene> scenes, std::size_t obs,
                         std::size_t pred, std::size_t workers = 1,
                         const graph::GraphOptions& options = {});

/// Mean Euclidean distance over pedestrians and steps. Trajectories are
/// indexed [pedestrian][step] and must align exactly (DimensionError).
double ade(std::span<const std::vector<Vec2>> predicted,
           std::span<const std::vector<Vec2>> truth);
/// Mean Euclidean distance at the last step.
double fde(std::span<const std::vector<Vec2>> predicted,
           std::span<const std::vector<Vec2>> truth);

struct MetricsRow {
  std::string split;
  std::string variant;
  double ade_norm = 0.0;
  double fde_norm = 0.0;
  double ade_world = 0.0;
  double fde_world = 0.0;
  std::size_t n_scenes = 0;
  std::size_t n_peds = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// Pools every evaluable pedestrian of the result. Normalized figures use
/// the checkpoint's statistics. Throws DataError when nothing is evaluable.
MetricsRow score(const PredictionResult& result, const std::string& split,
                 std::uint64_t seed);

/// Arithmetic mean of the metric columns; counts are summed.
MetricsRow average_row(std::span<const MetricsRow> rows,
                       const std::string& split = "average");

struct NamedSplit {
  std::string name;
  std::vector<Scene> scenes;  // world units, length obs + pred
};

struct SplitHygiene {
  std::string held_out;
  std::size_t held_out_scenes = 0;
  std::size_t train_scenes = 0;
  /// Held-out fingerprints found among training or normalization inputs.
  std::size_t leaked = 0;
};

struct LooReport {
  std::vector<MetricsRow> rows;  // one per split, then the average
  std::vector<SplitHygiene> hygiene;
  std::vector<model::Checkpoint> checkpoints;
};

/// Trains a fresh model on the union of all other splits and scores it on
/// each held-out split in turn. Throws DataError with fewer than two splits
/// or an empty split.
LooReport leave_one_out(std::span<const NamedSplit> splits,
                        const train::TrainConfig& config,
                        model::Variant variant,
                        const train::EpochCallback& on_epoch = {});

}  // namespace mesrnn::eval
