// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "mesrnn/checkpoint.hpp"
#include "mesrnn/model.hpp"
#include "mesrnn/normalization.hpp"
#include "mesrnn/optim.hpp"
#include "mesrnn/scene.hpp"

namespace mesrnn::train {

/// Which predicted steps enter the loss: only the prediction period, or
/// every step from the second one on.
enum class LossWindow { kPred, kFull };

std::string_view to_string(LossWindow window);
LossWindow parse_loss_window(std::string_view text);

struct TrainConfig {
  std::size_t epochs = 10;
  double learning_rate = 0.001;
  double clip_norm = 10.0;
  std::size_t obs = 8;
  std::size_t pred = 12;
  LossWindow loss_window = LossWindow::kPred;
  double dropout = 0.2;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
  AdamConfig adam;
  model::ModelDims dims;
  model::InitScheme init = model::InitScheme::kGlorot;
  graph::GraphOptions graph;
  /// Threads for read-only validation passes. Training stays single-writer.
  std::size_t workers = 1;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded permutation; the validation part holds round(n * fraction)
/// scenes, clamped so that at least one training scene remains.
Split split_train_validation(std::size_t n, double fraction,
                             std::uint64_t seed);

/// Inclusive range of 0-based target steps scored by the loss.
std::pair<std::size_t, std::size_t> loss_target_steps(LossWindow window,
                                                      std::size_t obs,
                                                      std::size_t pred);

/// Teacher-forced unroll over a normalized scene: at every step the model
/// reads ground-truth positions. Returns the windowed MSE node. `features`
/// may hold precomputed per-step aggregates (index = step).
ad::Var teacher_forced_loss(ad::Tape& tape, const model::BoundModel& model,
                            const Scene& normalized, LossWindow window,
                            std::size_t obs, std::size_t pred,
                            model::Dropout& dropout,
                            std::span<const model::StepFeatures> features = {},
                            const graph::GraphOptions& options = {});

/// Windowed teacher-forced MSE of `params` on a normalized scene, dropout off.
double evaluate_loss(const model::ModelParams& params, const Scene& normalized,
                     LossWindow window, std::size_t obs, std::size_t pred,
                     const graph::GraphOptions& options = {});

/// Mean squared error between predicted and true trajectories over the
/// scored window; trajectories are indexed [pedestrian][step].
double mse_loss(std::span<const std::vector<Vec2>> predicted,
                std::span<const std::vector<Vec2>> truth,
                std::size_t first_step, std::size_t last_step);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  /// NaN when there is no validation split.
  double val_loss = 0.0;
};

struct TrainResult {
  model::Checkpoint best;
  model::Checkpoint last;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t updates = 0;
  std::size_t updates_per_epoch = 0;
  std::vector<std::uint64_t> train_fingerprints;
  std::vector<std::uint64_t> validation_fingerprints;
  /// Scenes whose positions fitted the normalization statistics.
  std::vector<std::uint64_t> norm_fingerprints;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Keeps the pedestrians present over the whole scene; scenes left without
/// any are dropped. Throws DataError on a wrong scene length.
std::vector<Scene> training_scenes(std::span<const Scene> scenes,
                                   std::size_t length);

/// Per-scene (unbatched) ADAM training with teacher forcing, global-norm
/// clipping and best-validation checkpoint retention. Throws NumericError
/// on a non-finite loss, DataError on unusable input.
TrainResult train(const TrainConfig& config, std::span<const Scene> scenes,
                  model::Variant variant, const EpochCallback& on_epoch = {});

void write_history_csv(std::ostream& out,
                       std::span<const EpochRecord> history);

}  // namespace mesrnn::train
