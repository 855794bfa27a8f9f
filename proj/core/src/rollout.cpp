// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/eval.hpp"

#include <string>

#include "mesrnn/error.hpp"
#include "parallel.hpp"

namespace mesrnn::eval {

bool PedestrianPrediction::evaluable() const {
  if (truth.empty() || truth.size() != predicted.size()) return false;
  for (const auto& p : truth) {
    if (!p) return false;
  }
  return true;
}

ScenePrediction rollout(const model::Checkpoint& checkpoint, const Scene& scene,
                        std::size_t obs, std::size_t pred,
                        const graph::GraphOptions& options) {
  if (obs < 1 || pred < 1) {
    throw ContractError("rollout needs obs >= 1 and pred >= 1");
  }
  if (scene.length() < obs) {
    throw DataError("scene has " + std::to_string(scene.length()) +
                    " steps, fewer than the " + std::to_string(obs) +
                    " observed steps required");
  }
  const std::size_t n = scene.num_peds();
  if (n == 0) throw DataError("scene has no pedestrians");
  for (std::size_t i = 0; i < n; ++i) {
    if (!scene.present_over(i, 0, obs - 1)) {
      throw DataError("pedestrian " + std::to_string(scene.ped_ids()[i]) +
                      " is missing observed positions");
    }
  }

  const train::NormStats& norm = checkpoint.norm;
  const std::size_t horizon = obs + pred;
  Scene believed(scene.ped_ids(), horizon, scene.frame_interval());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < obs; ++t) {
      believed.set(i, t, train::minmax_apply(norm, scene.position(i, t)));
    }
  }

  ad::Tape tape;
  const model::BoundModel bound = model::bind(tape, checkpoint.params);
  model::Dropout off;
  model::ModelState state = model::initial_state(tape, bound, n);
  for (std::size_t t = 0; t + 1 < horizon; ++t) {
    model::StepOutput out =
        model::model_step(tape, bound, believed, t, state, off, nullptr,
                          options);
    state = std::move(out.state);
    if (t + 1 < obs) continue;
    const ad::Tensor& next = tape.value(out.next_positions);
    for (std::size_t i = 0; i < n; ++i) {
      believed.set(i, t + 1, {next.at(i, 0), next.at(i, 1)});
    }
  }

  ScenePrediction result;
  result.start_frame = scene.start_frame();
  result.peds.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    PedestrianPrediction& p = result.peds[i];
    p.ped_id = scene.ped_ids()[i];
    for (std::size_t t = 0; t < obs; ++t) p.observed.push_back(scene.position(i, t));
    for (std::size_t t = obs; t < horizon; ++t) {
      p.predicted.push_back(
          train::minmax_invert(norm, believed.position(i, t)));
      p.truth.push_back(t < scene.length() ? scene.maybe_position(i, t)
                                           : std::nullopt);
    }
  }
  return result;
}

PredictionResult predict(const model::Checkpoint& checkpoint,
                         std::span<const Scene> scenes, std::size_t obs,
                         std::size_t pred, std::size_t workers,
                         const graph::GraphOptions& options) {
  PredictionResult result;
  result.variant = checkpoint.params.variant;
  result.norm = checkpoint.norm;
  result.obs = obs;
  result.pred = pred;
  result.scenes = detail::parallel_map<ScenePrediction>(
      scenes.size(), workers, [&](std::size_t k) {
        ScenePrediction s = rollout(checkpoint, scenes[k], obs, pred, options);
        s.scene_index = k;
        return s;
      });
  return result;
}

}  // namespace mesrnn::eval
