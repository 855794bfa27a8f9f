// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/eval.hpp"

#include "mesrnn/error.hpp"

namespace mesrnn::eval {
namespace {

void check_aligned(std::span<const std::vector<Vec2>> predicted,
                   std::span<const std::vector<Vec2>> truth) {
  if (predicted.empty()) throw DimensionError("no trajectories to score");
  if (predicted.size() != truth.size()) {
    throw DimensionError("predicted and true pedestrian counts differ");
  }
  const std::size_t steps = predicted.front().size();
  if (steps == 0) throw DimensionError("empty prediction window");
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].size() != steps || truth[i].size() != steps) {
      throw DimensionError("prediction windows are misaligned");
    }
  }
}

}  // namespace

double ade(std::span<const std::vector<Vec2>> predicted,
           std::span<const std::vector<Vec2>> truth) {
  check_aligned(predicted, truth);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t t = 0; t < predicted[i].size(); ++t) {
      sum += (predicted[i][t] - truth[i][t]).norm();
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double fde(std::span<const std::vector<Vec2>> predicted,
           std::span<const std::vector<Vec2>> truth) {
  check_aligned(predicted, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    sum += (predicted[i].back() - truth[i].back()).norm();
  }
  return sum / static_cast<double>(predicted.size());
}

MetricsRow score(const PredictionResult& result, const std::string& split,
                 std::uint64_t seed) {
  std::vector<std::vector<Vec2>> pred_world, truth_world, pred_norm, truth_norm;
  MetricsRow row;
  row.split = split;
  row.variant = std::string(model::to_string(result.variant));
  row.seed = seed;
  for (const auto& scene : result.scenes) {
    bool any = false;
    for (const auto& p : scene.peds) {
      if (!p.evaluable()) continue;
      any = true;
      std::vector<Vec2> truth, pn, tn;
      for (std::size_t t = 0; t < p.predicted.size(); ++t) {
        truth.push_back(*p.truth[t]);
        pn.push_back(train::minmax_apply(result.norm, p.predicted[t]));
        tn.push_back(train::minmax_apply(result.norm, *p.truth[t]));
      }
      pred_world.push_back(p.predicted);
      truth_world.push_back(std::move(truth));
      pred_norm.push_back(std::move(pn));
      truth_norm.push_back(std::move(tn));
    }
    if (any) ++row.n_scenes;
  }
  if (pred_world.empty()) {
    throw DataError("split '" + split +
                    "' has no pedestrian with ground truth over the "
                    "prediction window");
  }
  row.n_peds = pred_world.size();
  row.ade_world = ade(pred_world, truth_world);
  row.fde_world = fde(pred_world, truth_world);
  row.ade_norm = ade(pred_norm, truth_norm);
  row.fde_norm = fde(pred_norm, truth_norm);
  return row;
}

MetricsRow average_row(std::span<const MetricsRow> rows,
                       const std::string& split) {
  if (rows.empty()) throw ContractError("cannot average zero rows");
  MetricsRow avg;
  avg.split = split;
  avg.variant = rows.front().variant;
  avg.seed = rows.front().seed;
  for (const auto& r : rows) {
    avg.ade_norm += r.ade_norm;
    avg.fde_norm += r.fde_norm;
    avg.ade_world += r.ade_world;
    avg.fde_world += r.fde_world;
    avg.n_scenes += r.n_scenes;
    avg.n_peds += r.n_peds;
  }
  const auto k = static_cast<double>(rows.size());
  avg.ade_norm /= k;
  avg.fde_norm /= k;
  avg.ade_world /= k;
  avg.fde_world /= k;
  return avg;
}

}  // namespace mesrnn::eval
