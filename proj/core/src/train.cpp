// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "mesrnn/error.hpp"
#include "parallel.hpp"

namespace mesrnn::train {

std::string_view to_string(LossWindow window) {
  return window == LossWindow::kPred ? "pred" : "full";
}

LossWindow parse_loss_window(std::string_view text) {
  if (text == "pred") return LossWindow::kPred;
  if (text == "full") return LossWindow::kFull;
  throw ContractError("unknown loss window '" + std::string(text) +
                      "' (expected pred or full)");
}

Split split_train_validation(std::size_t n, double fraction,
                             std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw ContractError("validation fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto n_val = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * fraction + 0.5));
  if (n > 0 && n_val >= n) n_val = n - 1;

  Split split;
  split.validation.assign(order.begin(), order.begin() + n_val);
  split.train.assign(order.begin() + n_val, order.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::pair<std::size_t, std::size_t> loss_target_steps(LossWindow window,
                                                      std::size_t obs,
                                                      std::size_t pred) {
  if (obs < 1 || pred < 1) {
    throw ContractError("loss window is empty: obs and pred must be >= 1");
  }
  const std::size_t last = obs + pred - 1;
  return {window == LossWindow::kPred ? obs : 1, last};
}

ad::Var teacher_forced_loss(ad::Tape& tape, const model::BoundModel& model,
                            const Scene& normalized, LossWindow window,
                            std::size_t obs, std::size_t pred,
                            model::Dropout& dropout,
                            std::span<const model::StepFeatures> features,
                            const graph::GraphOptions& options) {
  const auto [first, last] = loss_target_steps(window, obs, pred);
  if (normalized.length() < last + 1) {
    throw DataError("scene of length " + std::to_string(normalized.length()) +
                    " is shorter than obs + pred = " +
                    std::to_string(obs + pred));
  }
  const std::size_t n = normalized.num_peds();
  // Row block t of the unroll predicts step t + 1.
  const ad::Var predicted = model::teacher_forced_unroll(
      tape, model, normalized, last, dropout, features, options);
  const std::size_t count = last - first + 1;
  ad::Tensor target({count * n, 2});
  for (std::size_t s = first; s <= last; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 p = normalized.position(i, s);
      target.at((s - first) * n + i, 0) = p.x;
      target.at((s - first) * n + i, 1) = p.y;
    }
  }
  return tape.mse(tape.rows(predicted, (first - 1) * n, count * n),
                  tape.constant(std::move(target)));
}

double evaluate_loss(const model::ModelParams& params, const Scene& normalized,
                     LossWindow window, std::size_t obs, std::size_t pred,
                     const graph::GraphOptions& options) {
  ad::Tape tape;
  const model::BoundModel bound = model::bind(tape, params);
  model::Dropout off;
  return tape
      .value(teacher_forced_loss(tape, bound, normalized, window, obs, pred,
                                 off, {}, options))
      .item();
}

double mse_loss(std::span<const std::vector<Vec2>> predicted,
                std::span<const std::vector<Vec2>> truth,
                std::size_t first_step, std::size_t last_step) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("mse_loss: pedestrian counts differ");
  }
  if (predicted.empty() || first_step > last_step) {
    throw ContractError("mse_loss: empty window");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].size() <= last_step || truth[i].size() <= last_step) {
      throw DimensionError("mse_loss: trajectory shorter than the window");
    }
    for (std::size_t t = first_step; t <= last_step; ++t) {
      const Vec2 d = predicted[i][t] - truth[i][t];
      sum += d.x * d.x + d.y * d.y;
      count += 2;
    }
  }
  return sum / static_cast<double>(count);
}

std::vector<Scene> training_scenes(std::span<const Scene> scenes,
                                   std::size_t length) {
  std::vector<Scene> out;
  for (const Scene& s : scenes) {
    if (s.length() != length) {
      throw DataError("training scene has length " +
                      std::to_string(s.length()) + ", expected " +
                      std::to_string(length));
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < s.num_peds(); ++i) {
      if (s.present_over(i, 0, length - 1)) keep.push_back(i);
    }
    if (keep.empty()) continue;
    out.push_back(keep.size() == s.num_peds() ? s : s.select(keep));
  }
  return out;
}

namespace {

std::vector<model::StepFeatures> feature_cache(const Scene& normalized,
                                               std::size_t last_step,
                                               const graph::GraphOptions& o) {
  std::vector<model::StepFeatures> out;
  out.reserve(last_step);
  for (std::size_t t = 0; t < last_step; ++t) {
    out.push_back(model::compute_step_features(normalized, t, o));
  }
  return out;
}

model::Checkpoint make_checkpoint(const model::ModelParams& params,
                                  const NormStats& norm,
                                  const TrainConfig& config,
                                  double frame_interval) {
  return {params, norm,
          model::CheckpointMeta{config.dropout, config.seed, config.obs,
                                config.pred, frame_interval}};
}

}  // namespace

TrainResult train(const TrainConfig& config, std::span<const Scene> scenes,
                  model::Variant variant, const EpochCallback& on_epoch) {
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ContractError("dropout rate must lie in [0, 1)");
  }
  const std::size_t length = config.obs + config.pred;
  const std::vector<Scene> usable = training_scenes(scenes, length);
  if (usable.empty()) {
    throw DataError("no training scene with a fully present pedestrian");
  }

  const Split split =
      split_train_validation(usable.size(), config.validation_fraction,
                             config.seed);
  std::vector<Scene> train_world;
  for (auto i : split.train) train_world.push_back(usable[i]);
  const NormStats norm = minmax_fit(train_world);

  TrainResult result;
  for (auto i : split.train) {
    result.train_fingerprints.push_back(usable[i].fingerprint());
  }
  for (auto i : split.validation) {
    result.validation_fingerprints.push_back(usable[i].fingerprint());
  }
  result.norm_fingerprints = result.train_fingerprints;

  const auto [first_target, last_target] =
      loss_target_steps(config.loss_window, config.obs, config.pred);
  (void)first_target;

  struct Prepared {
    Scene scene;
    std::vector<model::StepFeatures> features;
  };
  auto prepare = [&](const Scene& world) {
    Scene s = normalize_scene(norm, world);
    auto f = feature_cache(s, last_target, config.graph);
    return Prepared{std::move(s), std::move(f)};
  };
  std::vector<Prepared> train_set;
  std::vector<Prepared> val_set;
  for (auto i : split.train) train_set.push_back(prepare(usable[i]));
  for (auto i : split.validation) val_set.push_back(prepare(usable[i]));

  model::ModelParams params =
      model::init_params(variant, config.seed, config.dims, config.init);
  AdamState adam;
  std::mt19937_64 order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 dropout_rng(config.seed + 1);
  const double frame_interval = usable.front().frame_interval();

  auto scene_loss = [&](const model::ModelParams& p, const Prepared& s) {
    ad::Tape tape;
    const model::BoundModel bound = model::bind(tape, p);
    model::Dropout off;
    return tape
        .value(teacher_forced_loss(tape, bound, s.scene, config.loss_window,
                                   config.obs, config.pred, off, s.features,
                                   config.graph))
        .item();
  };
  auto mean_loss = [&](const std::vector<Prepared>& set) {
    const auto losses = detail::parallel_map<double>(
        set.size(), config.workers,
        [&](std::size_t i) { return scene_loss(params, set[i]); });
    double sum = 0.0;
    for (double l : losses) sum += l;
    return sum / static_cast<double>(losses.size());
  };

  result.best = make_checkpoint(params, norm, config, frame_interval);
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  result.updates_per_epoch = train_set.size();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const Prepared& s = train_set[idx];
      ad::Tape tape;
      const model::BoundModel bound = model::bind(tape, params);
      model::Dropout dropout(config.dropout, &dropout_rng);
      const ad::Var loss =
          teacher_forced_loss(tape, bound, s.scene, config.loss_window,
                              config.obs, config.pred, dropout, s.features,
                              config.graph);
      const double value = tape.value(loss).item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
      }
      ad::GradientStore grads = tape.backward(loss);
      const double norm_before = clip_global_norm(grads, config.clip_norm);
      if (!std::isfinite(norm_before)) {
        throw NumericError("non-finite gradient at epoch " +
                           std::to_string(epoch));
      }
      adam_step(params.tensors, grads, adam, config.learning_rate,
                config.adam);
      loss_sum += value;
      ++result.updates;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.val_loss = val_set.empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : mean_loss(val_set);
    if (!std::isfinite(rec.train_loss)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
    }
    const double score = val_set.empty() ? rec.train_loss : rec.val_loss;
    if (score < best_score) {
      best_score = score;
      result.best_epoch = epoch;
      result.best = make_checkpoint(params, norm, config, frame_interval);
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.last = make_checkpoint(params, norm, config, frame_interval);
  return result;
}

void write_history_csv(std::ostream& out,
                       std::span<const EpochRecord> history) {
  out << "epoch,train_loss,val_loss\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << model::format_double(r.train_loss) << ','
        << model::format_double(r.val_loss) << '\n';
  }
}

}  // namespace mesrnn::train
