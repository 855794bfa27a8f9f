// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "mesrnn/error.hpp"
#include "mesrnn/synth.hpp"
#include "mesrnn/train.hpp"

using namespace mesrnn;
using namespace mesrnn::train;

namespace {

model::ModelDims tiny_dims() {
  model::ModelDims d;
  d.edge_embed = 4;
  d.edge_hidden = 6;
  d.node_embed = 6;
  d.node_hidden = 8;
  d.vlstm_embed = 4;
  d.vlstm_hidden = 6;
  return d;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.obs = 3;
  c.pred = 3;
  c.dims = tiny_dims();
  c.learning_rate = 0.01;
  c.seed = 4;
  return c;
}

std::vector<Scene> synth_scenes(std::size_t count, std::size_t length,
                                std::uint64_t seed = 1) {
  data::SynthSpec spec;
  spec.scenario = data::Scenario::kCrossing;
  spec.pedestrians = 3;
  spec.scenes = count;
  spec.length = length;
  spec.seed = seed;
  return data::synth_generate(spec);
}

Scene random_scene(std::mt19937_64& rng, std::size_t n, std::size_t len) {
  std::uniform_real_distribution<double> c(-0.9, 0.9);
  std::vector<long> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<long>(i);
  Scene s(ids, len);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < len; ++t) s.set(i, t, {c(rng), c(rng)});
  }
  return s;
}

}  // namespace

TEST(MinMax, Examples) {
  const NormStats st{0.0, 10.0, -2.0, 2.0};
  const Vec2 lo = minmax_apply(st, {0.0, -2.0});
  const Vec2 hi = minmax_apply(st, {10.0, 2.0});
  const Vec2 mid = minmax_apply(st, {5.0, 0.0});
  EXPECT_EQ(lo, (Vec2{-1.0, -1.0}));
  EXPECT_EQ(hi, (Vec2{1.0, 1.0}));
  EXPECT_EQ(mid, (Vec2{0.0, 0.0}));
  EXPECT_DOUBLE_EQ(minmax_apply(st, {15.0, 0.0}).x, 2.0);
}

TEST(MinMax, FitCoversEveryPresentPosition) {
  Scene s({1, 2}, 3);
  s.set(0, 0, {1.0, 5.0});
  s.set(0, 1, {3.0, 6.0});
  s.set(1, 2, {-1.0, 9.0});
  const Scene scenes[] = {s};
  const NormStats st = minmax_fit(scenes);
  EXPECT_EQ(st, (NormStats{-1.0, 3.0, 5.0, 9.0}));
}

TEST(MinMax, DegenerateAxis) {
  Scene s({1}, 3);
  for (std::size_t t = 0; t < 3; ++t) s.set(0, t, {1.0, static_cast<double>(t)});
  const Scene scenes[] = {s};
  EXPECT_THROW(minmax_fit(scenes), DataError);
}

TEST(MinMax, RoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  const NormStats st{-12.5, 31.0, -4.0, 17.25};
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Vec2 p{u(rng), u(rng)};
    const Vec2 back = minmax_invert(st, minmax_apply(st, p));
    worst = std::max({worst, std::abs(back.x - p.x), std::abs(back.y - p.y)});
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(MseLoss, Examples) {
  const std::vector<std::vector<Vec2>> pred = {{{0, 0}, {1, 1}, {2, 2}}};
  const std::vector<std::vector<Vec2>> truth = {{{0, 0}, {1, 2}, {2, 4}}};
  // Steps 1..2: squared errors (0 + 1) and (0 + 4) over 4 coordinates.
  EXPECT_DOUBLE_EQ(mse_loss(pred, truth, 1, 2), 5.0 / 4.0);
  EXPECT_DOUBLE_EQ(mse_loss(pred, truth, 0, 0), 0.0);
  EXPECT_THROW(mse_loss(pred, truth, 2, 1), ContractError);
  EXPECT_THROW(mse_loss(pred, truth, 0, 3), DimensionError);
  const std::vector<std::vector<Vec2>> two = {pred[0], pred[0]};
  EXPECT_THROW(mse_loss(two, truth, 0, 1), DimensionError);
}

TEST(MseLoss, MatchesLoopOracle) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t peds = 1 + rep % 4, len = 6;
    std::vector<std::vector<Vec2>> a(peds), b(peds);
    for (std::size_t i = 0; i < peds; ++i) {
      for (std::size_t t = 0; t < len; ++t) {
        a[i].push_back({n(rng), n(rng)});
        b[i].push_back({n(rng), n(rng)});
      }
    }
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < peds; ++i) {
      for (std::size_t t = 2; t <= 5; ++t) {
        sum += std::pow(a[i][t].x - b[i][t].x, 2);
        sum += std::pow(a[i][t].y - b[i][t].y, 2);
        count += 2;
      }
    }
    EXPECT_NEAR(mse_loss(a, b, 2, 5), sum / count, 1e-12);
  }
}

TEST(Split, EightTwoDisjoint) {
  const Split s = split_train_validation(10, 0.2, 7);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.validation.size(), 2u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(*all.rbegin(), 9u);
}

TEST(Split, DeterministicAndKeepsOneTrainingScene) {
  const Split a = split_train_validation(10, 0.2, 7);
  const Split b = split_train_validation(10, 0.2, 7);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(split_train_validation(1, 0.9, 0).train.size(), 1u);
  EXPECT_EQ(split_train_validation(5, 0.0, 0).validation.size(), 0u);
  EXPECT_THROW(split_train_validation(5, 1.0, 0), ContractError);
}

TEST(LossWindow, TargetSteps) {
  EXPECT_EQ(loss_target_steps(LossWindow::kPred, 8, 12), (std::pair<std::size_t, std::size_t>{8, 19}));
  EXPECT_EQ(loss_target_steps(LossWindow::kFull, 8, 12), (std::pair<std::size_t, std::size_t>{1, 19}));
  EXPECT_THROW(loss_target_steps(LossWindow::kPred, 0, 12), ContractError);
  EXPECT_EQ(parse_loss_window("full"), LossWindow::kFull);
  EXPECT_THROW(parse_loss_window("all"), ContractError);
}

TEST(TeacherForcing, LossEqualsOracleOverTruthInputs) {
  // Unroll by hand, always feeding ground truth, and score with mse_loss.
  std::mt19937_64 rng(12);
  const Scene s = random_scene(rng, 3, 6);
  const auto params = model::init_params(model::Variant::kMesrnn, 2, tiny_dims());
  for (LossWindow w : {LossWindow::kPred, LossWindow::kFull}) {
    ad::Tape tape;
    const auto bound = model::bind(tape, params);
    model::Dropout off;
    const double loss =
        tape.value(teacher_forced_loss(tape, bound, s, w, 2, 4, off)).item();

    ad::Tape ref_tape;
    const auto ref = model::bind(ref_tape, params);
    auto state = model::initial_state(ref_tape, ref, 3);
    std::vector<std::vector<Vec2>> pred(3, std::vector<Vec2>(6)), truth(3);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t t = 0; t < 6; ++t) truth[i].push_back(s.position(i, t));
    }
    for (std::size_t t = 0; t + 1 < 6; ++t) {
      auto out = model::model_step(ref_tape, ref, s, t, state, off);
      state = out.state;
      const ad::Tensor& p = ref_tape.value(out.next_positions);
      for (std::size_t i = 0; i < 3; ++i) pred[i][t + 1] = {p.at(i, 0), p.at(i, 1)};
    }
    const auto [first, last] = loss_target_steps(w, 2, 4);
    EXPECT_NEAR(loss, mse_loss(pred, truth, first, last), 1e-12);
  }
}

TEST(TeacherForcing, InputsDoNotDependOnPredictions) {
  // The prediction made at step t reads truth up to t only, so altering
  // the final step leaves a window that ends earlier untouched.
  std::mt19937_64 rng(13);
  const Scene s = random_scene(rng, 2, 5);
  Scene altered = s;
  altered.set(0, 4, {5.0, 5.0});
  const auto params = model::init_params(model::Variant::kSrnn, 3, tiny_dims());
  // Steps 1..2 stop before the altered step.
  const double a = evaluate_loss(params, s, LossWindow::kFull, 1, 2);
  const double b = evaluate_loss(params, altered, LossWindow::kFull, 1, 2);
  EXPECT_EQ(a, b);
  const double c = evaluate_loss(params, altered, LossWindow::kFull, 1, 4);
  EXPECT_NE(evaluate_loss(params, s, LossWindow::kFull, 1, 4), c);
}

TEST(TeacherForcing, ShortSceneRejected) {
  std::mt19937_64 rng(14);
  const Scene s = random_scene(rng, 2, 5);
  const auto params = model::init_params(model::Variant::kVlstm, 3, tiny_dims());
  EXPECT_THROW(evaluate_loss(params, s, LossWindow::kPred, 3, 3), DataError);
}

TEST(Adam, StepSequenceMatchesManualUpdate) {
  ad::ParamSet ps;
  ps.add("w", ad::Tensor::vector({1.0, -2.0}));
  ad::GradientStore g = ad::GradientStore::zeros_like(ps);
  AdamState st;
  double m[2] = {0, 0}, v[2] = {0, 0}, x[2] = {1.0, -2.0};
  const double grads[3][2] = {{0.5, -1.0}, {0.25, 2.0}, {-1.0, 0.1}};
  for (int k = 0; k < 3; ++k) {
    g.get("w")[0] = grads[k][0];
    g.get("w")[1] = grads[k][1];
    adam_step(ps, g, st, 0.01);
    const double t = k + 1;
    for (int j = 0; j < 2; ++j) {
      m[j] = 0.9 * m[j] + 0.1 * grads[k][j];
      v[j] = 0.999 * v[j] + 0.001 * grads[k][j] * grads[k][j];
      const double lr_t = 0.01 * std::sqrt(1 - std::pow(0.999, t)) / (1 - std::pow(0.9, t));
      x[j] -= lr_t * m[j] / (std::sqrt(v[j]) + 1e-8);
    }
  }
  EXPECT_NEAR(ps.get("w")[0], x[0], 1e-15);
  EXPECT_NEAR(ps.get("w")[1], x[1], 1e-15);
  EXPECT_EQ(st.step, 3u);
}

TEST(TrainingScenes, DropsPartialPedestrians) {
  Scene s({4, 5}, 4);
  for (std::size_t t = 0; t < 4; ++t) s.set(0, t, {0.0, double(t)});
  s.set(1, 2, {1.0, 1.0});
  Scene empty({9}, 4);
  const Scene scenes[] = {s, empty};
  const auto kept = training_scenes(scenes, 4);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].ped_ids(), std::vector<long>{4});
  EXPECT_THROW(training_scenes(scenes, 5), DataError);
}

TEST(Train, DeterministicAndCountsUpdates) {
  const auto scenes = synth_scenes(10, 6);
  const TrainConfig cfg = tiny_config();
  const TrainResult a = train::train(cfg, scenes, model::Variant::kMesrnn);
  const TrainResult b = train::train(cfg, scenes, model::Variant::kMesrnn);
  EXPECT_TRUE(a.last.params.tensors.identical(b.last.params.tensors));
  EXPECT_TRUE(a.best.params.tensors.identical(b.best.params.tensors));
  ASSERT_EQ(a.history.size(), 2u);
  for (std::size_t e = 0; e < 2; ++e) {
    EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
    EXPECT_EQ(a.history[e].val_loss, b.history[e].val_loss);
  }
  EXPECT_EQ(a.updates_per_epoch, 8u);
  EXPECT_EQ(a.updates, 16u);
  EXPECT_EQ(a.train_fingerprints.size(), 8u);
  EXPECT_EQ(a.validation_fingerprints.size(), 2u);
  for (auto f : a.validation_fingerprints) {
    EXPECT_EQ(std::count(a.norm_fingerprints.begin(), a.norm_fingerprints.end(), f), 0);
  }
  EXPECT_EQ(a.best.meta.obs, 3u);
  EXPECT_EQ(a.best.params.dims, tiny_dims());
}

TEST(Train, SeedChangesResult) {
  const auto scenes = synth_scenes(6, 6);
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  const TrainResult a = train::train(cfg, scenes, model::Variant::kVlstm);
  cfg.seed = 5;
  const TrainResult b = train::train(cfg, scenes, model::Variant::kVlstm);
  EXPECT_FALSE(a.last.params.tensors.identical(b.last.params.tensors));
}

TEST(Train, BestCheckpointTracksValidation) {
  const auto scenes = synth_scenes(10, 6);
  TrainConfig cfg = tiny_config();
  cfg.epochs = 4;
  const TrainResult r = train::train(cfg, scenes, model::Variant::kSrnn);
  std::size_t best = 1;
  for (const auto& rec : r.history) {
    if (rec.val_loss < r.history[best - 1].val_loss) best = rec.epoch;
  }
  EXPECT_EQ(r.best_epoch, best);
}

TEST(Train, LearningReducesLoss) {
  const auto scenes = synth_scenes(8, 6);
  TrainConfig cfg = tiny_config();
  cfg.epochs = 6;
  cfg.dropout = 0.0;
  const TrainResult r = train::train(cfg, scenes, model::Variant::kVlstm);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
}

TEST(Train, NonFiniteLearningRateFails) {
  const auto scenes = synth_scenes(4, 6);
  TrainConfig cfg = tiny_config();
  cfg.learning_rate = std::numeric_limits<double>::quiet_NaN();
  try {
    train::train(cfg, scenes, model::Variant::kVlstm);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite loss at epoch"), std::string::npos)
        << e.what();
  }
}

TEST(Train, RejectsUnusableInput) {
  const auto scenes = synth_scenes(4, 7);
  TrainConfig cfg = tiny_config();
  EXPECT_THROW(train::train(cfg, scenes, model::Variant::kVlstm), DataError);
  cfg.dropout = 1.0;
  EXPECT_THROW(train::train(cfg, synth_scenes(4, 6), model::Variant::kVlstm), ContractError);
}

TEST(History, CsvLayout) {
  const EpochRecord recs[] = {{1, 0.5, 0.25},
                              {2, 0.125, std::numeric_limits<double>::quiet_NaN()}};
  std::ostringstream out;
  write_history_csv(out, recs);
  EXPECT_EQ(out.str(), "epoch,train_loss,val_loss\n1,0.5,0.25\n2,0.125,nan\n");
}
