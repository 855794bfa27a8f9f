// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "mesrnn/eval.hpp"
#include "mesrnn/synth.hpp"
#include "mesrnn/train.hpp"

using namespace mesrnn;

namespace {

model::Variant variant_of(const benchmark::State& state) {
  return static_cast<model::Variant>(state.range(0));
}

Scene normalized_scene(std::size_t peds, std::size_t length) {
  data::SynthSpec spec;
  spec.pedestrians = peds;
  spec.scenes = 1;
  spec.length = length;
  const auto scenes = data::synth_generate(spec);
  return train::normalize_scene(train::minmax_fit(scenes), scenes.front());
}

void BM_StepFeatures(benchmark::State& state) {
  const Scene s = normalized_scene(static_cast<std::size_t>(state.range(0)), 20);
  for (auto _ : state) {
    for (std::size_t t = 0; t < 19; ++t) {
      benchmark::DoNotOptimize(model::compute_step_features(s, t));
    }
  }
}
BENCHMARK(BM_StepFeatures)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

void BM_TeacherForcedForward(benchmark::State& state) {
  const auto params = model::init_params(variant_of(state), 0);
  const Scene s = normalized_scene(4, 20);
  model::Dropout off;
  for (auto _ : state) {
    ad::Tape tape;
    const auto bound = model::bind(tape, params);
    benchmark::DoNotOptimize(train::teacher_forced_loss(
        tape, bound, s, train::LossWindow::kPred, 8, 12, off));
  }
}
BENCHMARK(BM_TeacherForcedForward)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_TrainingUpdate(benchmark::State& state) {
  auto params = model::init_params(variant_of(state), 0);
  const Scene s = normalized_scene(4, 20);
  model::Dropout off;
  train::AdamState adam;
  for (auto _ : state) {
    ad::Tape tape;
    const auto bound = model::bind(tape, params);
    const ad::Var loss = train::teacher_forced_loss(
        tape, bound, s, train::LossWindow::kPred, 8, 12, off);
    ad::GradientStore grads = tape.backward(loss);
    train::clip_global_norm(grads, 10.0);
    train::adam_step(params.tensors, grads, adam, 1e-3);
  }
}
BENCHMARK(BM_TrainingUpdate)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
  auto params = model::init_params(variant_of(state), 0);
  auto grads = ad::GradientStore::zeros_like(params.tensors);
  train::AdamState adam;
  for (auto _ : state) train::adam_step(params.tensors, grads, adam, 1e-3);
}
BENCHMARK(BM_AdamStep)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_Rollout(benchmark::State& state) {
  const model::Checkpoint ck{model::init_params(variant_of(state), 0),
                             {-10.0, 10.0, -10.0, 10.0}, {}};
  data::SynthSpec spec;
  spec.scenes = 1;
  const Scene s = data::synth_generate(spec).front();
  for (auto _ : state) benchmark::DoNotOptimize(eval::rollout(ck, s, 8, 12));
}
BENCHMARK(BM_Rollout)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
