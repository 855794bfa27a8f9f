// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mesrnn/params.hpp"

namespace mesrnn::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::map<std::string, ad::Tensor, std::less<>> first_moment;
  std::map<std::string, ad::Tensor, std::less<>> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected ADAM update, folding the corrections into the step
/// size: lr_t = lr * sqrt(1 - b2^t) / (1 - b1^t), p -= lr_t * m / (sqrt(v) + eps).
/// Every parameter must have a gradient of identical shape.
void adam_step(ad::ParamSet& params, const ad::GradientStore& grads,
               AdamState& state, double learning_rate,
               const AdamConfig& config = {});

/// Rescales every gradient jointly when the global L2 norm exceeds
/// `max_norm`. Returns the norm before clipping.
double clip_global_norm(ad::GradientStore& grads, double max_norm);

}  // namespace mesrnn::train
