// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/optim.hpp"

#include <cmath>

#include "mesrnn/error.hpp"

namespace mesrnn::train {

void adam_step(ad::ParamSet& params, const ad::GradientStore& grads,
               AdamState& state, double learning_rate,
               const AdamConfig& config) {
  for (const auto& [name, value] : params) {
    const ad::Tensor& g = grads.get(name);
    if (g.shape() != value.shape()) {
      throw DimensionError("gradient for '" + name + "' has shape " +
                           ad::shape_string(g.shape()) + ", parameter has " +
                           ad::shape_string(value.shape()));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double lr_t = learning_rate *
                      std::sqrt(1.0 - std::pow(config.beta2, t)) /
                      (1.0 - std::pow(config.beta1, t));

  for (auto& [name, value] : params) {
    const ad::Tensor& g = grads.get(name);
    auto [m_it, m_new] =
        state.first_moment.try_emplace(name, ad::Tensor::zeros(value.shape()));
    auto [v_it, v_new] =
        state.second_moment.try_emplace(name, ad::Tensor::zeros(value.shape()));
    double* m = m_it->second.raw();
    double* v = v_it->second.raw();
    double* p = value.raw();
    const double* gr = g.raw();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gr[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gr[i] * gr[i];
      p[i] -= lr_t * m[i] / (std::sqrt(v[i]) + config.epsilon);
    }
  }
}

double clip_global_norm(ad::GradientStore& grads, double max_norm) {
  const double norm = grads.global_norm();
  if (norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

}  // namespace mesrnn::train
