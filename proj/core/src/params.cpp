// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/params.hpp"

#include <cmath>

#include "mesrnn/error.hpp"

namespace mesrnn::ad {

void ParamSet::add(std::string name, Tensor value) {
  if (index_.contains(name)) {
    throw ContractError("duplicate parameter name '" + name + "'");
  }
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParamSet::contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

const Tensor& ParamSet::get(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ContractError("unknown parameter '" + std::string(name) + "'");
  }
  return entries_[it->second].second;
}

Tensor& ParamSet::get(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ParamSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [name, tensor] : entries_) total += tensor.size();
  return total;
}

bool ParamSet::identical(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first ||
        !entries_[i].second.identical(other.entries_[i].second)) {
      return false;
    }
  }
  return true;
}

GradientStore GradientStore::zeros_like(const ParamSet& params) {
  GradientStore store;
  for (const auto& [name, tensor] : params) {
    store.grads_.emplace(name, Tensor::zeros(tensor.shape()));
  }
  return store;
}

bool GradientStore::contains(std::string_view name) const {
  return grads_.find(name) != grads_.end();
}

const Tensor& GradientStore::get(std::string_view name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) {
    throw ContractError("no gradient for '" + std::string(name) + "'");
  }
  return it->second;
}

Tensor& GradientStore::get(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

void GradientStore::accumulate(const std::string& name, const Tensor& grad) {
  auto it = grads_.find(name);
  if (it == grads_.end()) {
    grads_.emplace(name, grad);
    return;
  }
  if (it->second.shape() != grad.shape()) {
    throw DimensionError("gradient for '" + name + "' has shape " +
                         shape_string(it->second.shape()) + ", cannot add " +
                         shape_string(grad.shape()));
  }
  auto dst = it->second.data();
  auto src = grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void GradientStore::accumulate(const std::string& name, Tensor&& grad) {
  if (!grads_.contains(name)) {
    grads_.emplace(name, std::move(grad));
    return;
  }
  accumulate(name, static_cast<const Tensor&>(grad));
}

void GradientStore::accumulate(const GradientStore& other) {
  for (const auto& [name, grad] : other.grads_) accumulate(name, grad);
}

double GradientStore::global_norm() const {
  double sum = 0.0;
  for (const auto& [name, grad] : grads_) {
    for (double v : grad.data()) sum += v * v;
  }
  return std::sqrt(sum);
}

void GradientStore::scale(double factor) {
  for (auto& [name, grad] : grads_) {
    for (double& v : grad.data()) v *= factor;
  }
}

}  // namespace mesrnn::ad
