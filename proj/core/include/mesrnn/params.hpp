// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mesrnn/tensor.hpp"

namespace mesrnn::ad {

/// Ordered collection of named parameter tensors.
///
/// Insertion order is preserved; it fixes the order of checkpoint records
/// and of the optimizer sweep.
class ParamSet {
 public:
  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;

  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);

  std::size_t tensor_count() const { return entries_.size(); }
  /// Total number of scalar parameters.
  std::size_t scalar_count() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  bool identical(const ParamSet& other) const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Accumulated adjoints keyed by parameter name.
class GradientStore {
 public:
  /// Zero-filled store matching every tensor in `params`.
  static GradientStore zeros_like(const ParamSet& params);

  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);

  /// Adds `grad` into the entry `name`, creating it if needed.
  void accumulate(const std::string& name, const Tensor& grad);
  void accumulate(const std::string& name, Tensor&& grad);
  /// Adds every entry of `other` into this store.
  void accumulate(const GradientStore& other);

  /// L2 norm over every entry of every tensor jointly.
  double global_norm() const;
  void scale(double factor);

  std::size_t size() const { return grads_.size(); }
  auto begin() const { return grads_.begin(); }
  auto end() const { return grads_.end(); }
  auto begin() { return grads_.begin(); }
  auto end() { return grads_.end(); }

 private:
  friend class Tape;
  std::map<std::string, Tensor, std::less<>> grads_;
};

}  // namespace mesrnn::ad
