// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mesrnn/params.hpp"
#include "mesrnn/tensor.hpp"

namespace mesrnn::ad {

/// Primitive operations the tape knows how to differentiate.
enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kLinear,
  kMatmul,
  kAdd,
  kHadamard,
  kConcat,
  kSumList,
  kSlice,
  kTanh,
  kSigmoid,
  kScale,
  kMse,
  kRows,
  kStackRows,
};

std::string_view op_name(Op op);

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::uint32_t kInvalid =
      std::numeric_limits<std::uint32_t>::max();
  std::uint32_t index = kInvalid;

  bool valid() const { return index != kInvalid; }
  friend bool operator==(Var, Var) = default;
};

/// Append-only record of primitive operations for reverse-mode
/// differentiation.
///
/// Shapes must conform exactly; there is no broadcasting. Tensors may be
/// rank 1 (one row) or rank 2 (a batch of independent rows); every
/// operation acts along the last axis. Parameter leaves reference tensors
/// owned by the caller, which must stay alive and unmodified for the life
/// of the tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor value);
  Var parameter(std::string name, const Tensor& value);

  /// input [.. x n], weight [m x n], bias [m] -> [.. x m].
  Var linear(Var input, Var weight, Var bias);
  /// input [.. x n], weight [m x n] -> [.. x m] (no bias).
  Var matmul(Var input, Var weight);
  Var add(Var a, Var b);
  Var hadamard(Var a, Var b);
  /// Concatenation along the last axis; row counts must agree.
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
  }
  Var sum_list(std::span<const Var> parts);
  Var sum_list(std::initializer_list<Var> parts) {
    return sum_list(std::span<const Var>(parts.begin(), parts.size()));
  }
  /// Columns [offset, offset + width) of the last axis.
  Var slice(Var input, std::size_t offset, std::size_t width);
  /// Rows [offset, offset + count) of a rank-2 value.
  Var rows(Var input, std::size_t offset, std::size_t count);
  /// Stacks rank-2 values with equal widths on top of each other.
  Var stack_rows(std::span<const Var> parts);
  Var stack_rows(std::initializer_list<Var> parts) {
    return stack_rows(std::span<const Var>(parts.begin(), parts.size()));
  }
  Var tanh_map(Var input);
  Var sigmoid_map(Var input);
  Var scale(Var input, double factor);
  /// Mean squared difference over all elements; returns shape [1].
  Var mse(Var pred, Var target);

  const Tensor& value(Var v) const;
  Op op(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar `loss`. The returned store holds an entry
  /// for every parameter leaf on the tape (zero when unreachable); leaves
  /// registered twice under one name accumulate into one entry.
  GradientStore backward(Var loss) const;

  /// Adjoints of every node for an arbitrary seed on `output`; used by
  /// tests that need adjoints of non-parameter values.
  std::vector<Tensor> adjoints(Var output, const Tensor& seed) const;

  /// Recomputes every non-leaf value from the leaves, in recording order.
  std::vector<Tensor> replay() const;

 private:
  struct Node {
    Op op = Op::kConstant;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    const Tensor* external = nullptr;
    std::string name;
    std::size_t offset = 0;
    std::size_t width = 0;
    double factor = 1.0;
    bool reaches_parameter = false;
  };

  Var push(Node node);
  // `prune` skips nodes that cannot reach a parameter and batches the
  // weight gradients of each parameter into one product.
  std::vector<Tensor> sweep(Var output, const Tensor& seed, bool prune) const;
  const Node& node(Var v) const;
  void check(Var v) const;

  std::vector<Node> nodes_;
};

/// Test hook: while alive, the adjoint rule of `op` on the current thread
/// is deliberately wrong (scaled by 1.5). Exists to prove that gradient
/// checks catch broken rules.
class ScopedAdjointFault {
 public:
  explicit ScopedAdjointFault(Op op);
  ~ScopedAdjointFault();
  ScopedAdjointFault(const ScopedAdjointFault&) = delete;
  ScopedAdjointFault& operator=(const ScopedAdjointFault&) = delete;

 private:
  int previous_;
};

}  // namespace mesrnn::ad
