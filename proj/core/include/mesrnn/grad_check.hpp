// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mesrnn/params.hpp"
#include "mesrnn/tape.hpp"

namespace mesrnn::ad {

/// Builds a scalar loss on `tape` from the parameters in `params`.
/// Must be deterministic: it is re-evaluated for every perturbation.
using ScalarFunction = std::function<Var(Tape& tape, const ParamSet& params)>;

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-4;
  /// Entries compared per tensor; 0 checks every entry. Sampled entries are
  /// drawn without replacement from a generator seeded with `seed`.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
  /// Lower bound on the relative-error denominator, so entries whose true
  /// gradient is near zero are judged on absolute error instead.
  double denominator_floor = 1e-6;
};

struct TensorCheck {
  std::string name;
  std::size_t entries_checked = 0;
  double max_relative_error = 0.0;
  double max_abs_analytic = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Compares tape gradients of `f` against central differences for every
/// tensor in `params`. `params` is perturbed in place and restored.
GradCheckReport grad_check(const ScalarFunction& f, ParamSet& params,
                           const GradCheckOptions& options = {});

}  // namespace mesrnn::ad
