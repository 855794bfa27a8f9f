// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mesrnn::ad {
namespace {

double evaluate(const ScalarFunction& f, const ParamSet& params) {
  Tape tape;
  return tape.value(f(tape, params)).item();
}

std::vector<std::size_t> pick_entries(std::size_t size, std::size_t limit,
                                      std::mt19937_64& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= size) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), floor});
  const double err = std::abs(analytic - numeric) / denom;
  return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
}

GradCheckReport grad_check(const ScalarFunction& f, ParamSet& params,
                           const GradCheckOptions& options) {
  GradientStore analytic;
  {
    Tape tape;
    analytic = tape.backward(f(tape, params));
  }

  GradCheckReport report;
  report.tolerance = options.tolerance;
  std::mt19937_64 rng(options.seed);

  for (auto& [name, tensor] : params) {
    TensorCheck check;
    check.name = name;
    const Tensor zeros = Tensor::zeros(tensor.shape());
    const Tensor& grad =
        analytic.contains(name) ? analytic.get(name) : zeros;

    for (std::size_t i :
         pick_entries(tensor.size(), options.max_entries_per_tensor, rng)) {
      const double saved = tensor[i];
      tensor[i] = saved + options.step;
      const double up = evaluate(f, params);
      tensor[i] = saved - options.step;
      const double down = evaluate(f, params);
      tensor[i] = saved;

      const double numeric = (up - down) / (2.0 * options.step);
      const double err =
          relative_error(grad[i], numeric, options.denominator_floor);
      check.max_relative_error = std::max(check.max_relative_error, err);
      check.max_abs_analytic = std::max(check.max_abs_analytic,
                                        std::abs(grad[i]));
      ++check.entries_checked;
    }
    report.max_relative_error =
        std::max(report.max_relative_error, check.max_relative_error);
    report.tensors.push_back(std::move(check));
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace mesrnn::ad
