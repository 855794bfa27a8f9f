// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "mesrnn/params.hpp"
#include "mesrnn/tape.hpp"

namespace mesrnn::model {

/// Inverted dropout. A rate of 0 or a missing generator is the identity,
/// which is how evaluation and gradient checks run.
class Dropout {
 public:
  Dropout() = default;
  Dropout(double rate, std::mt19937_64* rng) : rate_(rate), rng_(rng) {}

  bool active() const { return rate_ > 0.0 && rng_ != nullptr; }
  ad::Var apply(ad::Tape& tape, ad::Var input);

 private:
  double rate_ = 0.0;
  std::mt19937_64* rng_ = nullptr;
};

/// Linear layer followed by tanh.
struct Embedder {
  ad::Var weight;
  ad::Var bias;

  ad::Var operator()(ad::Tape& tape, ad::Var input) const;
};

struct LstmState {
  ad::Var h;
  ad::Var c;
};

/// LSTM cell with gate blocks ordered (input, forget, candidate, output).
struct LstmCell {
  ad::Var w_input;   // [4H x D]
  ad::Var w_hidden;  // [4H x H]
  ad::Var bias;      // [4H]
  std::size_t hidden = 0;

  LstmState step(ad::Tape& tape, ad::Var input, const LstmState& prev) const;
  /// Same step with the input term input * w_input^T + bias precomputed.
  LstmState step_projected(ad::Tape& tape, ad::Var projected,
                           const LstmState& prev) const;
};

/// Zero state with `rows` rows of width `hidden`.
LstmState zero_state(ad::Tape& tape, std::size_t rows, std::size_t hidden);

Embedder bind_embedder(ad::Tape& tape, const ad::ParamSet& params,
                       const std::string& prefix);
LstmCell bind_cell(ad::Tape& tape, const ad::ParamSet& params,
                   const std::string& prefix);

}  // namespace mesrnn::model
