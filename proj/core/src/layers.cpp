// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/layers.hpp"

namespace mesrnn::model {

ad::Var Dropout::apply(ad::Tape& tape, ad::Var input) {
  if (!active()) return input;
  const ad::Tensor& x = tape.value(input);
  ad::Tensor mask(x.shape());
  std::bernoulli_distribution keep(1.0 - rate_);
  const double scale = 1.0 / (1.0 - rate_);
  for (double& m : mask.data()) m = keep(*rng_) ? scale : 0.0;
  return tape.hadamard(input, tape.constant(std::move(mask)));
}

ad::Var Embedder::operator()(ad::Tape& tape, ad::Var input) const {
  return tape.tanh_map(tape.linear(input, weight, bias));
}

LstmState LstmCell::step(ad::Tape& tape, ad::Var input,
                         const LstmState& prev) const {
  return step_projected(tape, tape.linear(input, w_input, bias), prev);
}

LstmState LstmCell::step_projected(ad::Tape& tape, ad::Var projected,
                                   const LstmState& prev) const {
  const ad::Var gates = tape.add(projected, tape.matmul(prev.h, w_hidden));
  const std::size_t h = hidden;
  const ad::Var in_gate = tape.sigmoid_map(tape.slice(gates, 0, h));
  const ad::Var forget = tape.sigmoid_map(tape.slice(gates, h, h));
  const ad::Var candidate = tape.tanh_map(tape.slice(gates, 2 * h, h));
  const ad::Var out_gate = tape.sigmoid_map(tape.slice(gates, 3 * h, h));
  const ad::Var c = tape.add(tape.hadamard(forget, prev.c),
                             tape.hadamard(in_gate, candidate));
  return {tape.hadamard(out_gate, tape.tanh_map(c)), c};
}

LstmState zero_state(ad::Tape& tape, std::size_t rows, std::size_t hidden) {
  return {tape.constant(ad::Tensor::zeros({rows, hidden})),
          tape.constant(ad::Tensor::zeros({rows, hidden}))};
}

Embedder bind_embedder(ad::Tape& tape, const ad::ParamSet& params,
                       const std::string& prefix) {
  return {tape.parameter(prefix + ".weight", params.get(prefix + ".weight")),
          tape.parameter(prefix + ".bias", params.get(prefix + ".bias"))};
}

LstmCell bind_cell(ad::Tape& tape, const ad::ParamSet& params,
                   const std::string& prefix) {
  const ad::Tensor& w_hidden = params.get(prefix + ".w_hidden");
  return {tape.parameter(prefix + ".w_input", params.get(prefix + ".w_input")),
          tape.parameter(prefix + ".w_hidden", w_hidden),
          tape.parameter(prefix + ".bias", params.get(prefix + ".bias")),
          w_hidden.cols()};
}

}  // namespace mesrnn::model
