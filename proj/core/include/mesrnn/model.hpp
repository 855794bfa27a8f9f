// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mesrnn/layers.hpp"
#include "mesrnn/params.hpp"
#include "mesrnn/scene.hpp"
#include "mesrnn/stgraph.hpp"
#include "mesrnn/tape.hpp"

namespace mesrnn::model {

enum class Variant { kMesrnn, kSrnn, kVlstm };

std::string_view to_string(Variant variant);
/// Parses "mesrnn" | "srnn" | "vlstm"; throws ContractError otherwise.
Variant parse_variant(std::string_view text);

/// Edge factors: the two length-1 edge types and the four length-2
/// meta-path types.
enum class FactorKind { kS, kT, kSS, kST, kTS, kTT };

inline constexpr std::array<FactorKind, 6> kAllFactors = {
    FactorKind::kS,  FactorKind::kT,  FactorKind::kSS,
    FactorKind::kST, FactorKind::kTS, FactorKind::kTT};

std::string_view to_string(FactorKind kind);
/// Width of the aggregated input of a factor: 2 for S/T, 4 for meta-paths.
std::size_t factor_input_width(FactorKind kind);
/// Factors in NodeRNN concatenation order: (S, T) for SRNN, followed by
/// (SS, ST, TS, TT) for MESRNN; empty for VLSTM.
std::span<const FactorKind> enabled_factors(Variant variant);

struct ModelDims {
  std::size_t edge_embed = 64;
  std::size_t edge_hidden = 128;
  std::size_t node_embed = 128;
  std::size_t node_hidden = 256;
  std::size_t vlstm_embed = 64;
  std::size_t vlstm_hidden = 128;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// NodeRNN LSTM input width: node embedding plus one edge hidden state per
/// enabled factor.
std::size_t node_input_width(Variant variant, const ModelDims& dims);

enum class InitScheme { kGlorot, kZero };

struct ModelParams {
  Variant variant = Variant::kMesrnn;
  ModelDims dims;
  ad::ParamSet tensors;

  std::size_t scalar_count() const { return tensors.scalar_count(); }
};

/// Parameter tensor names and shapes for a variant, in canonical order.
std::vector<std::pair<std::string, ad::Shape>> parameter_layout(
    Variant variant, const ModelDims& dims);

/// Glorot-uniform weights, zero biases except LSTM forget-gate bias 1.0.
/// Deterministic in `seed`. kZero yields an all-zero model (debugging).
ModelParams init_params(Variant variant, std::uint64_t seed,
                        const ModelDims& dims = {},
                        InitScheme scheme = InitScheme::kGlorot);

/// Per-factor aggregated edge features for every pedestrian at one step:
/// tensor k has shape [N x factor_input_width(kind k)]; rows of pedestrians
/// without any instance are zero.
struct StepFeatures {
  std::array<ad::Tensor, 6> by_factor;

  const ad::Tensor& operator[](FactorKind kind) const {
    return by_factor[static_cast<std::size_t>(kind)];
  }
};

/// Elementwise sum of instance values (the zero vector when empty).
ad::Tensor sum_instances(std::span<const graph::MetaPathFeature> instances);

/// Builds the graph around `step` from `believed` positions and sums every
/// edge and meta-path instance per pedestrian and factor.
StepFeatures compute_step_features(const Scene& believed, std::size_t step,
                                   const graph::GraphOptions& options = {});

struct EdgeRnn {
  FactorKind kind = FactorKind::kS;
  Embedder encoder;
  LstmCell cell;
};

struct NodeRnn {
  Embedder encoder;
  LstmCell cell;
  Embedder decoder;
};

/// Parameters of one model registered as leaves on a tape.
struct BoundModel {
  Variant variant = Variant::kMesrnn;
  ModelDims dims;
  std::vector<EdgeRnn> edges;  // enabled_factors(variant) order
  NodeRnn node;                // VLSTM reuses this shape
};

/// Registers every tensor of `params` on `tape`. `params` must outlive it.
BoundModel bind(ad::Tape& tape, const ModelParams& params);
/// Same, for a bare tensor set laid out as parameter_layout(variant, dims).
BoundModel bind(ad::Tape& tape, Variant variant, const ModelDims& dims,
                const ad::ParamSet& tensors);

/// aggregated [N x D_in] -> encoder -> dropout -> LSTM.
LstmState edge_rnn_step(ad::Tape& tape, const EdgeRnn& edge,
                        const ad::Tensor& aggregated, const LstmState& prev,
                        Dropout& dropout);

struct NodeStep {
  LstmState state;
  ad::Var displacement;   // [N x 2], tanh-bounded
  ad::Var next_position;  // positions + displacement
};

/// Concatenates the position embedding with the edge hidden states, steps
/// the LSTM and decodes a displacement. `edge_hiddens` must list exactly
/// the variant's factors in enabled_factors() order.
NodeStep node_rnn_step(ad::Tape& tape, const BoundModel& model,
                       const ad::Tensor& positions,
                       std::span<const std::pair<FactorKind, ad::Var>> edge_hiddens,
                       const LstmState& prev, Dropout& dropout);

/// Vanilla LSTM baseline step: encoder -> LSTM -> decoder, residual add.
NodeStep vlstm_step(ad::Tape& tape, const BoundModel& model,
                    const ad::Tensor& positions, const LstmState& prev,
                    Dropout& dropout);

/// Recurrent state of every pedestrian; row r belongs to pedestrian r.
struct ModelState {
  std::vector<LstmState> edges;  // enabled_factors order
  LstmState node;
};

ModelState initial_state(ad::Tape& tape, const BoundModel& model,
                         std::size_t num_peds);

struct StepOutput {
  ModelState state;
  ad::Var next_positions;  // [N x 2]
};

/// One joint step for all pedestrians at `step`: features come from
/// `believed` (positions at steps <= step), every factor RNN and the node
/// RNN run with shared parameters, and all predictions for step + 1 are
/// returned together. `features` may supply precomputed aggregates.
StepOutput model_step(ad::Tape& tape, const BoundModel& model,
                      const Scene& believed, std::size_t step,
                      const ModelState& state, Dropout& dropout,
                      const StepFeatures* features = nullptr,
                      const graph::GraphOptions& options = {});

/// Teacher-forced unroll over steps 0 .. steps-1 of `truth`. Inputs never
/// depend on predictions, so every input projection runs once over all
/// steps and only the recurrences advance step by step. Returns the
/// predictions for steps 1 .. steps stacked step-major as [steps*N x 2];
/// equal to repeated model_step calls up to rounding. `features` may hold
/// precomputed aggregates (index = step).
ad::Var teacher_forced_unroll(ad::Tape& tape, const BoundModel& model,
                              const Scene& truth, std::size_t steps,
                              Dropout& dropout,
                              std::span<const StepFeatures> features = {},
                              const graph::GraphOptions& options = {});

/// Believed positions at `step` as an [N x 2] tensor.
ad::Tensor positions_at(const Scene& scene, std::size_t step);

}  // namespace mesrnn::model
