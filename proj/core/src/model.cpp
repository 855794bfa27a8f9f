// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mesrnn/error.hpp"

namespace mesrnn::model {
namespace {

constexpr std::array<FactorKind, 2> kSrnnFactors = {FactorKind::kS,
                                                    FactorKind::kT};

std::string factor_prefix(FactorKind kind) {
  return "edge." + std::string(to_string(kind));
}

std::string node_prefix(Variant variant) {
  return variant == Variant::kVlstm ? "vlstm" : "node";
}

void add_embedder(std::vector<std::pair<std::string, ad::Shape>>& out,
                  const std::string& prefix, std::size_t in, std::size_t o) {
  out.emplace_back(prefix + ".weight", ad::Shape{o, in});
  out.emplace_back(prefix + ".bias", ad::Shape{o});
}

void add_cell(std::vector<std::pair<std::string, ad::Shape>>& out,
              const std::string& prefix, std::size_t in, std::size_t hidden) {
  out.emplace_back(prefix + ".w_input", ad::Shape{4 * hidden, in});
  out.emplace_back(prefix + ".w_hidden", ad::Shape{4 * hidden, hidden});
  out.emplace_back(prefix + ".bias", ad::Shape{4 * hidden});
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::kMesrnn: return "mesrnn";
    case Variant::kSrnn: return "srnn";
    case Variant::kVlstm: return "vlstm";
  }
  throw ContractError("unknown variant");
}

Variant parse_variant(std::string_view text) {
  if (text == "mesrnn") return Variant::kMesrnn;
  if (text == "srnn") return Variant::kSrnn;
  if (text == "vlstm") return Variant::kVlstm;
  throw ContractError("unknown model variant '" + std::string(text) +
                      "' (expected mesrnn, srnn or vlstm)");
}

std::string_view to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::kS: return "S";
    case FactorKind::kT: return "T";
    case FactorKind::kSS: return "SS";
    case FactorKind::kST: return "ST";
    case FactorKind::kTS: return "TS";
    case FactorKind::kTT: return "TT";
  }
  throw ContractError("unknown factor kind");
}

std::size_t factor_input_width(FactorKind kind) {
  return kind == FactorKind::kS || kind == FactorKind::kT ? 2 : 4;
}

std::span<const FactorKind> enabled_factors(Variant variant) {
  switch (variant) {
    case Variant::kMesrnn: return kAllFactors;
    case Variant::kSrnn: return kSrnnFactors;
    case Variant::kVlstm: return {};
  }
  throw ContractError("unknown variant");
}

std::size_t node_input_width(Variant variant, const ModelDims& dims) {
  return dims.node_embed + enabled_factors(variant).size() * dims.edge_hidden;
}

std::vector<std::pair<std::string, ad::Shape>> parameter_layout(
    Variant variant, const ModelDims& dims) {
  std::vector<std::pair<std::string, ad::Shape>> out;
  if (variant == Variant::kVlstm) {
    add_embedder(out, "vlstm.encoder", 2, dims.vlstm_embed);
    add_cell(out, "vlstm.cell", dims.vlstm_embed, dims.vlstm_hidden);
    add_embedder(out, "vlstm.decoder", dims.vlstm_hidden, 2);
    return out;
  }
  for (FactorKind kind : enabled_factors(variant)) {
    const std::string prefix = factor_prefix(kind);
    add_embedder(out, prefix + ".encoder", factor_input_width(kind),
                 dims.edge_embed);
    add_cell(out, prefix + ".cell", dims.edge_embed, dims.edge_hidden);
  }
  add_embedder(out, "node.encoder", 2, dims.node_embed);
  add_cell(out, "node.cell", node_input_width(variant, dims), dims.node_hidden);
  add_embedder(out, "node.decoder", dims.node_hidden, 2);
  return out;
}

ModelParams init_params(Variant variant, std::uint64_t seed,
                        const ModelDims& dims, InitScheme scheme) {
  ModelParams params{variant, dims, {}};
  std::mt19937_64 rng(seed);
  for (auto& [name, shape] : parameter_layout(variant, dims)) {
    ad::Tensor t(shape);
    if (scheme == InitScheme::kGlorot) {
      if (shape.size() == 2) {
        const double limit =
            std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& v : t.data()) v = dist(rng);
      } else if (ends_with(name, ".cell.bias")) {
        const std::size_t hidden = shape[0] / 4;
        std::fill_n(t.raw() + hidden, hidden, 1.0);
      }
    }
    params.tensors.add(name, std::move(t));
  }
  return params;
}

ad::Tensor sum_instances(std::span<const graph::MetaPathFeature> instances) {
  ad::Tensor sum = ad::Tensor::zeros({4});
  for (const auto& inst : instances) {
    for (std::size_t k = 0; k < 4; ++k) sum[k] += inst.value[k];
  }
  return sum;
}

StepFeatures compute_step_features(const Scene& believed, std::size_t step,
                                   const graph::GraphOptions& options) {
  const std::size_t n = believed.num_peds();
  const std::size_t from = step >= 2 ? step - 2 : 0;
  const graph::STGraph g =
      graph::build_graph(believed, from, step + 1, options);

  StepFeatures out;
  for (FactorKind kind : kAllFactors) {
    out.by_factor[static_cast<std::size_t>(kind)] =
        ad::Tensor::zeros({n, factor_input_width(kind)});
  }
  auto row = [&](FactorKind kind, std::size_t i) {
    return out.by_factor[static_cast<std::size_t>(kind)].raw() +
           i * factor_input_width(kind);
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (!g.has_vertex(i, step)) continue;
    double* s = row(FactorKind::kS, i);
    for (std::size_t j = 0; j < n; ++j) {
      if (const auto e = g.spatial(i, j, step)) {
        s[0] += e->x;
        s[1] += e->y;
      }
    }
    if (const auto e = g.temporal(i, step)) {
      row(FactorKind::kT, i)[0] = e->x;
      row(FactorKind::kT, i)[1] = e->y;
    }
    const std::array<std::pair<FactorKind, graph::MetaPathKind>, 4> metas = {{
        {FactorKind::kSS, graph::MetaPathKind::kSS},
        {FactorKind::kST, graph::MetaPathKind::kST},
        {FactorKind::kTS, graph::MetaPathKind::kTS},
        {FactorKind::kTT, graph::MetaPathKind::kTT},
    }};
    for (const auto& [factor, kind] : metas) {
      const ad::Tensor sum = sum_instances(graph::metapaths(g, i, step, kind));
      std::copy_n(sum.raw(), 4, row(factor, i));
    }
  }
  return out;
}

BoundModel bind(ad::Tape& tape, Variant variant, const ModelDims& dims,
                const ad::ParamSet& tensors) {
  BoundModel m;
  m.variant = variant;
  m.dims = dims;
  for (FactorKind kind : enabled_factors(variant)) {
    const std::string prefix = factor_prefix(kind);
    m.edges.push_back({kind, bind_embedder(tape, tensors, prefix + ".encoder"),
                       bind_cell(tape, tensors, prefix + ".cell")});
  }
  const std::string prefix = node_prefix(variant);
  m.node.encoder = bind_embedder(tape, tensors, prefix + ".encoder");
  m.node.cell = bind_cell(tape, tensors, prefix + ".cell");
  m.node.decoder = bind_embedder(tape, tensors, prefix + ".decoder");
  return m;
}

BoundModel bind(ad::Tape& tape, const ModelParams& params) {
  return bind(tape, params.variant, params.dims, params.tensors);
}

LstmState edge_rnn_step(ad::Tape& tape, const EdgeRnn& edge,
                        const ad::Tensor& aggregated, const LstmState& prev,
                        Dropout& dropout) {
  if (aggregated.cols() != factor_input_width(edge.kind)) {
    throw DimensionError("EdgeRNN " + std::string(to_string(edge.kind)) +
                         " expects input width " +
                         std::to_string(factor_input_width(edge.kind)) +
                         ", got shape " + ad::shape_string(aggregated.shape()));
  }
  const ad::Var embedded =
      dropout.apply(tape, edge.encoder(tape, tape.constant(aggregated)));
  return edge.cell.step(tape, embedded, prev);
}

namespace {

NodeStep decode(ad::Tape& tape, const NodeRnn& node,
                const ad::Tensor& positions, const LstmState& state) {
  const ad::Var delta = node.decoder(tape, state.h);
  return {state, delta, tape.add(tape.constant(positions), delta)};
}

void require_positions(const ad::Tensor& positions) {
  if (positions.rank() != 2 || positions.cols() != 2) {
    throw DimensionError("positions must have shape [N x 2], got " +
                         ad::shape_string(positions.shape()));
  }
}

}  // namespace

NodeStep node_rnn_step(
    ad::Tape& tape, const BoundModel& model, const ad::Tensor& positions,
    std::span<const std::pair<FactorKind, ad::Var>> edge_hiddens,
    const LstmState& prev, Dropout& dropout) {
  require_positions(positions);
  const auto expected = enabled_factors(model.variant);
  if (model.variant == Variant::kVlstm ||
      edge_hiddens.size() != expected.size()) {
    throw ContractError("NodeRNN of variant " +
                        std::string(to_string(model.variant)) + " expects " +
                        std::to_string(expected.size()) +
                        " edge hidden states, got " +
                        std::to_string(edge_hiddens.size()));
  }
  std::vector<ad::Var> parts;
  parts.push_back(
      dropout.apply(tape, model.node.encoder(tape, tape.constant(positions))));
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (edge_hiddens[k].first != expected[k]) {
      throw ContractError("NodeRNN input " + std::to_string(k) + " must be " +
                          std::string(to_string(expected[k])) + ", got " +
                          std::string(to_string(edge_hiddens[k].first)));
    }
    parts.push_back(edge_hiddens[k].second);
  }
  const LstmState state =
      model.node.cell.step(tape, tape.concat(parts), prev);
  return decode(tape, model.node, positions, state);
}

NodeStep vlstm_step(ad::Tape& tape, const BoundModel& model,
                    const ad::Tensor& positions, const LstmState& prev,
                    Dropout& dropout) {
  require_positions(positions);
  if (model.variant != Variant::kVlstm) {
    throw ContractError("vlstm_step called on a " +
                        std::string(to_string(model.variant)) + " model");
  }
  const ad::Var embedded =
      dropout.apply(tape, model.node.encoder(tape, tape.constant(positions)));
  const LstmState state = model.node.cell.step(tape, embedded, prev);
  return decode(tape, model.node, positions, state);
}

ModelState initial_state(ad::Tape& tape, const BoundModel& model,
                         std::size_t num_peds) {
  ModelState s;
  for (std::size_t k = 0; k < model.edges.size(); ++k) {
    s.edges.push_back(zero_state(tape, num_peds, model.dims.edge_hidden));
  }
  const std::size_t hidden = model.variant == Variant::kVlstm
                                 ? model.dims.vlstm_hidden
                                 : model.dims.node_hidden;
  s.node = zero_state(tape, num_peds, hidden);
  return s;
}

ad::Tensor positions_at(const Scene& scene, std::size_t step) {
  ad::Tensor out({scene.num_peds(), 2});
  for (std::size_t i = 0; i < scene.num_peds(); ++i) {
    const Vec2 p = scene.position(i, step);
    out.at(i, 0) = p.x;
    out.at(i, 1) = p.y;
  }
  return out;
}

StepOutput model_step(ad::Tape& tape, const BoundModel& model,
                      const Scene& believed, std::size_t step,
                      const ModelState& state, Dropout& dropout,
                      const StepFeatures* features,
                      const graph::GraphOptions& options) {
  const ad::Tensor positions = positions_at(believed, step);
  StepOutput out;
  if (model.variant == Variant::kVlstm) {
    const NodeStep ns = vlstm_step(tape, model, positions, state.node, dropout);
    out.state.node = ns.state;
    out.next_positions = ns.next_position;
    return out;
  }

  std::optional<StepFeatures> computed;
  if (features == nullptr) {
    computed = compute_step_features(believed, step, options);
    features = &*computed;
  }

  std::vector<std::pair<FactorKind, ad::Var>> hiddens;
  for (std::size_t k = 0; k < model.edges.size(); ++k) {
    const EdgeRnn& edge = model.edges[k];
    const LstmState next = edge_rnn_step(tape, edge, (*features)[edge.kind],
                                         state.edges[k], dropout);
    out.state.edges.push_back(next);
    hiddens.emplace_back(edge.kind, next.h);
  }
  const NodeStep ns =
      node_rnn_step(tape, model, positions, hiddens, state.node, dropout);
  out.state.node = ns.state;
  out.next_positions = ns.next_position;
  return out;
}

namespace {

// Steps `cell` over `steps` blocks of `n` rows; `projected` holds the input
// term of every block. Returns the hidden states stacked step-major.
ad::Var run_cell(ad::Tape& tape, const LstmCell& cell, ad::Var projected,
                 std::size_t steps, std::size_t n) {
  LstmState state = zero_state(tape, n, cell.hidden);
  std::vector<ad::Var> hs;
  hs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    state = cell.step_projected(tape, tape.rows(projected, t * n, n), state);
    hs.push_back(state.h);
  }
  return tape.stack_rows(hs);
}

ad::Var project(ad::Tape& tape, const LstmCell& cell, ad::Var input) {
  return tape.linear(input, cell.w_input, cell.bias);
}

}  // namespace

ad::Var teacher_forced_unroll(ad::Tape& tape, const BoundModel& model,
                              const Scene& truth, std::size_t steps,
                              Dropout& dropout,
                              std::span<const StepFeatures> features,
                              const graph::GraphOptions& options) {
  const std::size_t n = truth.num_peds();
  if (steps == 0 || steps > truth.length()) {
    throw ContractError("teacher-forced unroll of " + std::to_string(steps) +
                        " steps over a scene of length " +
                        std::to_string(truth.length()));
  }
  if (!features.empty() && features.size() < steps) {
    throw ContractError("precomputed features cover fewer steps than the unroll");
  }

  ad::Tensor positions({steps * n, 2});
  for (std::size_t t = 0; t < steps; ++t) {
    const ad::Tensor p = positions_at(truth, t);
    std::copy_n(p.raw(), p.size(), positions.raw() + t * n * 2);
  }
  const ad::Var pos = tape.constant(positions);
  const ad::Var embedded =
      dropout.apply(tape, model.node.encoder(tape, pos));

  std::vector<ad::Var> node_inputs = {embedded};
  if (model.variant != Variant::kVlstm) {
    std::vector<StepFeatures> computed;
    if (features.empty()) {
      for (std::size_t t = 0; t < steps; ++t) {
        computed.push_back(compute_step_features(truth, t, options));
      }
      features = computed;
    }
    for (const EdgeRnn& edge : model.edges) {
      const std::size_t width = factor_input_width(edge.kind);
      ad::Tensor aggregated({steps * n, width});
      for (std::size_t t = 0; t < steps; ++t) {
        const ad::Tensor& f = features[t][edge.kind];
        if (f.rows() != n || f.cols() != width) {
          throw DimensionError("EdgeRNN " + std::string(to_string(edge.kind)) +
                               " expects input width " + std::to_string(width) +
                               ", got shape " + ad::shape_string(f.shape()));
        }
        std::copy_n(f.raw(), f.size(), aggregated.raw() + t * n * width);
      }
      const ad::Var input = dropout.apply(
          tape, edge.encoder(tape, tape.constant(std::move(aggregated))));
      node_inputs.push_back(
          run_cell(tape, edge.cell, project(tape, edge.cell, input), steps, n));
    }
  }

  const ad::Var node_in = node_inputs.size() == 1 ? node_inputs.front()
                                                  : tape.concat(node_inputs);
  const ad::Var hidden = run_cell(tape, model.node.cell,
                                  project(tape, model.node.cell, node_in),
                                  steps, n);
  return tape.add(pos, model.node.decoder(tape, hidden));
}

}  // namespace mesrnn::model
