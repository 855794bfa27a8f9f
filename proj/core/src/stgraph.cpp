// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/stgraph.hpp"

#include <algorithm>
#include <string>
#include <tuple>

#include "mesrnn/error.hpp"

namespace mesrnn::graph {

std::string_view to_string(MetaPathKind kind) {
  switch (kind) {
    case MetaPathKind::kSS: return "SS";
    case MetaPathKind::kST: return "ST";
    case MetaPathKind::kTS: return "TS";
    case MetaPathKind::kTT: return "TT";
  }
  throw ContractError("unknown meta-path kind " +
                      std::to_string(static_cast<int>(kind)));
}

std::array<EdgeKind, 2> signature(MetaPathKind kind) {
  using enum EdgeKind;
  switch (kind) {
    case MetaPathKind::kSS: return {kSpatial, kSpatial};
    case MetaPathKind::kST: return {kSpatial, kTemporal};
    case MetaPathKind::kTS: return {kTemporal, kSpatial};
    case MetaPathKind::kTT: return {kTemporal, kTemporal};
  }
  throw ContractError("unknown meta-path kind " +
                      std::to_string(static_cast<int>(kind)));
}

Vec2 spatial_edge(const Scene& scene, std::size_t i, std::size_t j,
                  std::size_t step) {
  if (i == j) {
    throw ContractError("spatial edge needs two distinct pedestrians");
  }
  return scene.position(i, step) - scene.position(j, step);
}

Vec2 temporal_edge(const Scene& scene, std::size_t i, std::size_t step) {
  if (step == 0) {
    throw PresenceError("temporal edge needs a previous step; got step 0");
  }
  return scene.position(i, step) - scene.position(i, step - 1);
}

STGraph::STGraph(const Scene& scene, std::size_t first_step,
                 std::size_t end_step, const GraphOptions& options)
    : num_peds_(scene.num_peds()), first_(first_step), end_(end_step) {
  if (first_step >= end_step || end_step > scene.length()) {
    throw ContractError("graph step range [" + std::to_string(first_step) +
                        ", " + std::to_string(end_step) +
                        ") invalid for scene of length " +
                        std::to_string(scene.length()));
  }
  const std::size_t steps = end_ - first_;
  const std::size_t n = num_peds_;
  vertices_.resize(steps * n);
  spatial_index_.assign(steps * n * n, -1);
  temporal_index_.assign(steps * n, -1);

  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = first_ + s;
    for (std::size_t i = 0; i < n; ++i) {
      vertices_[s * n + i] = scene.maybe_position(i, t);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!vertices_[s * n + i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!vertices_[s * n + j]) continue;
        const Vec2 d = *vertices_[s * n + i] - *vertices_[s * n + j];
        if (options.radius && d.norm() > *options.radius) continue;
        spatial_index_[(s * n + i) * n + j] = static_cast<int>(spatial_.size());
        spatial_.push_back({i, j, t, d});
      }
      if (s > 0 && vertices_[(s - 1) * n + i]) {
        temporal_index_[s * n + i] = static_cast<int>(temporal_.size());
        temporal_.push_back(
            {i, t, *vertices_[s * n + i] - *vertices_[(s - 1) * n + i]});
      }
    }
  }
}

bool STGraph::has_vertex(std::size_t ped, std::size_t step) const {
  return ped < num_peds_ && in_range(step) &&
         vertices_[(step - first_) * num_peds_ + ped].has_value();
}

Vec2 STGraph::vertex(std::size_t ped, std::size_t step) const {
  if (!has_vertex(ped, step)) {
    throw PresenceError("no vertex for pedestrian " + std::to_string(ped) +
                        " at step " + std::to_string(step));
  }
  return *vertices_[(step - first_) * num_peds_ + ped];
}

std::optional<Vec2> STGraph::spatial(std::size_t i, std::size_t j,
                                     std::size_t step) const {
  if (i == j || i >= num_peds_ || j >= num_peds_ || !in_range(step)) {
    return std::nullopt;
  }
  const auto [lo, hi] = std::minmax(i, j);
  const int id =
      spatial_index_[((step - first_) * num_peds_ + lo) * num_peds_ + hi];
  if (id < 0) return std::nullopt;
  const Vec2 f = spatial_[static_cast<std::size_t>(id)].feature;
  return i == lo ? f : -f;
}

std::optional<Vec2> STGraph::temporal(std::size_t i, std::size_t step) const {
  if (i >= num_peds_ || !in_range(step)) return std::nullopt;
  const int id = temporal_index_[(step - first_) * num_peds_ + i];
  if (id < 0) return std::nullopt;
  return temporal_[static_cast<std::size_t>(id)].feature;
}

STGraph build_graph(const Scene& scene, std::size_t up_to,
                    const GraphOptions& options) {
  return build_graph(scene, 0, up_to, options);
}

STGraph build_graph(const Scene& scene, std::size_t from, std::size_t up_to,
                    const GraphOptions& options) {
  scene.validate();
  if (up_to < 1 || up_to > scene.length()) {
    throw ContractError("build_graph up_to=" + std::to_string(up_to) +
                        " outside [1, " + std::to_string(scene.length()) +
                        "]");
  }
  return STGraph(scene, from, up_to, options);
}

namespace {

MetaPathFeature make_feature(MetaPathKind kind, std::size_t anchor,
                             std::size_t partner, std::size_t mid,
                             std::size_t step, Vec2 first, Vec2 second) {
  MetaPathFeature f;
  f.kind = kind;
  f.anchor = anchor;
  f.partner = partner;
  f.intermediate = mid;
  f.step = step;
  f.value = {first.x, first.y, second.x, second.y};
  return f;
}

}  // namespace

std::vector<MetaPathFeature> metapaths(const STGraph& graph,
                                       std::size_t anchor, std::size_t step,
                                       MetaPathKind kind) {
  const std::size_t n = graph.num_peds();
  if (anchor >= n || step < graph.first_step() || step >= graph.end_step()) {
    throw ContractError("meta-path anchor (" + std::to_string(anchor) + ", " +
                        std::to_string(step) + ") outside the graph");
  }
  std::vector<MetaPathFeature> out;
  switch (kind) {
    case MetaPathKind::kSS:
      for (std::size_t k = 0; k < n; ++k) {
        const auto ik = graph.spatial(anchor, k, step);
        if (!ik) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == anchor || j == k) continue;
          if (const auto kj = graph.spatial(k, j, step)) {
            out.push_back(make_feature(kind, anchor, j, k, step, *ik, *kj));
          }
        }
      }
      break;
    case MetaPathKind::kST:
      for (std::size_t j = 0; j < n; ++j) {
        const auto ij = graph.spatial(anchor, j, step);
        const auto jt = graph.temporal(j, step);
        if (ij && jt) {
          out.push_back(make_feature(kind, anchor, j, anchor, step, *ij, *jt));
        }
      }
      break;
    case MetaPathKind::kTS: {
      const auto it = graph.temporal(anchor, step);
      if (!it || step == 0) break;
      for (std::size_t j = 0; j < n; ++j) {
        if (const auto ij = graph.spatial(anchor, j, step - 1)) {
          out.push_back(make_feature(kind, anchor, j, anchor, step, *it, *ij));
        }
      }
      break;
    }
    case MetaPathKind::kTT: {
      const auto now = graph.temporal(anchor, step);
      const auto prev = step == 0 ? std::nullopt
                                  : graph.temporal(anchor, step - 1);
      if (now && prev) {
        out.push_back(
            make_feature(kind, anchor, anchor, anchor, step, *now, *prev));
      }
      break;
    }
    default:
      throw ContractError("unknown meta-path kind " +
                          std::to_string(static_cast<int>(kind)));
  }
  return out;
}

namespace {

struct VertexKey {
  std::size_t ped;
  std::size_t step;
  friend bool operator==(VertexKey, VertexKey) = default;
};

struct Neighbor {
  VertexKey to;
  EdgeKind kind;
};

}  // namespace

std::vector<std::vector<double>> enumerate_walks_oracle(
    const STGraph& graph, std::size_t anchor, std::size_t step,
    std::span<const EdgeKind> sig) {
  if (sig.empty() || sig.size() > 2) {
    throw ContractError("walk signature length must be 1 or 2");
  }

  // Undirected adjacency straight from the edge lists.
  auto adjacency = [&](VertexKey v) {
    std::vector<Neighbor> nbrs;
    for (const auto& e : graph.spatial_edges()) {
      if (e.step != v.step) continue;
      if (e.low == v.ped) nbrs.push_back({{e.high, e.step}, EdgeKind::kSpatial});
      if (e.high == v.ped) nbrs.push_back({{e.low, e.step}, EdgeKind::kSpatial});
    }
    for (const auto& e : graph.temporal_edges()) {
      if (e.ped != v.ped) continue;
      if (e.step == v.step) {
        nbrs.push_back({{e.ped, e.step - 1}, EdgeKind::kTemporal});
      }
      if (e.step - 1 == v.step) {
        nbrs.push_back({{e.ped, e.step}, EdgeKind::kTemporal});
      }
    }
    return nbrs;
  };

  std::vector<std::vector<double>> walks;
  if (!graph.has_vertex(anchor, step)) return walks;

  std::vector<VertexKey> path{{anchor, step}};
  std::vector<double> feature;

  auto dfs = [&](auto&& self, std::size_t depth) -> void {
    if (depth == sig.size()) {
      walks.push_back(feature);
      return;
    }
    const VertexKey here = path.back();
    for (const Neighbor& nb : adjacency(here)) {
      if (nb.kind != sig[depth] || nb.to.step > step) continue;
      bool revisit = false;
      for (const auto& v : path) revisit = revisit || v == nb.to;
      if (revisit) continue;
      const Vec2 d = graph.vertex(here.ped, here.step) -
                     graph.vertex(nb.to.ped, nb.to.step);
      path.push_back(nb.to);
      feature.push_back(d.x);
      feature.push_back(d.y);
      self(self, depth + 1);
      feature.resize(feature.size() - 2);
      path.pop_back();
    }
  };
  dfs(dfs, 0);
  return walks;
}

}  // namespace mesrnn::graph
