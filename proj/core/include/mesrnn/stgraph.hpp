// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mesrnn/scene.hpp"

namespace mesrnn::graph {

enum class EdgeKind { kSpatial, kTemporal };

/// Length-2 meta-path kinds, named by the edge types walked in order.
enum class MetaPathKind { kSS, kST, kTS, kTT };

inline constexpr std::array<MetaPathKind, 4> kAllMetaPathKinds = {
    MetaPathKind::kSS, MetaPathKind::kST, MetaPathKind::kTS,
    MetaPathKind::kTT};

std::string_view to_string(MetaPathKind kind);
/// Edge-type signature walked by `kind`, e.g. ST -> {spatial, temporal}.
std::array<EdgeKind, 2> signature(MetaPathKind kind);

struct GraphOptions {
  /// Spatial edges only between pedestrians at most this far apart.
  /// Unset means fully connected among co-present pedestrians.
  std::optional<double> radius;
};

/// Spatial edge between two co-present pedestrians; `feature` is
/// v_low - v_high (oriented from the lower index).
struct SpatialEdge {
  std::size_t low = 0;
  std::size_t high = 0;
  std::size_t step = 0;
  Vec2 feature;
};

/// Temporal edge of one pedestrian between `step - 1` and `step`;
/// `feature` is v^step - v^(step-1).
struct TemporalEdge {
  std::size_t ped = 0;
  std::size_t step = 0;
  Vec2 feature;
};

/// Spatio-temporal graph over steps [first_step, end_step).
class STGraph {
 public:
  STGraph(const Scene& scene, std::size_t first_step, std::size_t end_step,
          const GraphOptions& options);

  std::size_t num_peds() const { return num_peds_; }
  std::size_t first_step() const { return first_; }
  std::size_t end_step() const { return end_; }

  bool has_vertex(std::size_t ped, std::size_t step) const;
  Vec2 vertex(std::size_t ped, std::size_t step) const;

  const std::vector<SpatialEdge>& spatial_edges() const { return spatial_; }
  const std::vector<TemporalEdge>& temporal_edges() const { return temporal_; }

  /// e^S_ij(t) oriented from i (v_i - v_j), if the edge exists.
  std::optional<Vec2> spatial(std::size_t i, std::size_t j,
                              std::size_t step) const;
  /// e^T_i(t) = v_i^t - v_i^(t-1), if the edge exists.
  std::optional<Vec2> temporal(std::size_t i, std::size_t step) const;

 private:
  bool in_range(std::size_t step) const {
    return step >= first_ && step < end_;
  }

  std::size_t num_peds_ = 0;
  std::size_t first_ = 0;
  std::size_t end_ = 0;
  std::vector<std::optional<Vec2>> vertices_;  // [step - first][ped]
  std::vector<SpatialEdge> spatial_;
  std::vector<TemporalEdge> temporal_;
  std::vector<int> spatial_index_;   // [step - first][low][high] -> edge id
  std::vector<int> temporal_index_;  // [step - first][ped] -> edge id
};

/// v_i^t - v_j^t. Throws PresenceError if either pedestrian is absent.
Vec2 spatial_edge(const Scene& scene, std::size_t i, std::size_t j,
                  std::size_t step);
/// v_i^t - v_i^(t-1). Throws PresenceError at step 0 or on absence.
Vec2 temporal_edge(const Scene& scene, std::size_t i, std::size_t step);

/// Graph over steps [0, up_to). `up_to` counts steps (1..length).
STGraph build_graph(const Scene& scene, std::size_t up_to,
                    const GraphOptions& options = {});
/// Graph over steps [from, up_to).
STGraph build_graph(const Scene& scene, std::size_t from, std::size_t up_to,
                    const GraphOptions& options);

struct MetaPathFeature {
  MetaPathKind kind = MetaPathKind::kTT;
  std::size_t anchor = 0;
  /// Walk endpoint pedestrian; equals `anchor` for TT.
  std::size_t partner = 0;
  /// Middle pedestrian of an SS walk; equals `anchor` otherwise.
  std::size_t intermediate = 0;
  std::size_t step = 0;
  /// Ordered concatenation of the two edge features, each oriented from
  /// the walk's start.
  std::array<double, 4> value{};
};

/// Every meta-path instance of `kind` anchored at (anchor, step). Instances
/// with a missing constituent edge are omitted.
std::vector<MetaPathFeature> metapaths(const STGraph& graph,
                                       std::size_t anchor, std::size_t step,
                                       MetaPathKind kind);

/// Brute-force enumeration of simple typed walks starting at vertex
/// (anchor, step), restricted to steps <= `step`. Each walk's feature is the
/// concatenation of (from - to) over its edges. Signature length must be
/// 1 or 2. Kept independent of metapaths() so it can serve as its oracle.
std::vector<std::vector<double>> enumerate_walks_oracle(
    const STGraph& graph, std::size_t anchor, std::size_t step,
    std::span<const EdgeKind> signature);

}  // namespace mesrnn::graph
