// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "mesrnn/model.hpp"
#include "mesrnn/normalization.hpp"

namespace mesrnn::model {

/// Run settings persisted next to the learned tensors.
struct CheckpointMeta {
  double dropout = 0.2;
  std::uint64_t seed = 0;
  std::size_t obs = 8;
  std::size_t pred = 12;
  double frame_interval = 0.4;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  ModelParams params;
  train::NormStats norm;
  CheckpointMeta meta;
};

inline constexpr std::string_view kCheckpointMagic = "MESRNN-CKPT v1";

/// Text format, one value per line at 17 significant digits:
///
///   MESRNN-CKPT v1
///   variant=... edge_embed=... (space-separated key=value metadata)
///   tensor <name> <dim0> [<dim1>]
///   <value>
///   ...
///   end
std::string serialize_checkpoint(const Checkpoint& checkpoint);

/// Parses and validates against the layout of the declared variant. With
/// `expected` set, a checkpoint of another variant is rejected.
Checkpoint parse_checkpoint(std::string_view text,
                            std::optional<Variant> expected = std::nullopt);

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<Variant> expected = std::nullopt);

/// %.17g formatting shared by every text output.
std::string format_double(double value);

}  // namespace mesrnn::model
