// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mesrnn/scene.hpp"

namespace mesrnn::data {

struct TrajectoryRecord {
  long frame = 0;
  long ped_id = 0;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const TrajectoryRecord&,
                         const TrajectoryRecord&) = default;
};

struct TrajectoryTable {
  std::vector<TrajectoryRecord> records;
  double frame_interval = Scene::kDefaultFrameInterval;

  /// Distinct frame ticks in increasing order.
  std::vector<long> frames() const;
};

/// Parses `frame ped_id x y` lines separated by spaces or tabs. Blank lines
/// and lines starting with '#' are skipped. Throws DataError naming the
/// source and line on malformed input, duplicate (frame, id) pairs, or
/// non-uniform frame spacing. `source` only labels error messages.
TrajectoryTable parse_table(std::istream& in, std::string_view source,
                            double frame_interval =
                                Scene::kDefaultFrameInterval);
TrajectoryTable load_table(const std::filesystem::path& path,
                           double frame_interval =
                               Scene::kDefaultFrameInterval);

/// Debug writer: one record per line at 17 significant digits, in the
/// format parse_table reads.
void write_table(std::ostream& out, const TrajectoryTable& table);
void save_table(const TrajectoryTable& table,
                const std::filesystem::path& path);

enum class WindowMode {
  /// Keep pedestrians present over the whole window.
  kTraining,
  /// Keep pedestrians present over the observed steps; later ground truth
  /// may be missing.
  kInference,
};

struct WindowOptions {
  std::size_t obs = 8;
  std::size_t pred = 12;
  std::size_t stride = 10;
  WindowMode mode = WindowMode::kTraining;
};

/// Sliding windows of obs + pred consecutive frames advancing by `stride`
/// frames. Windows without a qualifying pedestrian are dropped; tables
/// shorter than one window yield no scenes.
std::vector<Scene> window_scenes(const TrajectoryTable& table,
                                 const WindowOptions& options);

/// Lays scenes end to end in time (scene k starts at frame k * length,
/// ticks spaced by `frame_step`) with pedestrian ids offset per scene, so
/// the result is a valid table.
TrajectoryTable scenes_to_table(std::span<const Scene> scenes,
                                long frame_step = 10);

/// Every regular file with extension .txt in `dir` (sorted by name).
std::vector<std::filesystem::path> dataset_files(
    const std::filesystem::path& dir);

}  // namespace mesrnn::data
