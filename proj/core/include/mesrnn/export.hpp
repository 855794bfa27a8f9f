// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mesrnn/eval.hpp"

namespace mesrnn::eval {

enum class ExportFormat { kCsv, kJson, kSvg };

std::string_view to_string(ExportFormat format);
ExportFormat parse_export_format(std::string_view text);

inline constexpr std::string_view kMetricsCsvHeader =
    "split,variant,ade_norm,fde_norm,ade_world,fde_world,n_scenes,n_peds,seed";

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);
/// Reads what write_metrics_csv wrote. Throws DataError on a bad header or
/// row.
std::vector<MetricsRow> parse_metrics_csv(std::istream& in);

/// `scene,ped_id,role,step,x,y` with role observed | truth | predicted and
/// steps counted from the start of the scene.
void write_trajectories_csv(std::ostream& out, const PredictionResult& result);

struct Report {
  PredictionResult prediction;
  std::vector<MetricsRow> metrics;
};

/// Metrics table plus every trajectory, doubles written to round-trip.
std::string export_json(const Report& report);
/// Throws DataError on malformed documents.
Report import_json(std::string_view text);

/// One panel per scene drawn to scale: observed polylines solid, truth
/// dashed, predictions with circle markers. Each pedestrian gets one
/// <g class="track" data-role=...> per role.
void write_svg(std::ostream& out, const PredictionResult& result);

/// Writes `path` in the requested format. CSV also writes the metrics
/// table next to it as <stem>_metrics.csv. Throws DataError when a file
/// cannot be written.
void export_report(const Report& report, ExportFormat format,
                   const std::filesystem::path& path);

}  // namespace mesrnn::eval
