// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include "mesrnn/checkpoint.hpp"
#include "mesrnn/error.hpp"

namespace mesrnn::data {
namespace {

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

// Integer fields also accept integral decimals such as "780.0", the form
// several public ETH/UCY exports use.
bool parse_integer(std::string_view s, long& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec == std::errc() && ptr == s.data() + s.size()) return true;
  double d = 0.0;
  if (!parse_double(s, d) || d != std::floor(d) || std::abs(d) > 9e15) {
    return false;
  }
  out = static_cast<long>(d);
  return true;
}

}  // namespace

std::vector<long> TrajectoryTable::frames() const {
  std::set<long> unique;
  for (const auto& r : records) unique.insert(r.frame);
  return {unique.begin(), unique.end()};
}

TrajectoryTable parse_table(std::istream& in, std::string_view source,
                            double frame_interval) {
  TrajectoryTable table;
  table.frame_interval = frame_interval;
  std::set<std::pair<long, long>> seen;
  std::string line;
  std::size_t line_no = 0;
  const std::string where(source);

  while (std::getline(in, line)) {
    ++line_no;
    const auto f = fields(line);
    if (f.empty() || f.front().starts_with('#')) continue;
    auto fail = [&](const std::string& why) {
      throw DataError(where + ":" + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 4) {
      fail("expected 4 fields 'frame ped_id x y', found " +
           std::to_string(f.size()));
    }
    TrajectoryRecord r;
    if (!parse_integer(f[0], r.frame)) fail("frame is not an integer");
    if (!parse_integer(f[1], r.ped_id)) fail("ped_id is not an integer");
    if (!parse_double(f[2], r.x) || !parse_double(f[3], r.y)) {
      fail("coordinates are not finite decimals");
    }
    if (!seen.emplace(r.frame, r.ped_id).second) {
      fail("duplicate record for frame " + std::to_string(r.frame) +
           ", pedestrian " + std::to_string(r.ped_id));
    }
    table.records.push_back(r);
  }

  const auto frames = table.frames();
  if (frames.size() >= 2) {
    const long spacing = frames[1] - frames[0];
    for (std::size_t k = 2; k < frames.size(); ++k) {
      if (frames[k] - frames[k - 1] != spacing) {
        throw DataError(where + ": non-uniform frame spacing (" +
                        std::to_string(frames[k - 1]) + " -> " +
                        std::to_string(frames[k]) + ", expected step " +
                        std::to_string(spacing) + ")");
      }
    }
  }
  return table;
}

TrajectoryTable load_table(const std::filesystem::path& path,
                           double frame_interval) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  return parse_table(in, path.string(), frame_interval);
}

void write_table(std::ostream& out, const TrajectoryTable& table) {
  for (const auto& r : table.records) {
    out << r.frame << ' ' << r.ped_id << ' ' << model::format_double(r.x)
        << ' ' << model::format_double(r.y) << '\n';
  }
}

void save_table(const TrajectoryTable& table,
                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file " + path.string());
  write_table(out, table);
}

std::vector<Scene> window_scenes(const TrajectoryTable& table,
                                 const WindowOptions& options) {
  const std::size_t length = options.obs + options.pred;
  if (options.stride == 0) throw ContractError("window stride must be >= 1");
  const auto frames = table.frames();
  std::vector<Scene> scenes;
  if (frames.size() < length) return scenes;

  std::map<long, std::size_t> frame_index;
  for (std::size_t k = 0; k < frames.size(); ++k) frame_index[frames[k]] = k;

  // positions[ped_id][frame index]
  std::map<long, std::map<std::size_t, Vec2>> tracks;
  for (const auto& r : table.records) {
    tracks[r.ped_id][frame_index.at(r.frame)] = Vec2{r.x, r.y};
  }

  for (std::size_t start = 0; start + length <= frames.size();
       start += options.stride) {
    const std::size_t required =
        options.mode == WindowMode::kTraining ? length : options.obs;
    std::vector<long> ids;
    for (const auto& [id, track] : tracks) {
      bool ok = true;
      for (std::size_t k = start; k < start + required && ok; ++k) {
        ok = track.contains(k);
      }
      if (ok) ids.push_back(id);
    }
    if (ids.empty()) continue;

    Scene scene(ids, length, table.frame_interval);
    scene.set_start_frame(frames[start]);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      const auto& track = tracks.at(ids[p]);
      for (std::size_t t = 0; t < length; ++t) {
        if (auto it = track.find(start + t); it != track.end()) {
          scene.set(p, t, it->second);
        }
      }
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

TrajectoryTable scenes_to_table(std::span<const Scene> scenes,
                                long frame_step) {
  TrajectoryTable table;
  if (!scenes.empty()) table.frame_interval = scenes.front().frame_interval();
  long frame_offset = 0;
  long id_offset = 0;
  for (const Scene& s : scenes) {
    long max_id = 0;
    for (std::size_t t = 0; t < s.length(); ++t) {
      for (std::size_t i = 0; i < s.num_peds(); ++i) {
        if (!s.present(i, t)) continue;
        const Vec2 p = s.position(i, t);
        table.records.push_back({(frame_offset + static_cast<long>(t)) *
                                     frame_step,
                                 id_offset + s.ped_ids()[i], p.x, p.y});
      }
    }
    for (long id : s.ped_ids()) max_id = std::max(max_id, id);
    frame_offset += static_cast<long>(s.length());
    id_offset += max_id + 1;
  }
  return table;
}

std::vector<std::filesystem::path> dataset_files(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("dataset directory " + dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mesrnn::data
