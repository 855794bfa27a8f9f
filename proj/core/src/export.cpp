// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/export.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mesrnn/error.hpp"

namespace mesrnn::eval {
namespace {

using nlohmann::json;
using model::format_double;

json point(Vec2 p) { return json::array({p.x, p.y}); }

Vec2 to_point(const json& j) {
  if (!j.is_array() || j.size() != 2) throw DataError("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line) {
  T value{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || p != s.data() + s.size()) {
    if constexpr (std::is_floating_point_v<T>) {
      if (s == "nan") return std::numeric_limits<T>::quiet_NaN();
    }
    throw DataError("metrics csv line " + std::to_string(line) +
                    ": bad number '" + s + "'");
  }
  return value;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string_view to_string(ExportFormat format) {
  switch (format) {
    case ExportFormat::kCsv: return "csv";
    case ExportFormat::kJson: return "json";
    case ExportFormat::kSvg: return "svg";
  }
  throw ContractError("unknown export format");
}

ExportFormat parse_export_format(std::string_view text) {
  if (text == "csv") return ExportFormat::kCsv;
  if (text == "json") return ExportFormat::kJson;
  if (text == "svg") return ExportFormat::kSvg;
  throw ContractError("unknown export format '" + std::string(text) +
                      "' (expected csv, json or svg)");
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.split << ',' << r.variant << ',' << format_double(r.ade_norm)
        << ',' << format_double(r.fde_norm) << ','
        << format_double(r.ade_world) << ',' << format_double(r.fde_world)
        << ',' << r.n_scenes << ',' << r.n_peds << ',' << r.seed << '\n';
  }
}

std::vector<MetricsRow> parse_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader) {
    throw DataError("metrics csv: missing or unexpected header");
  }
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 9) {
      throw DataError("metrics csv line " + std::to_string(lineno) +
                      ": expected 9 fields");
    }
    MetricsRow r;
    r.split = f[0];
    r.variant = f[1];
    r.ade_norm = parse_number<double>(f[2], lineno);
    r.fde_norm = parse_number<double>(f[3], lineno);
    r.ade_world = parse_number<double>(f[4], lineno);
    r.fde_world = parse_number<double>(f[5], lineno);
    r.n_scenes = parse_number<std::size_t>(f[6], lineno);
    r.n_peds = parse_number<std::size_t>(f[7], lineno);
    r.seed = parse_number<std::uint64_t>(f[8], lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_trajectories_csv(std::ostream& out, const PredictionResult& result) {
  out << "scene,ped_id,role,step,x,y\n";
  for (const auto& scene : result.scenes) {
    for (const auto& p : scene.peds) {
      auto row = [&](std::string_view role, std::size_t step, Vec2 v) {
        out << scene.scene_index << ',' << p.ped_id << ',' << role << ','
            << step << ',' << format_double(v.x) << ',' << format_double(v.y)
            << '\n';
      };
      for (std::size_t t = 0; t < p.observed.size(); ++t) {
        row("observed", t, p.observed[t]);
      }
      for (std::size_t t = 0; t < p.truth.size(); ++t) {
        if (p.truth[t]) row("truth", result.obs + t, *p.truth[t]);
      }
      for (std::size_t t = 0; t < p.predicted.size(); ++t) {
        row("predicted", result.obs + t, p.predicted[t]);
      }
    }
  }
}

std::string export_json(const Report& report) {
  const PredictionResult& r = report.prediction;
  json doc;
  doc["variant"] = std::string(model::to_string(r.variant));
  doc["obs"] = r.obs;
  doc["pred"] = r.pred;
  doc["norm"] = {{"min_x", r.norm.min_x},
                 {"max_x", r.norm.max_x},
                 {"min_y", r.norm.min_y},
                 {"max_y", r.norm.max_y}};
  json metrics = json::array();
  for (const auto& m : report.metrics) {
    metrics.push_back({{"split", m.split},
                       {"variant", m.variant},
                       {"ade_norm", m.ade_norm},
                       {"fde_norm", m.fde_norm},
                       {"ade_world", m.ade_world},
                       {"fde_world", m.fde_world},
                       {"n_scenes", m.n_scenes},
                       {"n_peds", m.n_peds},
                       {"seed", m.seed}});
  }
  doc["metrics"] = std::move(metrics);
  json scenes = json::array();
  for (const auto& s : r.scenes) {
    json peds = json::array();
    for (const auto& p : s.peds) {
      json observed = json::array(), predicted = json::array(),
           truth = json::array();
      for (Vec2 v : p.observed) observed.push_back(point(v));
      for (Vec2 v : p.predicted) predicted.push_back(point(v));
      for (const auto& v : p.truth) truth.push_back(v ? point(*v) : json());
      peds.push_back({{"ped_id", p.ped_id},
                      {"observed", std::move(observed)},
                      {"predicted", std::move(predicted)},
                      {"truth", std::move(truth)}});
    }
    scenes.push_back({{"scene_index", s.scene_index},
                      {"start_frame", s.start_frame},
                      {"pedestrians", std::move(peds)}});
  }
  doc["scenes"] = std::move(scenes);
  return doc.dump(1) + "\n";
}

Report import_json(std::string_view text) {
  Report report;
  try {
    const json doc = json::parse(text);
    PredictionResult& r = report.prediction;
    r.variant = model::parse_variant(doc.at("variant").get<std::string>());
    r.obs = doc.at("obs").get<std::size_t>();
    r.pred = doc.at("pred").get<std::size_t>();
    const json& n = doc.at("norm");
    r.norm = {n.at("min_x").get<double>(), n.at("max_x").get<double>(),
              n.at("min_y").get<double>(), n.at("max_y").get<double>()};
    for (const json& m : doc.at("metrics")) {
      report.metrics.push_back(
          {m.at("split").get<std::string>(), m.at("variant").get<std::string>(),
           m.at("ade_norm").get<double>(), m.at("fde_norm").get<double>(),
           m.at("ade_world").get<double>(), m.at("fde_world").get<double>(),
           m.at("n_scenes").get<std::size_t>(), m.at("n_peds").get<std::size_t>(),
           m.at("seed").get<std::uint64_t>()});
    }
    for (const json& s : doc.at("scenes")) {
      ScenePrediction scene;
      scene.scene_index = s.at("scene_index").get<std::size_t>();
      scene.start_frame = s.at("start_frame").get<long>();
      for (const json& p : s.at("pedestrians")) {
        PedestrianPrediction ped;
        ped.ped_id = p.at("ped_id").get<long>();
        for (const json& v : p.at("observed")) ped.observed.push_back(to_point(v));
        for (const json& v : p.at("predicted")) ped.predicted.push_back(to_point(v));
        for (const json& v : p.at("truth")) {
          ped.truth.push_back(v.is_null() ? std::nullopt
                                          : std::optional<Vec2>(to_point(v)));
        }
        scene.peds.push_back(std::move(ped));
      }
      r.scenes.push_back(std::move(scene));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report json: ") + e.what());
  } catch (const ContractError& e) {
    throw DataError(std::string("malformed report json: ") + e.what());
  }
  return report;
}

void write_svg(std::ostream& out, const PredictionResult& result) {
  constexpr double kPanel = 360.0;
  constexpr double kMargin = 20.0;
  constexpr std::size_t kColumns = 3;
  const std::size_t n = result.scenes.size();
  const std::size_t cols = std::max<std::size_t>(1, std::min(n, kColumns));
  const std::size_t rows = (n + cols - 1) / cols;
  const double width = static_cast<double>(cols) * kPanel;
  const double height = std::max(1.0, static_cast<double>(rows)) * kPanel;

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";

  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#9467bd", "#ff7f0e", "#8c564b",
                                            "#e377c2", "#17becf"};
  for (std::size_t k = 0; k < n; ++k) {
    const ScenePrediction& scene = result.scenes[k];
    double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
    double hi_x = -lo_x, hi_y = -lo_x;
    auto grow = [&](Vec2 v) {
      lo_x = std::min(lo_x, v.x);
      hi_x = std::max(hi_x, v.x);
      lo_y = std::min(lo_y, v.y);
      hi_y = std::max(hi_y, v.y);
    };
    for (const auto& p : scene.peds) {
      for (Vec2 v : p.observed) grow(v);
      for (Vec2 v : p.predicted) grow(v);
      for (const auto& v : p.truth) {
        if (v) grow(*v);
      }
    }
    if (!std::isfinite(lo_x)) lo_x = hi_x = lo_y = hi_y = 0.0;
    // One scale for both axes keeps the drawing to scale.
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
    const double scale = (kPanel - 2 * kMargin) / span;
    auto px = [&](Vec2 v) {
      std::ostringstream s;
      s << kMargin + (v.x - lo_x) * scale << ','
        << kPanel - kMargin - (v.y - lo_y) * scale;
      return s.str();
    };

    out << "<g class=\"scene\" data-scene=\"" << scene.scene_index
        << "\" transform=\"translate(" << static_cast<double>(k % cols) * kPanel
        << ',' << static_cast<double>(k / cols) * kPanel << ")\">\n"
        << "<rect width=\"" << kPanel << "\" height=\"" << kPanel
        << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
    for (std::size_t i = 0; i < scene.peds.size(); ++i) {
      const PedestrianPrediction& p = scene.peds[i];
      const char* color = kColors[i % std::size(kColors)];
      auto group = [&](std::string_view role, std::string_view style,
                       const std::vector<Vec2>& points, bool markers) {
        out << "<g class=\"track\" data-ped=\"" << p.ped_id << "\" data-role=\""
            << role << "\">";
        if (!points.empty()) {
          out << "<polyline fill=\"none\" stroke=\"" << color << "\" " << style
              << " points=\"";
          for (std::size_t t = 0; t < points.size(); ++t) {
            out << (t ? " " : "") << px(points[t]);
          }
          out << "\"/>";
          if (markers) {
            for (Vec2 v : points) {
              const auto xy = px(v);
              const auto comma = xy.find(',');
              out << "<circle cx=\"" << xy.substr(0, comma) << "\" cy=\""
                  << xy.substr(comma + 1) << "\" r=\"2.5\" fill=\"" << color
                  << "\"/>";
            }
          }
        }
        out << "</g>\n";
      };
      std::vector<Vec2> truth;
      if (!p.observed.empty()) truth.push_back(p.observed.back());
      for (const auto& v : p.truth) {
        if (v) truth.push_back(*v);
      }
      if (truth.size() < 2) truth.clear();
      std::vector<Vec2> predicted;
      if (!p.observed.empty()) predicted.push_back(p.observed.back());
      predicted.insert(predicted.end(), p.predicted.begin(), p.predicted.end());
      group("observed", "stroke-width=\"2\"", p.observed, false);
      group("truth", "stroke-width=\"1.5\" stroke-dasharray=\"5,4\"", truth,
            false);
      group("predicted", "stroke-width=\"1\"", predicted, true);
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
}

void export_report(const Report& report, ExportFormat format,
                   const std::filesystem::path& path) {
  switch (format) {
    case ExportFormat::kCsv: {
      auto out = open_out(path);
      write_trajectories_csv(out, report.prediction);
      finish(out, path);
      std::filesystem::path metrics = path;
      metrics.replace_filename(path.stem().string() + "_metrics.csv");
      auto m = open_out(metrics);
      write_metrics_csv(m, report.metrics);
      finish(m, metrics);
      return;
    }
    case ExportFormat::kJson: {
      auto out = open_out(path);
      out << export_json(report);
      finish(out, path);
      return;
    }
    case ExportFormat::kSvg: {
      auto out = open_out(path);
      write_svg(out, report.prediction);
      finish(out, path);
      return;
    }
  }
}

}  // namespace mesrnn::eval
