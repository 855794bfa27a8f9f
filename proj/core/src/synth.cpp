// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/synth.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mesrnn/checkpoint.hpp"
#include "mesrnn/error.hpp"

namespace mesrnn::data {
namespace {

struct Walker {
  Vec2 start;
  Vec2 velocity;
};

Vec2 perpendicular(Vec2 v) { return {-v.y, v.x}; }

std::vector<Walker> layout(const SynthSpec& spec, std::mt19937_64& rng) {
  const std::size_t n = spec.pedestrians;
  const double mid = static_cast<double>(spec.length / 2);
  std::uniform_real_distribution<double> speed(spec.speed_min, spec.speed_max);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Walker> out(n);

  switch (spec.scenario) {
    case Scenario::kCrossing: {
      // Two columns on perpendicular courses; both leaders reach the origin
      // at the middle step.
      const std::size_t group_a = (n + 1) / 2;
      for (std::size_t i = 0; i < n; ++i) {
        const bool in_a = i < group_a;
        const std::size_t g = in_a ? i : i - group_a;
        const Vec2 dir = in_a ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
        const double s = speed(rng);
        const double lateral = g == 0 ? 0.0 : 0.4 * unit(rng);
        out[i].velocity = dir * s;
        out[i].start = dir * -(s * mid + 0.8 * static_cast<double>(g)) +
                       perpendicular(dir) * lateral;
      }
      break;
    }
    case Scenario::kOvertaking: {
      // Pairs on parallel lanes; the fast walker draws level with the slow
      // one at the middle step.
      const double split = 0.5 * (spec.speed_min + spec.speed_max);
      std::uniform_real_distribution<double> slow(spec.speed_min, split);
      std::uniform_real_distribution<double> fast(split, spec.speed_max);
      for (std::size_t i = 0; i < n; ++i) {
        const double lane = 2.0 * static_cast<double>(i / 2);
        if (i % 2 == 0) {
          const double s = slow(rng);
          out[i] = {{-s * mid, lane}, {s, 0.0}};
        } else {
          const double s = fast(rng);
          out[i] = {{-s * mid, lane + 0.25}, {s, 0.0}};
        }
      }
      break;
    }
    case Scenario::kParallelGroup: {
      const double s = speed(rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double own = s * (1.0 + 0.05 * unit(rng));
        out[i] = {{-own * mid + 0.3 * unit(rng), 0.7 * static_cast<double>(i)},
                  {own, 0.0}};
      }
      break;
    }
    case Scenario::kStationaryMix: {
      const std::size_t still = n / 2;
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < n; ++i) {
        if (i < still) {
          out[i] = {{2.0 * unit(rng), 2.0 * unit(rng)}, {0.0, 0.0}};
        } else {
          const double a = angle(rng);
          const Vec2 dir{std::cos(a), std::sin(a)};
          const double s = speed(rng);
          out[i] = {dir * (-s * mid) + perpendicular(dir) * (1.5 * unit(rng)),
                    dir * s};
        }
      }
      break;
    }
  }
  return out;
}

Vec2 repulsion_on(std::size_t i, const std::vector<Vec2>& pos,
                  const SynthSpec& spec) {
  Vec2 total;
  for (std::size_t j = 0; j < pos.size(); ++j) {
    if (j == i) continue;
    Vec2 d = pos[i] - pos[j];
    double dist = d.norm();
    if (dist < 1e-12) {
      // Coincident: push the lower index one way and the other back.
      d = i < j ? Vec2{1.0, 0.0} : Vec2{-1.0, 0.0};
      dist = 1.0;
    }
    const double mag = spec.repulsion * std::exp(-d.norm() / spec.repulsion_range);
    total += d * (mag / dist);
  }
  const double norm = total.norm();
  if (norm > spec.repulsion) total = total * (spec.repulsion / norm);
  return total;
}

void validate(const SynthSpec& s) {
  auto bad = [](const std::string& why) {
    throw ContractError("invalid synthetic spec: " + why);
  };
  if (s.pedestrians < 1) bad("pedestrian count must be >= 1");
  if (s.scenes < 1) bad("scene count must be >= 1");
  if (s.length < 3) bad("length must be >= 3");
  if (!(s.speed_min >= 0.0) || !(s.speed_max >= s.speed_min)) {
    bad("speed range must satisfy 0 <= speed_min <= speed_max");
  }
  if (!(s.noise >= 0.0)) bad("noise must be >= 0");
  if (!(s.repulsion >= 0.0)) bad("repulsion must be >= 0");
  if (!(s.repulsion_range > 0.0)) bad("repulsion range must be > 0");
  if (!(s.frame_interval > 0.0)) bad("frame interval must be > 0");
}

}  // namespace

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::kCrossing: return "crossing";
    case Scenario::kOvertaking: return "overtaking";
    case Scenario::kParallelGroup: return "parallel_group";
    case Scenario::kStationaryMix: return "stationary_mix";
  }
  throw ContractError("unknown scenario");
}

Scenario parse_scenario(std::string_view text) {
  if (text == "crossing") return Scenario::kCrossing;
  if (text == "overtaking") return Scenario::kOvertaking;
  if (text == "parallel_group") return Scenario::kParallelGroup;
  if (text == "stationary_mix") return Scenario::kStationaryMix;
  throw ContractError("unknown scenario '" + std::string(text) + "'");
}

SynthSpec parse_synth_spec(std::string_view text) {
  SynthSpec spec;
  const auto colon = text.find(':');
  spec.scenario = parse_scenario(text.substr(0, colon));
  if (colon == std::string_view::npos) return spec;

  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{}
                                           : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ContractError("synthetic spec item '" + std::string(item) +
                          "' is not key=value");
    }
    const std::string_view key = item.substr(0, eq);
    const std::string_view val = item.substr(eq + 1);
    auto as_size = [&]() {
      std::size_t v = 0;
      const auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
      if (ec != std::errc() || p != val.data() + val.size()) {
        throw ContractError("synthetic spec: '" + std::string(key) +
                            "' needs a non-negative integer");
      }
      return v;
    };
    auto as_double = [&]() {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
      if (ec != std::errc() || p != val.data() + val.size()) {
        throw ContractError("synthetic spec: '" + std::string(key) +
                            "' needs a number");
      }
      return v;
    };
    if (key == "n" || key == "pedestrians") spec.pedestrians = as_size();
    else if (key == "scenes") spec.scenes = as_size();
    else if (key == "seed") spec.seed = as_size();
    else if (key == "length") spec.length = as_size();
    else if (key == "noise") spec.noise = as_double();
    else if (key == "repulsion") spec.repulsion = as_double();
    else if (key == "range") spec.repulsion_range = as_double();
    else if (key == "speed_min") spec.speed_min = as_double();
    else if (key == "speed_max") spec.speed_max = as_double();
    else if (key == "pose") spec.randomize_pose = as_size() != 0;
    else {
      throw ContractError("synthetic spec: unknown key '" + std::string(key) +
                          "'");
    }
  }
  validate(spec);
  return spec;
}

std::string format_synth_spec(const SynthSpec& s) {
  std::ostringstream out;
  out << to_string(s.scenario) << ":n=" << s.pedestrians
      << ",scenes=" << s.scenes << ",seed=" << s.seed
      << ",length=" << s.length
      << ",noise=" << model::format_double(s.noise)
      << ",repulsion=" << model::format_double(s.repulsion)
      << ",range=" << model::format_double(s.repulsion_range)
      << ",speed_min=" << model::format_double(s.speed_min)
      << ",speed_max=" << model::format_double(s.speed_max)
      << ",pose=" << (s.randomize_pose ? 1 : 0);
  return out.str();
}

std::vector<Scene> synth_generate(const SynthSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);

  std::vector<long> ids(spec.pedestrians);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<long>(i);

  std::vector<Scene> scenes;
  for (std::size_t k = 0; k < spec.scenes; ++k) {
    const auto walkers = layout(spec, rng);
    const std::size_t n = walkers.size();
    std::vector<std::vector<Vec2>> track(n, std::vector<Vec2>(spec.length));
    std::vector<Vec2> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = track[i][0] = walkers[i].start;

    for (std::size_t t = 1; t < spec.length; ++t) {
      std::vector<Vec2> next(n);
      for (std::size_t i = 0; i < n; ++i) {
        next[i] = pos[i] + walkers[i].velocity;
        if (spec.repulsion > 0.0) next[i] += repulsion_on(i, pos, spec);
        if (spec.noise > 0.0) {
          next[i] += Vec2{jitter(rng), jitter(rng)} * spec.noise;
        }
      }
      pos = next;
      for (std::size_t i = 0; i < n; ++i) track[i][t] = pos[i];
    }

    double c = 1.0, s = 0.0;
    Vec2 offset;
    if (spec.randomize_pose) {
      const double a = angle(rng);
      c = std::cos(a);
      s = std::sin(a);
      offset = {shift(rng), shift(rng)};
    }
    Scene scene(ids, spec.length, spec.frame_interval);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < spec.length; ++t) {
        const Vec2 p = track[i][t];
        scene.set(i, t, Vec2{c * p.x - s * p.y, s * p.x + c * p.y} + offset);
      }
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace mesrnn::data
