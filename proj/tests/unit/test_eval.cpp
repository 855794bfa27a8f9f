// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mesrnn/error.hpp"
#include "mesrnn/eval.hpp"
#include "mesrnn/export.hpp"
#include "mesrnn/synth.hpp"

using namespace mesrnn;
using namespace mesrnn::eval;

namespace {

model::ModelDims tiny_dims() {
  model::ModelDims d;
  d.edge_embed = 4;
  d.edge_hidden = 6;
  d.node_embed = 6;
  d.node_hidden = 8;
  d.vlstm_embed = 4;
  d.vlstm_hidden = 6;
  return d;
}

model::Checkpoint make_checkpoint(model::Variant v, std::uint64_t seed,
                                  model::InitScheme init = model::InitScheme::kGlorot) {
  return {model::init_params(v, seed, tiny_dims(), init), {-4.0, 6.0, -3.0, 5.0}, {}};
}

Scene walking_scene(std::mt19937_64& rng, std::size_t n, std::size_t len) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<long> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<long>(10 + i);
  Scene s(ids, len);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 start{u(rng), u(rng)};
    const Vec2 v{0.1 * u(rng), 0.1 * u(rng)};
    for (std::size_t t = 0; t < len; ++t) s.set(i, t, start + v * double(t));
  }
  return s;
}

double dist(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Metrics, HalfUnitOffset) {
  const std::vector<std::vector<Vec2>> pred = {{{0, 0}, {1, 0}}};
  const std::vector<std::vector<Vec2>> truth = {{{0, 0.5}, {1, 0.5}}};
  EXPECT_DOUBLE_EQ(ade(pred, truth), 0.5);
  EXPECT_DOUBLE_EQ(fde(pred, truth), 0.5);
}

TEST(Metrics, SingleErrorAmongTwelve) {
  // Two pedestrians, six steps, one unit error at ped 1 step 2.
  std::vector<std::vector<Vec2>> pred(2, std::vector<Vec2>(6));
  auto truth = pred;
  truth[1][2] = {0.6, 0.8};
  EXPECT_DOUBLE_EQ(ade(pred, truth), 1.0 / 12.0);
  EXPECT_DOUBLE_EQ(fde(pred, truth), 0.0);
}

TEST(Metrics, MatchLoopOracle) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t peds = 1 + rep % 5, steps = 1 + rep % 12;
    std::vector<std::vector<Vec2>> a(peds), b(peds);
    double sum = 0.0, last = 0.0;
    for (std::size_t i = 0; i < peds; ++i) {
      for (std::size_t t = 0; t < steps; ++t) {
        a[i].push_back({n(rng), n(rng)});
        b[i].push_back({n(rng), n(rng)});
        const double dx = a[i][t].x - b[i][t].x, dy = a[i][t].y - b[i][t].y;
        sum += std::sqrt(dx * dx + dy * dy);
        if (t + 1 == steps) last += std::sqrt(dx * dx + dy * dy);
      }
    }
    EXPECT_NEAR(ade(a, b), sum / double(peds * steps), 1e-12);
    EXPECT_NEAR(fde(a, b), last / double(peds), 1e-12);
  }
}

TEST(Metrics, TranslationInvariant) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<Vec2>> a(3), b(3), a2(3), b2(3);
  const Vec2 shift{123.0, -45.5};
  for (std::size_t i = 0; i < 3; ++i) {
    for (int t = 0; t < 12; ++t) {
      a[i].push_back({n(rng), n(rng)});
      b[i].push_back({n(rng), n(rng)});
      a2[i].push_back(a[i].back() + shift);
      b2[i].push_back(b[i].back() + shift);
    }
  }
  EXPECT_NEAR(ade(a, b), ade(a2, b2), 1e-12);
  EXPECT_NEAR(fde(a, b), fde(a2, b2), 1e-12);
}

TEST(Metrics, MisalignedInputs) {
  const std::vector<std::vector<Vec2>> one = {{{0, 0}, {1, 1}}};
  const std::vector<std::vector<Vec2>> short_one = {{{0, 0}}};
  const std::vector<std::vector<Vec2>> none;
  EXPECT_THROW(ade(one, short_one), DimensionError);
  EXPECT_THROW(fde(none, none), DimensionError);
}

TEST(Rollout, ZeroModelFreezesPositions) {
  const auto ck = make_checkpoint(model::Variant::kMesrnn, 0, model::InitScheme::kZero);
  std::mt19937_64 rng(23);
  const Scene s = walking_scene(rng, 3, 10);
  const ScenePrediction p = rollout(ck, s, 4, 6);
  ASSERT_EQ(p.peds.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_EQ(p.peds[i].predicted.size(), 6u);
    for (const Vec2& q : p.peds[i].predicted) {
      EXPECT_NEAR(dist(q, s.position(i, 3)), 0.0, 1e-12);
    }
    EXPECT_EQ(p.peds[i].ped_id, s.ped_ids()[i]);
    EXPECT_TRUE(p.peds[i].evaluable());
  }
}

TEST(Rollout, FirstStepMatchesTeacherForcing) {
  const auto ck = make_checkpoint(model::Variant::kMesrnn, 1);
  std::mt19937_64 rng(24);
  const Scene s = walking_scene(rng, 3, 9);
  const std::size_t obs = 5, pred = 4;
  const ScenePrediction roll = rollout(ck, s, obs, pred);

  // Teacher-forced unroll over the normalized truth.
  const Scene norm = train::normalize_scene(ck.norm, s);
  ad::Tape tape;
  const auto bound = model::bind(tape, ck.params);
  model::Dropout off;
  auto state = model::initial_state(tape, bound, 3);
  std::vector<ad::Tensor> outs;
  for (std::size_t t = 0; t + 1 < obs + pred; ++t) {
    auto out = model::model_step(tape, bound, norm, t, state, off);
    state = out.state;
    outs.push_back(tape.value(out.next_positions));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const Vec2 tf = train::minmax_invert(ck.norm, {outs[obs - 1].at(i, 0), outs[obs - 1].at(i, 1)});
    EXPECT_EQ(roll.peds[i].predicted[0], tf);
    // Later steps read believed rather than true positions.
    const Vec2 tf2 = train::minmax_invert(ck.norm, {outs[obs].at(i, 0), outs[obs].at(i, 1)});
    EXPECT_NE(roll.peds[i].predicted[1], tf2);
  }
}

TEST(Rollout, ClosedLoopIgnoresFutureTruth) {
  const auto ck = make_checkpoint(model::Variant::kMesrnn, 2);
  std::mt19937_64 rng(25);
  const Scene s = walking_scene(rng, 4, 12);
  Scene corrupted = s;
  for (std::size_t i = 0; i < 4; ++i) corrupted.set(i, 4 + 3, {99.0, -99.0});
  corrupted.clear(2, 9);
  const ScenePrediction a = rollout(ck, s, 4, 8);
  const ScenePrediction b = rollout(ck, corrupted, 4, 8);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.peds[i].predicted, b.peds[i].predicted);
  }
  EXPECT_FALSE(b.peds[2].evaluable());
  EXPECT_TRUE(b.peds[1].evaluable());
}

TEST(Rollout, ShortOrIncompleteScenes) {
  const auto ck = make_checkpoint(model::Variant::kVlstm, 3);
  std::mt19937_64 rng(26);
  Scene s = walking_scene(rng, 2, 8);
  EXPECT_THROW(rollout(ck, s, 9, 2), DataError);
  // Shorter than obs + pred: truth is unknown past the end.
  const ScenePrediction p = rollout(ck, s, 6, 4);
  EXPECT_EQ(p.peds[0].predicted.size(), 4u);
  EXPECT_TRUE(p.peds[0].truth[1].has_value());
  EXPECT_FALSE(p.peds[0].truth[2].has_value());
  s.clear(1, 2);
  try {
    rollout(ck, s, 6, 4);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("pedestrian 11"), std::string::npos) << e.what();
  }
  EXPECT_THROW(rollout(ck, s, 0, 4), ContractError);
}

TEST(Predict, WorkersAgreeWithSerial) {
  const auto ck = make_checkpoint(model::Variant::kSrnn, 4);
  std::mt19937_64 rng(27);
  std::vector<Scene> scenes;
  for (int k = 0; k < 5; ++k) scenes.push_back(walking_scene(rng, 3, 8));
  const PredictionResult a = predict(ck, scenes, 4, 4, 1);
  const PredictionResult b = predict(ck, scenes, 4, 4, 3);
  ASSERT_EQ(a.scenes.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(b.scenes[k].scene_index, k);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(a.scenes[k].peds[i].predicted, b.scenes[k].peds[i].predicted);
    }
  }
  EXPECT_EQ(score(a, "x", 0), score(b, "x", 0));
}

TEST(Score, PoolsEvaluablePedestrians) {
  PredictionResult r;
  r.norm = {0.0, 10.0, 0.0, 10.0};
  ScenePrediction sp;
  PedestrianPrediction good;
  good.predicted = {{0, 0}, {0, 0}};
  good.truth = {Vec2{3, 4}, Vec2{0, 1}};
  PedestrianPrediction partial = good;
  partial.truth[1].reset();
  sp.peds = {good, partial};
  r.scenes = {sp};
  const MetricsRow row = score(r, "s", 7);
  EXPECT_EQ(row.n_peds, 1u);
  EXPECT_EQ(row.n_scenes, 1u);
  EXPECT_DOUBLE_EQ(row.ade_world, 3.0);
  EXPECT_DOUBLE_EQ(row.fde_world, 1.0);
  // The map halves 10-unit spans onto [-1, 1] width 2: a factor of 0.2.
  EXPECT_NEAR(row.ade_norm, 0.6, 1e-12);
  EXPECT_NEAR(row.fde_norm, 0.2, 1e-12);
  r.scenes[0].peds = {partial};
  EXPECT_THROW(score(r, "s", 7), DataError);
}

TEST(Score, AverageRow) {
  MetricsRow a{"a", "mesrnn", 1, 2, 3, 4, 5, 6, 9};
  MetricsRow b{"b", "mesrnn", 3, 4, 5, 6, 1, 2, 9};
  const MetricsRow rows[] = {a, b};
  const MetricsRow avg = average_row(rows);
  EXPECT_EQ(avg, (MetricsRow{"average", "mesrnn", 2, 3, 4, 5, 6, 8, 9}));
}

TEST(LeaveOneOut, ThreeRowsAndClean) {
  const std::size_t obs = 3, pred = 3;
  std::vector<NamedSplit> splits;
  for (auto name : {"crossing", "overtaking"}) {
    data::SynthSpec spec = data::parse_synth_spec(std::string(name) + ":n=3,scenes=4,length=6");
    splits.push_back({name, data::synth_generate(spec)});
  }
  train::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.obs = obs;
  cfg.pred = pred;
  cfg.dims = tiny_dims();
  const LooReport a = leave_one_out(splits, cfg, model::Variant::kSrnn);
  const LooReport b = leave_one_out(splits, cfg, model::Variant::kSrnn);
  ASSERT_EQ(a.rows.size(), 3u);
  EXPECT_EQ(a.rows[0].split, "crossing");
  EXPECT_EQ(a.rows[2].split, "average");
  EXPECT_NEAR(a.rows[2].ade_world, 0.5 * (a.rows[0].ade_world + a.rows[1].ade_world), 1e-15);
  EXPECT_NEAR(a.rows[2].fde_norm, 0.5 * (a.rows[0].fde_norm + a.rows[1].fde_norm), 1e-15);
  EXPECT_EQ(a.rows, b.rows);
  ASSERT_EQ(a.hygiene.size(), 2u);
  for (const auto& h : a.hygiene) {
    EXPECT_EQ(h.leaked, 0u);
    EXPECT_EQ(h.held_out_scenes, 4u);
    EXPECT_GT(h.train_scenes, 0u);
  }
  const std::vector<NamedSplit> one(splits.begin(), splits.begin() + 1);
  EXPECT_THROW(leave_one_out(one, cfg, model::Variant::kSrnn), DataError);
}

TEST(Export, JsonRoundTripIsExact) {
  const auto ck = make_checkpoint(model::Variant::kVlstm, 5);
  std::mt19937_64 rng(28);
  std::vector<Scene> scenes = {walking_scene(rng, 2, 8), walking_scene(rng, 3, 7)};
  Report rep;
  rep.prediction = predict(ck, scenes, 4, 4);
  rep.metrics = {score(rep.prediction, "demo", 3)};
  const std::string text = export_json(rep);
  const Report back = import_json(text);
  EXPECT_EQ(back.metrics, rep.metrics);
  EXPECT_EQ(back.prediction.norm, rep.prediction.norm);
  EXPECT_EQ(back.prediction.variant, rep.prediction.variant);
  ASSERT_EQ(back.prediction.scenes.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& x = rep.prediction.scenes[k];
    const auto& y = back.prediction.scenes[k];
    ASSERT_EQ(x.peds.size(), y.peds.size());
    for (std::size_t i = 0; i < x.peds.size(); ++i) {
      EXPECT_EQ(x.peds[i].observed, y.peds[i].observed);
      EXPECT_EQ(x.peds[i].predicted, y.peds[i].predicted);
      EXPECT_EQ(x.peds[i].truth, y.peds[i].truth);
    }
  }
  EXPECT_EQ(export_json(back), text);
  EXPECT_THROW(import_json("{\"variant\": 3"), DataError);
}

TEST(Export, EmptyResult) {
  Report rep;
  const Report back = import_json(export_json(rep));
  EXPECT_TRUE(back.prediction.scenes.empty());
  std::ostringstream csv;
  write_trajectories_csv(csv, rep.prediction);
  EXPECT_EQ(csv.str(), "scene,ped_id,role,step,x,y\n");
  std::ostringstream svg;
  write_svg(svg, rep.prediction);
  EXPECT_NE(svg.str().find("</svg>"), std::string::npos);
}

TEST(Export, MetricsCsvRoundTrip) {
  const MetricsRow rows[] = {{"eth", "mesrnn", 0.1, 0.2, 0.30000000000000004, 1.5, 3, 9, 42}};
  std::ostringstream out;
  write_metrics_csv(out, rows);
  EXPECT_EQ(out.str().substr(0, kMetricsCsvHeader.size()), kMetricsCsvHeader);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_metrics_csv(in), std::vector<MetricsRow>(std::begin(rows), std::end(rows)));
  std::istringstream bad("split,foo\n");
  EXPECT_THROW(parse_metrics_csv(bad), DataError);
}

TEST(Export, TrajectoryCsvRows) {
  const auto ck = make_checkpoint(model::Variant::kVlstm, 6);
  std::mt19937_64 rng(29);
  const std::vector<Scene> scenes = {walking_scene(rng, 2, 8)};
  const PredictionResult r = predict(ck, scenes, 3, 5);
  std::ostringstream out;
  write_trajectories_csv(out, r);
  const std::string text = out.str();
  // 2 pedestrians x (3 observed + 5 truth + 5 predicted) rows plus header.
  EXPECT_EQ(count_of(text, "\n"), 1u + 2u * 13u);
  EXPECT_EQ(count_of(text, ",predicted,"), 10u);
}

TEST(Export, SvgGroupsPerPedestrian) {
  const auto ck = make_checkpoint(model::Variant::kMesrnn, 7);
  std::mt19937_64 rng(30);
  const std::vector<Scene> scenes = {walking_scene(rng, 3, 8), walking_scene(rng, 2, 8)};
  const PredictionResult r = predict(ck, scenes, 4, 4);
  std::ostringstream out;
  write_svg(out, r);
  const std::string svg = out.str();
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.rfind("<?xml", 0) == 0, true);
  EXPECT_EQ(count_of(svg, "<g class=\"scene\""), 2u);
  EXPECT_EQ(count_of(svg, "<g class=\"track\""), 15u);
  for (auto role : {"observed", "truth", "predicted"}) {
    EXPECT_EQ(count_of(svg, std::string("data-role=\"") + role + "\""), 5u) << role;
  }
  EXPECT_EQ(count_of(svg, "<g"), count_of(svg, "</g>"));
}

TEST(Export, UnwritablePath) {
  Report rep;
  EXPECT_THROW(export_report(rep, ExportFormat::kJson, "/nonexistent/dir/out.json"), DataError);
  EXPECT_EQ(parse_export_format("svg"), ExportFormat::kSvg);
  EXPECT_THROW(parse_export_format("png"), ContractError);
}

TEST(Export, CsvWritesMetricsSibling) {
  const auto ck = make_checkpoint(model::Variant::kVlstm, 8);
  std::mt19937_64 rng(31);
  const std::vector<Scene> scenes = {walking_scene(rng, 2, 8)};
  Report rep;
  rep.prediction = predict(ck, scenes, 4, 4);
  rep.metrics = {score(rep.prediction, "x", 0)};
  const auto dir = std::filesystem::temp_directory_path() / "mesrnn_export_csv";
  std::filesystem::create_directories(dir);
  export_report(rep, ExportFormat::kCsv, dir / "traj.csv");
  EXPECT_TRUE(std::filesystem::exists(dir / "traj.csv"));
  std::ifstream in(dir / "traj_metrics.csv");
  EXPECT_EQ(parse_metrics_csv(in), rep.metrics);
  std::filesystem::remove_all(dir);
}
