// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mesrnn/checkpoint.hpp"
#include "mesrnn/error.hpp"
#include "mesrnn/model.hpp"

using namespace mesrnn;
using namespace mesrnn::model;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

// Closed-form counts from the dimension table.
std::size_t embedder_count(std::size_t in, std::size_t out) { return in * out + out; }
std::size_t lstm_count(std::size_t d, std::size_t h) { return 4 * h * (d + h) + 4 * h; }
std::size_t edge_count(std::size_t d_in) { return embedder_count(d_in, 64) + lstm_count(64, 128); }
std::size_t node_count(std::size_t d) {
  return embedder_count(2, 128) + lstm_count(d, 256) + embedder_count(256, 2);
}

Scene random_scene(std::mt19937_64& rng, std::size_t n, std::size_t len) {
  std::uniform_real_distribution<double> c(-0.9, 0.9);
  std::vector<long> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<long>(i);
  Scene s(ids, len);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < len; ++t) s.set(i, t, {c(rng), c(rng)});
  }
  return s;
}

/// Runs the model over steps 0..len-2 and returns every prediction.
std::vector<Tensor> unroll(const ModelParams& params, const Scene& s) {
  Tape tape;
  const BoundModel m = bind(tape, params);
  Dropout off;
  ModelState state = initial_state(tape, m, s.num_peds());
  std::vector<Tensor> out;
  for (std::size_t t = 0; t + 1 < s.length(); ++t) {
    StepOutput step = model_step(tape, m, s, t, state, off);
    state = step.state;
    out.push_back(tape.value(step.next_positions));
  }
  return out;
}

ad::Tensor as_row(const Tensor& t) {
  return Tensor({1, t.size()}, std::vector<double>(t.data().begin(), t.data().end()));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "mesrnn_test_model";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(ParamCount, ClosedForm) {
  EXPECT_EQ(edge_count(2), 99008u);
  EXPECT_EQ(edge_count(4), 99136u);
  const std::size_t mesrnn = 2 * edge_count(2) + 4 * edge_count(4) + node_count(896);
  const std::size_t srnn = 2 * edge_count(2) + node_count(384);
  const std::size_t vlstm =
      embedder_count(2, 64) + lstm_count(64, 128) + embedder_count(128, 2);
  EXPECT_EQ(init_params(Variant::kMesrnn, 0).scalar_count(), mesrnn);
  EXPECT_EQ(init_params(Variant::kSrnn, 0).scalar_count(), srnn);
  EXPECT_EQ(init_params(Variant::kVlstm, 0).scalar_count(), vlstm);
  EXPECT_EQ(mesrnn, 1776130u);
  EXPECT_EQ(srnn, 855298u);
  EXPECT_EQ(vlstm, 99266u);
  EXPECT_EQ(node_input_width(Variant::kMesrnn, {}), 896u);
  EXPECT_EQ(node_input_width(Variant::kSrnn, {}), 384u);
}

TEST(ParamCount, IndependentOfCrowdSize) {
  const ModelParams p = init_params(Variant::kMesrnn, 1);
  std::mt19937_64 rng(1);
  for (std::size_t n : {1, 2, 10}) {
    Tape tape;
    const BoundModel m = bind(tape, p);
    Dropout off;
    const Scene s = random_scene(rng, n, 3);
    const ModelState state = initial_state(tape, m, n);
    const StepOutput out = model_step(tape, m, s, 2, state, off);
    EXPECT_EQ(tape.value(out.next_positions).shape(), (ad::Shape{n, 2}));
  }
  EXPECT_EQ(p.scalar_count(), 1776130u);
}

TEST(Init, DeterministicAndSeedDependent) {
  const auto a = init_params(Variant::kMesrnn, 5);
  const auto b = init_params(Variant::kMesrnn, 5);
  const auto c = init_params(Variant::kMesrnn, 6);
  EXPECT_TRUE(a.tensors.identical(b.tensors));
  EXPECT_FALSE(a.tensors.identical(c.tensors));
}

TEST(Init, GlorotBoundsAndForgetBias) {
  const auto p = init_params(Variant::kSrnn, 2);
  for (const auto& [name, t] : p.tensors) {
    if (t.rank() == 2) {
      const double limit = std::sqrt(6.0 / static_cast<double>(t.shape()[0] + t.shape()[1]));
      for (double v : t.data()) ASSERT_LE(std::abs(v), limit) << name;
    } else if (name.ends_with(".cell.bias")) {
      const std::size_t h = t.size() / 4;
      for (std::size_t k = 0; k < t.size(); ++k) {
        EXPECT_EQ(t[k], (k >= h && k < 2 * h) ? 1.0 : 0.0) << name << " " << k;
      }
    } else {
      for (double v : t.data()) EXPECT_EQ(v, 0.0) << name;
    }
  }
}

TEST(Layout, GateBlocksAndNames) {
  const auto layout = parameter_layout(Variant::kMesrnn, {});
  ASSERT_FALSE(layout.empty());
  EXPECT_EQ(layout.front().first, "edge.S.encoder.weight");
  bool found = false;
  for (const auto& [name, shape] : layout) {
    if (name == "node.cell.w_input") {
      found = true;
      EXPECT_EQ(shape, (ad::Shape{1024, 896}));
    }
  }
  EXPECT_TRUE(found);
}

TEST(EdgeRnn, ZeroInputZeroBiasGivesZeroHidden) {
  ModelParams p = init_params(Variant::kMesrnn, 3);
  for (auto& [name, t] : p.tensors) {
    if (t.rank() == 1) t.fill(0.0);
  }
  Tape tape;
  const BoundModel m = bind(tape, p);
  Dropout off;
  const LstmState zero = zero_state(tape, 1, 128);
  const auto st = edge_rnn_step(tape, m.edges[2], as_row(sum_instances({})), zero, off);
  for (double v : tape.value(st.h).data()) EXPECT_EQ(v, 0.0);
  for (double v : tape.value(st.c).data()) EXPECT_EQ(v, 0.0);
}

TEST(EdgeRnn, SumBeforeEmbed) {
  const ModelParams p = init_params(Variant::kMesrnn, 4);
  graph::MetaPathFeature a, b, ab;
  a.value = {1, 0, 0, 0};
  b.value = {0, 1, 0, 0};
  ab.value = {1, 1, 0, 0};
  const std::vector<graph::MetaPathFeature> two = {a, b}, one = {ab}, single = {a};

  Tape tape;
  const BoundModel m = bind(tape, p);
  Dropout off;
  const LstmState zero = zero_state(tape, 1, 128);
  const auto h2 = tape.value(edge_rnn_step(tape, m.edges[2], as_row(sum_instances(two)), zero, off).h);
  const auto h1 = tape.value(edge_rnn_step(tape, m.edges[2], as_row(sum_instances(one)), zero, off).h);
  EXPECT_TRUE(h1.identical(h2));
  const Tensor single_sum = sum_instances(single);
  EXPECT_EQ(single_sum[0], 1.0);
  EXPECT_EQ(single_sum[1], 0.0);
}

TEST(EdgeRnn, WidthMismatch) {
  const ModelParams p = init_params(Variant::kMesrnn, 4);
  Tape tape;
  const BoundModel m = bind(tape, p);
  Dropout off;
  const LstmState zero = zero_state(tape, 1, 128);
  EXPECT_THROW(edge_rnn_step(tape, m.edges[0], Tensor::zeros({1, 4}), zero, off),
               DimensionError);
}

TEST(LstmCell, MatchesHandComputation) {
  // D = 3, H = 2, one row; gate order (input, forget, candidate, output).
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ad::ParamSet ps;
  Tensor wi({8, 3}), wh({8, 2}), b({8});
  for (double& v : wi.data()) v = u(rng);
  for (double& v : wh.data()) v = u(rng);
  for (double& v : b.data()) v = u(rng);
  ps.add("c.w_input", wi);
  ps.add("c.w_hidden", wh);
  ps.add("c.bias", b);
  const Tensor x = Tensor::vector({0.3, -0.7, 0.2});
  const Tensor h0 = Tensor::vector({0.1, -0.4});
  const Tensor c0 = Tensor::vector({0.5, 0.25});

  Tape tape;
  const LstmCell cell = bind_cell(tape, ps, "c");
  const LstmState out =
      cell.step(tape, tape.constant(x), {tape.constant(h0), tape.constant(c0)});

  double gates[8];
  for (int r = 0; r < 8; ++r) {
    gates[r] = b[r];
    for (int k = 0; k < 3; ++k) gates[r] += wi.at(r, k) * x[k];
    for (int k = 0; k < 2; ++k) gates[r] += wh.at(r, k) * h0[k];
  }
  for (int j = 0; j < 2; ++j) {
    const double i = sigmoid(gates[j]), f = sigmoid(gates[2 + j]);
    const double g = std::tanh(gates[4 + j]), o = sigmoid(gates[6 + j]);
    const double c = f * c0[j] + i * g;
    EXPECT_NEAR(tape.value(out.c)[j], c, 1e-12);
    EXPECT_NEAR(tape.value(out.h)[j], o * std::tanh(c), 1e-12);
  }
}

TEST(NodeRnn, ZeroParametersKeepPosition) {
  for (Variant v : {Variant::kMesrnn, Variant::kSrnn, Variant::kVlstm}) {
    const ModelParams p = init_params(v, 0, {}, InitScheme::kZero);
    std::mt19937_64 rng(6);
    const Scene s = random_scene(rng, 3, 5);
    const auto preds = unroll(p, s);
    for (std::size_t t = 0; t < preds.size(); ++t) {
      EXPECT_TRUE(preds[t].identical(positions_at(s, t))) << to_string(v) << " step " << t;
    }
  }
}

TEST(NodeRnn, DisplacementBoundedByTanh) {
  ModelParams p = init_params(Variant::kMesrnn, 7);
  for (auto& [name, t] : p.tensors) {
    for (double& v : t.data()) v *= 20.0;
  }
  std::mt19937_64 rng(7);
  const Scene s = random_scene(rng, 4, 6);
  const auto preds = unroll(p, s);
  for (std::size_t t = 0; t < preds.size(); ++t) {
    const Tensor pos = positions_at(s, t);
    for (std::size_t k = 0; k < pos.size(); ++k) {
      // tanh saturates to exactly 1 in double precision.
      EXPECT_LE(std::abs(preds[t][k] - pos[k]), 1.0);
    }
  }
}

TEST(NodeRnn, RejectsWrongKindOrder) {
  const ModelParams p = init_params(Variant::kSrnn, 8);
  Tape tape;
  const BoundModel m = bind(tape, p);
  Dropout off;
  const Var h = tape.constant(Tensor::zeros({1, 128}));
  const LstmState prev = zero_state(tape, 1, 256);
  const std::pair<FactorKind, Var> swapped[] = {{FactorKind::kT, h}, {FactorKind::kS, h}};
  EXPECT_THROW(node_rnn_step(tape, m, Tensor::zeros({1, 2}), swapped, prev, off),
               ContractError);
  const std::pair<FactorKind, Var> short_list[] = {{FactorKind::kS, h}};
  EXPECT_THROW(node_rnn_step(tape, m, Tensor::zeros({1, 2}), short_list, prev, off),
               ContractError);
}

TEST(ModelStep, LonePedestrianHasZeroSpatialAggregates) {
  std::mt19937_64 rng(9);
  const Scene s = random_scene(rng, 1, 4);
  const StepFeatures f = compute_step_features(s, 3);
  for (FactorKind k : {FactorKind::kS, FactorKind::kSS, FactorKind::kST, FactorKind::kTS}) {
    for (double v : f[k].data()) EXPECT_EQ(v, 0.0);
  }
  EXPECT_NE(f[FactorKind::kT][0], 0.0);
  EXPECT_NE(f[FactorKind::kTT][0], 0.0);
}

TEST(ModelStep, EarlyStepsZeroFill) {
  std::mt19937_64 rng(10);
  const Scene s = random_scene(rng, 3, 4);
  const StepFeatures f0 = compute_step_features(s, 0);
  for (FactorKind k : {FactorKind::kT, FactorKind::kST, FactorKind::kTS, FactorKind::kTT}) {
    for (double v : f0[k].data()) EXPECT_EQ(v, 0.0);
  }
  const StepFeatures f1 = compute_step_features(s, 1);
  for (double v : f1[FactorKind::kTT].data()) EXPECT_EQ(v, 0.0);
}

TEST(ModelStep, PermutationEquivariant) {
  const ModelParams p = init_params(Variant::kMesrnn, 11);
  std::mt19937_64 rng(11);
  const Scene s = random_scene(rng, 3, 5);
  const std::size_t order[] = {2, 0, 1};
  const Scene permuted = s.select(order);
  const auto a = unroll(p, s);
  const auto b = unroll(p, permuted);
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t r = 0; r < 3; ++r) {
      // Two-term feature sums commute exactly, so the match is bitwise.
      EXPECT_EQ(b[t].at(r, 0), a[t].at(order[r], 0));
      EXPECT_EQ(b[t].at(r, 1), a[t].at(order[r], 1));
    }
  }
}

TEST(ModelStep, PermutationEquivariantLargerCrowd) {
  const ModelParams p = init_params(Variant::kMesrnn, 12);
  std::mt19937_64 rng(12);
  const Scene s = random_scene(rng, 6, 4);
  const std::size_t order[] = {5, 3, 1, 0, 2, 4};
  const auto a = unroll(p, s);
  const auto b = unroll(p, s.select(order));
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t r = 0; r < 6; ++r) {
      EXPECT_NEAR(b[t].at(r, 0), a[t].at(order[r], 0), 1e-12);
      EXPECT_NEAR(b[t].at(r, 1), a[t].at(order[r], 1), 1e-12);
    }
  }
}

TEST(ModelStep, SharedWeightsTreatPedestriansAlike) {
  // Two pedestrians mirrored through the origin see negated edge features.
  const ModelParams p = init_params(Variant::kMesrnn, 13);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> c(-0.8, 0.8);
  Scene s({0, 1}, 5);
  for (std::size_t t = 0; t < 5; ++t) {
    const Vec2 v{c(rng), c(rng)};
    s.set(0, t, v);
    s.set(1, t, -v);
  }
  for (std::size_t t = 0; t < 5; ++t) {
    const StepFeatures f = compute_step_features(s, t);
    for (FactorKind k : kAllFactors) {
      for (std::size_t col = 0; col < factor_input_width(k); ++col) {
        EXPECT_EQ(f[k].at(0, col), -f[k].at(1, col));
      }
    }
  }
  // Identical histories (two copies of one walker) predict identically.
  Scene twin({0, 1}, 5);
  for (std::size_t t = 0; t < 5; ++t) {
    const Vec2 v{c(rng), c(rng)};
    twin.set(0, t, v);
    twin.set(1, t, v);
  }
  for (const Tensor& pred : unroll(p, twin)) {
    EXPECT_EQ(pred.at(0, 0), pred.at(1, 0));
    EXPECT_EQ(pred.at(0, 1), pred.at(1, 1));
  }
}

TEST(Vlstm, IgnoresNeighbours) {
  const ModelParams p = init_params(Variant::kVlstm, 14);
  std::mt19937_64 rng(14);
  const Scene s = random_scene(rng, 3, 6);
  const std::size_t keep[] = {0, 2};
  const auto full = unroll(p, s);
  const auto fewer = unroll(p, s.select(keep));
  // BLAS kernels may block differently for 2 and 3 rows, so not bitwise.
  for (std::size_t t = 0; t < full.size(); ++t) {
    EXPECT_NEAR(fewer[t].at(0, 0), full[t].at(0, 0), 1e-12);
    EXPECT_NEAR(fewer[t].at(0, 1), full[t].at(0, 1), 1e-12);
    EXPECT_NEAR(fewer[t].at(1, 0), full[t].at(2, 0), 1e-12);
    EXPECT_NEAR(fewer[t].at(1, 1), full[t].at(2, 1), 1e-12);
  }
}

TEST(Mesrnn, ReactsToNeighbours) {
  const ModelParams p = init_params(Variant::kMesrnn, 15);
  std::mt19937_64 rng(15);
  const Scene s = random_scene(rng, 3, 6);
  const std::size_t keep[] = {0, 2};
  const auto full = unroll(p, s);
  const auto fewer = unroll(p, s.select(keep));
  EXPECT_NE(fewer.back().at(0, 0), full.back().at(0, 0));
}

TEST(Variant, ParseAndPrint) {
  EXPECT_EQ(parse_variant("srnn"), Variant::kSrnn);
  EXPECT_EQ(to_string(Variant::kVlstm), "vlstm");
  EXPECT_THROW(parse_variant("gru"), ContractError);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  Checkpoint ck{init_params(Variant::kSrnn, 16), {-3.5, 12.25, 0.1, 7.0},
                {0.25, 16, 6, 10, 0.5}};
  const auto path = temp_path("a.ckpt");
  save_checkpoint(ck, path);
  const Checkpoint loaded = load_checkpoint(path);
  EXPECT_TRUE(loaded.params.tensors.identical(ck.params.tensors));
  EXPECT_EQ(loaded.norm, ck.norm);
  EXPECT_EQ(loaded.meta, ck.meta);
  EXPECT_EQ(serialize_checkpoint(loaded), serialize_checkpoint(ck));
}

TEST(Checkpoint, HeaderLayout) {
  Checkpoint ck{init_params(Variant::kVlstm, 17), {}, {}};
  const std::string text = serialize_checkpoint(ck);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kCheckpointMagic);
  std::getline(in, line);
  EXPECT_NE(line.find("variant=vlstm"), std::string::npos);
  EXPECT_NE(line.find("frame_interval="), std::string::npos);
  std::getline(in, line);
  EXPECT_EQ(line, "tensor vlstm.encoder.weight 64 2");
  EXPECT_EQ(text.substr(text.size() - 4), "end\n");
}

TEST(Checkpoint, VariantGuard) {
  Checkpoint ck{init_params(Variant::kSrnn, 18), {}, {}};
  const std::string text = serialize_checkpoint(ck);
  EXPECT_THROW(parse_checkpoint(text, Variant::kMesrnn), CheckpointError);
  EXPECT_NO_THROW(parse_checkpoint(text, Variant::kSrnn));
}

TEST(Checkpoint, CorruptedTensorIsNamed) {
  Checkpoint ck{init_params(Variant::kVlstm, 19), {}, {}};
  std::string text = serialize_checkpoint(ck);
  const std::string header = "tensor vlstm.cell.bias 512";
  const auto pos = text.find(header);
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, header.size(), "tensor vlstm.cell.bias 511");
  try {
    parse_checkpoint(text);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("vlstm.cell.bias"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, TruncatedAndBadMagic) {
  Checkpoint ck{init_params(Variant::kVlstm, 20), {}, {}};
  const std::string text = serialize_checkpoint(ck);
  EXPECT_THROW(parse_checkpoint(text.substr(0, text.size() / 2)), CheckpointError);
  EXPECT_THROW(parse_checkpoint("MESRNN-CKPT v2\n" + text.substr(text.find('\n') + 1)),
               CheckpointError);
  EXPECT_THROW(load_checkpoint(temp_path("missing.ckpt")), CheckpointError);
}

TEST(Backward, PrunedSweepMatchesFullAdjoints) {
  std::mt19937_64 rng(21);
  const Scene s = random_scene(rng, 3, 5);
  for (Variant v : {Variant::kMesrnn, Variant::kSrnn, Variant::kVlstm}) {
    const ModelParams p = init_params(v, 21);
    Tape tape;
    const BoundModel m = bind(tape, p);
    Dropout off;
    const Var pred = teacher_forced_unroll(tape, m, s, 4, off);
    const Var loss = tape.mse(pred, tape.constant(Tensor::zeros(tape.value(pred).shape())));
    const auto full = tape.adjoints(loss, Tensor::filled({1}, 1.0));
    double sum = 0.0;
    for (std::uint32_t i = 0; i < full.size(); ++i) {
      if (tape.op(Var{i}) != ad::Op::kParameter || full[i].empty()) continue;
      for (double g : full[i].data()) sum += g * g;
    }
    const double norm = tape.backward(loss).global_norm();
    EXPECT_NEAR(norm, std::sqrt(sum), 1e-12 * std::sqrt(sum)) << to_string(v);
  }
}
