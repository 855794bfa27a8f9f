// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/verify.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <string>

#include "mesrnn/grad_check.hpp"
#include "mesrnn/model.hpp"
#include "mesrnn/stgraph.hpp"
#include "mesrnn/train.hpp"

namespace mesrnn::verify {
namespace {

using ad::ParamSet;
using ad::Tape;
using ad::Tensor;
using ad::Var;

Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : t.data()) v = u(rng);
  return t;
}

CheckResult from_report(std::string suite, std::string name,
                        const ad::GradCheckReport& r) {
  CheckResult c;
  c.suite = std::move(suite);
  c.name = std::move(name);
  c.passed = r.passed;
  c.measure = r.max_relative_error;
  c.tolerance = r.tolerance;
  std::size_t entries = 0;
  std::string worst;
  double worst_err = -1.0;
  for (const auto& t : r.tensors) {
    entries += t.entries_checked;
    if (t.max_relative_error > worst_err) {
      worst_err = t.max_relative_error;
      worst = t.name;
    }
  }
  c.detail = std::to_string(r.tensors.size()) + " tensors, " +
             std::to_string(entries) + " entries, worst " + worst;
  return c;
}

ParamSet subset(const model::ModelParams& params, const std::string& prefix) {
  ParamSet out;
  for (const auto& [name, value] : params.tensors) {
    if (name.starts_with(prefix)) out.add(name, value);
  }
  return out;
}

/// Random walk of 2 pedestrians over `length` steps inside [-0.8, 0.8].
Scene random_scene(std::size_t peds, std::size_t length, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> start(-0.6, 0.6);
  std::uniform_real_distribution<double> step(-0.05, 0.05);
  std::vector<long> ids(peds);
  for (std::size_t i = 0; i < peds; ++i) ids[i] = static_cast<long>(i);
  Scene s(ids, length);
  for (std::size_t i = 0; i < peds; ++i) {
    Vec2 p{start(rng), start(rng)};
    for (std::size_t t = 0; t < length; ++t) {
      s.set(i, t, p);
      p += Vec2{step(rng), step(rng)};
    }
  }
  return s;
}

struct Primitive {
  std::string name;
  std::vector<std::pair<std::string, ad::Shape>> inputs;
  std::function<Var(Tape&, const std::vector<Var>&)> body;
};

std::vector<Primitive> primitives() {
  using V = std::vector<Var>;
  return {
      {"linear", {{"x", {3, 4}}, {"w", {5, 4}}, {"b", {5}}},
       [](Tape& t, const V& v) { return t.linear(v[0], v[1], v[2]); }},
      {"linear_rank1", {{"x", {4}}, {"w", {3, 4}}, {"b", {3}}},
       [](Tape& t, const V& v) { return t.linear(v[0], v[1], v[2]); }},
      {"matmul", {{"x", {3, 4}}, {"w", {5, 4}}},
       [](Tape& t, const V& v) { return t.matmul(v[0], v[1]); }},
      {"add", {{"a", {3, 4}}, {"b", {3, 4}}},
       [](Tape& t, const V& v) { return t.add(v[0], v[1]); }},
      {"hadamard", {{"a", {3, 4}}, {"b", {3, 4}}},
       [](Tape& t, const V& v) { return t.hadamard(v[0], v[1]); }},
      {"concat", {{"a", {3, 2}}, {"b", {3, 3}}},
       [](Tape& t, const V& v) { return t.concat({v[0], v[1]}); }},
      {"sum_list", {{"a", {3, 4}}, {"b", {3, 4}}, {"c", {3, 4}}},
       [](Tape& t, const V& v) { return t.sum_list({v[0], v[1], v[2]}); }},
      {"slice", {{"x", {3, 6}}},
       [](Tape& t, const V& v) { return t.slice(v[0], 1, 3); }},
      {"rows", {{"x", {5, 3}}},
       [](Tape& t, const V& v) { return t.rows(v[0], 1, 3); }},
      {"stack_rows", {{"a", {2, 3}}, {"b", {1, 3}}},
       [](Tape& t, const V& v) { return t.stack_rows({v[0], v[1], v[0]}); }},
      {"tanh", {{"x", {3, 4}}},
       [](Tape& t, const V& v) { return t.tanh_map(v[0]); }},
      {"sigmoid", {{"x", {3, 4}}},
       [](Tape& t, const V& v) { return t.sigmoid_map(v[0]); }},
      {"scale", {{"x", {3, 4}}},
       [](Tape& t, const V& v) { return t.scale(v[0], -1.7); }},
  };
}

ad::GradCheckOptions check_options(const VerifyOptions& o, std::size_t entries) {
  ad::GradCheckOptions g;
  g.step = o.step;
  g.tolerance = o.tolerance;
  g.max_entries_per_tensor = entries;
  g.seed = o.seed;
  return g;
}

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.passed; });
}

void VerifyReport::append(const VerifyReport& other) {
  checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

VerifyReport gradient_checks(const VerifyOptions& options) {
  VerifyReport report;
  std::mt19937_64 rng(options.seed);
  const auto all = check_options(options, 0);
  const auto sampled = check_options(options, options.sampled_entries);

  for (const Primitive& p : primitives()) {
    ParamSet params;
    for (const auto& [name, shape] : p.inputs) {
      params.add(name, random_tensor(shape, rng));
    }
    // Probe the output shape once to size a fixed random target.
    Tape probe;
    std::vector<Var> vars;
    for (const auto& [name, value] : params) vars.push_back(probe.parameter(name, value));
    const Tensor target = random_tensor(probe.value(p.body(probe, vars)).shape(), rng);
    auto f = [&](Tape& tape, const ParamSet& ps) {
      std::vector<Var> v;
      for (const auto& [name, value] : ps) v.push_back(tape.parameter(name, value));
      return tape.mse(p.body(tape, v), tape.constant(target));
    };
    report.checks.push_back(
        from_report("primitive", p.name, ad::grad_check(f, params, all)));
  }
  {
    ParamSet params;
    params.add("a", random_tensor({3, 4}, rng));
    params.add("b", random_tensor({3, 4}, rng));
    auto f = [](Tape& tape, const ParamSet& ps) {
      return tape.mse(tape.parameter("a", ps.get("a")),
                      tape.parameter("b", ps.get("b")));
    };
    report.checks.push_back(
        from_report("primitive", "mse", ad::grad_check(f, params, all)));
  }

  const model::ModelDims dims;
  constexpr std::size_t kPeds = 2;
  constexpr std::size_t kSteps = 4;
  const model::ModelParams mesrnn =
      model::init_params(model::Variant::kMesrnn, options.seed + 11, dims);
  model::Dropout off;

  for (model::FactorKind kind : model::kAllFactors) {
    const std::string prefix = "edge." + std::string(model::to_string(kind)) + ".";
    ParamSet params = subset(mesrnn, prefix);
    std::vector<Tensor> inputs;
    for (std::size_t t = 0; t < kSteps; ++t) {
      inputs.push_back(random_tensor({kPeds, model::factor_input_width(kind)}, rng, 0.5));
    }
    // Small residuals keep the loss, and with it the rounding noise of the
    // differences, small next to the gradients being checked.
    const Tensor target = random_tensor({kPeds, kSteps * dims.edge_hidden}, rng, 0.05);
    auto f = [&](Tape& tape, const ParamSet& ps) {
      model::EdgeRnn edge{kind, model::bind_embedder(tape, ps, prefix + "encoder"),
                          model::bind_cell(tape, ps, prefix + "cell")};
      model::LstmState state = model::zero_state(tape, kPeds, dims.edge_hidden);
      std::vector<Var> hs;
      for (const Tensor& x : inputs) {
        state = model::edge_rnn_step(tape, edge, x, state, off);
        hs.push_back(state.h);
      }
      return tape.mse(tape.concat(hs), tape.constant(target));
    };
    report.checks.push_back(from_report(
        "network", "edge_rnn." + std::string(model::to_string(kind)),
        ad::grad_check(f, params, sampled)));
  }

  {
    ParamSet params = subset(mesrnn, "node.");
    std::vector<Tensor> positions;
    std::vector<std::vector<Tensor>> hiddens(kSteps);
    for (std::size_t t = 0; t < kSteps; ++t) {
      positions.push_back(random_tensor({kPeds, 2}, rng, 0.8));
      for (std::size_t k = 0; k < model::kAllFactors.size(); ++k) {
        hiddens[t].push_back(random_tensor({kPeds, dims.edge_hidden}, rng, 0.5));
      }
    }
    Tensor target = random_tensor({kPeds, 2 * kSteps}, rng, 0.05);
    for (std::size_t t = 0; t < kSteps; ++t) {
      for (std::size_t i = 0; i < kPeds; ++i) {
        target.at(i, 2 * t) += positions[t].at(i, 0);
        target.at(i, 2 * t + 1) += positions[t].at(i, 1);
      }
    }
    auto f = [&](Tape& tape, const ParamSet& ps) {
      model::BoundModel m;
      m.variant = model::Variant::kMesrnn;
      m.dims = dims;
      m.node.encoder = model::bind_embedder(tape, ps, "node.encoder");
      m.node.cell = model::bind_cell(tape, ps, "node.cell");
      m.node.decoder = model::bind_embedder(tape, ps, "node.decoder");
      model::LstmState state = model::zero_state(tape, kPeds, dims.node_hidden);
      std::vector<Var> outs;
      for (std::size_t t = 0; t < kSteps; ++t) {
        std::vector<std::pair<model::FactorKind, Var>> edge_h;
        for (std::size_t k = 0; k < model::kAllFactors.size(); ++k) {
          edge_h.emplace_back(model::kAllFactors[k], tape.constant(hiddens[t][k]));
        }
        const model::NodeStep step =
            model::node_rnn_step(tape, m, positions[t], edge_h, state, off);
        state = step.state;
        outs.push_back(step.next_position);
      }
      return tape.mse(tape.concat(outs), tape.constant(target));
    };
    report.checks.push_back(
        from_report("network", "node_rnn", ad::grad_check(f, params, sampled)));
  }

  // Whole models, teacher-forced over every step of a 5-step scene.
  for (model::Variant variant : {model::Variant::kVlstm, model::Variant::kMesrnn}) {
    model::ModelParams mp = variant == model::Variant::kMesrnn
                                ? mesrnn
                                : model::init_params(variant, options.seed + 13, dims);
    const Scene scene = random_scene(kPeds, kSteps + 1, rng);
    auto f = [&](Tape& tape, const ParamSet& ps) {
      const model::BoundModel m = model::bind(tape, variant, dims, ps);
      return train::teacher_forced_loss(tape, m, scene, train::LossWindow::kFull,
                                        1, kSteps, off);
    };
    report.checks.push_back(from_report(
        "model", std::string(model::to_string(variant)) + ".unroll4",
        ad::grad_check(f, mp.tensors, sampled)));
  }
  return report;
}

VerifyReport oracle_checks(const VerifyOptions& options) {
  std::mt19937_64 rng(options.seed ^ 0x5bd1e995ULL);
  std::uniform_int_distribution<std::size_t> peds(1, 6);
  std::uniform_int_distribution<std::size_t> steps(3, 6);
  std::uniform_real_distribution<double> coord(-5.0, 5.0);
  std::bernoulli_distribution present(0.75);

  std::array<std::size_t, 4> mismatches{};
  std::array<std::size_t, 4> instances{};
  std::size_t cells = 0;
  for (std::size_t k = 0; k < options.oracle_scenes; ++k) {
    const std::size_t n = peds(rng);
    const std::size_t len = steps(rng);
    std::vector<long> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<long>(i);
    Scene scene(ids, len);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < len; ++t) {
        if (present(rng)) scene.set(i, t, {coord(rng), coord(rng)});
      }
    }
    const graph::STGraph g = graph::build_graph(scene, len);
    for (std::size_t q = 0; q < graph::kAllMetaPathKinds.size(); ++q) {
      const graph::MetaPathKind kind = graph::kAllMetaPathKinds[q];
      const auto sig = graph::signature(kind);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < len; ++t) {
          std::vector<std::vector<double>> got;
          for (const auto& f : graph::metapaths(g, i, t, kind)) {
            got.emplace_back(f.value.begin(), f.value.end());
          }
          auto want = graph::enumerate_walks_oracle(g, i, t, sig);
          std::sort(got.begin(), got.end());
          std::sort(want.begin(), want.end());
          if (got != want) ++mismatches[q];
          instances[q] += want.size();
          ++cells;
        }
      }
    }
  }

  VerifyReport report;
  for (std::size_t q = 0; q < 4; ++q) {
    CheckResult c;
    c.suite = "oracle";
    c.name = "metapaths." + std::string(graph::to_string(graph::kAllMetaPathKinds[q]));
    c.measure = static_cast<double>(mismatches[q]);
    c.tolerance = 0.0;
    c.passed = mismatches[q] == 0;
    c.detail = std::to_string(options.oracle_scenes) + " scenes, " +
               std::to_string(cells / 4) + " (anchor, step) cells, " +
               std::to_string(instances[q]) + " instances";
    report.checks.push_back(std::move(c));
  }
  return report;
}

VerifyReport counting_checks(const VerifyOptions& options) {
  std::mt19937_64 rng(options.seed ^ 0x2545f491ULL);
  std::uniform_real_distribution<double> coord(-5.0, 5.0);
  constexpr std::size_t kLength = 6;
  VerifyReport report;
  for (std::size_t n : {2, 3, 5, 8}) {
    std::vector<long> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<long>(i);
    Scene scene(ids, kLength);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < kLength; ++t) scene.set(i, t, {coord(rng), coord(rng)});
    }
    const graph::STGraph g = graph::build_graph(scene, kLength);
    const std::array<std::size_t, 4> expected = {(n - 1) * (n - 2), n - 1, n - 1, 1};
    std::size_t bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
      // Step 2 is the first with two temporal edges behind it.
      for (std::size_t t = 2; t < kLength; ++t) {
        for (std::size_t q = 0; q < 4; ++q) {
          if (graph::metapaths(g, i, t, graph::kAllMetaPathKinds[q]).size() !=
              expected[q]) {
            ++bad;
          }
        }
      }
    }
    CheckResult c;
    c.suite = "counting";
    c.name = "N=" + std::to_string(n);
    c.measure = static_cast<double>(bad);
    c.tolerance = 0.0;
    c.passed = bad == 0;
    c.detail = "SS=" + std::to_string(expected[0]) + " ST=TS=" +
               std::to_string(expected[1]) + " TT=1";
    report.checks.push_back(std::move(c));
  }
  return report;
}

VerifyReport run_all(const VerifyOptions& options) {
  VerifyReport report = gradient_checks(options);
  report.append(oracle_checks(options));
  report.append(counting_checks(options));
  return report;
}

void write_table(std::ostream& out, const VerifyReport& report) {
  char line[256];
  std::snprintf(line, sizeof line, "%-9s %-22s %-12s %-9s %s\n", "suite",
                "check", "measure", "tol", "status");
  out << line;
  for (const auto& c : report.checks) {
    std::snprintf(line, sizeof line, "%-9s %-22s %-12.3e %-9.1e %-4s  %s\n",
                  c.suite.c_str(), c.name.c_str(), c.measure, c.tolerance,
                  c.passed ? "PASS" : "FAIL", c.detail.c_str());
    out << line;
  }
  std::size_t failed = 0;
  for (const auto& c : report.checks) failed += c.passed ? 0 : 1;
  out << report.checks.size() - failed << "/" << report.checks.size()
      << " checks passed\n";
}

}  // namespace mesrnn::verify
