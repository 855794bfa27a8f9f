// SPDX-License-Identifier: Apache-2.0
// mesrnn: train, evaluate, predict, generate synthetic data, verify.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mesrnn/checkpoint.hpp"
#include "mesrnn/data.hpp"
#include "mesrnn/error.hpp"
#include "mesrnn/eval.hpp"
#include "mesrnn/export.hpp"
#include "mesrnn/synth.hpp"
#include "mesrnn/train.hpp"
#include "mesrnn/verify.hpp"

#ifndef MESRNN_VERSION
#define MESRNN_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace mesrnn;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kUsage = 2, kData = 3, kNumeric = 4 };

struct Sources {
  std::vector<std::string> data_dirs;
  std::vector<std::string> synth_specs;
};

struct TrainFlags {
  std::string model = "mesrnn";
  std::size_t epochs = 10;
  double lr = 0.001;
  double clip = 10.0;
  std::size_t obs = 8;
  std::size_t pred = 12;
  double dropout = 0.2;
  std::string loss_window = "pred";
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
  std::string init = "glorot";
  std::size_t stride = 10;
  std::size_t workers = 1;
  double interval = Scene::kDefaultFrameInterval;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return hex64(fnv1a(std::as_bytes(std::span(bytes.data(), bytes.size()))));
}

/// Records every option of `app` with its resolved value (explicit or
/// default), input digests and output digests.
class Manifest {
 public:
  explicit Manifest(const CLI::App& app) {
    doc_["tool"] = "mesrnn";
    doc_["version"] = MESRNN_VERSION;
    doc_["command"] = app.get_name();
    nlohmann::json config = nlohmann::json::object();
    for (const CLI::Option* opt : app.get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "config") continue;
      auto results = opt->results();
      if (results.empty()) {
        if (opt->get_type_size() == 0) {
          config[name] = false;
          continue;
        }
        const std::string def = opt->get_default_str();
        config[name] = def.empty() ? nlohmann::json() : nlohmann::json(def);
      } else if (opt->get_type_size() == 0) {
        config[name] = true;
      } else if (opt->get_expected_max() > 1) {
        config[name] = results;
      } else {
        config[name] = results.back();
      }
    }
    doc_["config"] = std::move(config);
    doc_["inputs"] = nlohmann::json::array();
    doc_["outputs"] = nlohmann::json::array();
  }

  void input(const fs::path& path) {
    doc_["inputs"].push_back({{"path", path.string()}, {"fnv1a64", file_digest(path)}});
  }
  void output(const fs::path& path) {
    doc_["outputs"].push_back({{"path", path.string()}, {"fnv1a64", file_digest(path)}});
  }
  void set(const std::string& key, nlohmann::json value) { doc_[key] = std::move(value); }

  void write(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << doc_.dump(2) << '\n';
  }

 private:
  nlohmann::json doc_;
};

fs::path sibling(const fs::path& out, const std::string& suffix) {
  return fs::path(out.string() + suffix);
}

std::vector<Scene> load_dir(const fs::path& dir, const data::WindowOptions& w,
                            double interval, Manifest* manifest) {
  const auto files = data::dataset_files(dir);
  if (files.empty()) throw DataError("no .txt files in '" + dir.string() + "'");
  std::vector<Scene> scenes;
  for (const auto& f : files) {
    const auto table = data::load_table(f, interval);
    auto part = data::window_scenes(table, w);
    scenes.insert(scenes.end(), part.begin(), part.end());
    if (manifest) manifest->input(f);
  }
  return scenes;
}

/// Named scene sets from --data and --synth, in flag order (data first).
std::vector<eval::NamedSplit> load_splits(const Sources& src,
                                          const data::WindowOptions& w,
                                          double interval, bool expand_subdirs,
                                          Manifest* manifest) {
  std::vector<fs::path> dirs;
  for (const auto& d : src.data_dirs) dirs.emplace_back(d);
  if (expand_subdirs && dirs.size() == 1 && fs::is_directory(dirs[0]) &&
      data::dataset_files(dirs[0]).empty()) {
    std::vector<fs::path> subs;
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      if (e.is_directory()) subs.push_back(e.path());
    }
    std::sort(subs.begin(), subs.end());
    dirs = subs;
  }
  std::vector<eval::NamedSplit> splits;
  for (const auto& d : dirs) {
    eval::NamedSplit s;
    s.name = d.filename().empty() ? d.parent_path().filename().string()
                                  : d.filename().string();
    s.scenes = load_dir(d, w, interval, manifest);
    if (s.scenes.empty()) {
      throw DataError("split '" + s.name + "' yields no scene of " +
                      std::to_string(w.obs + w.pred) + " frames");
    }
    splits.push_back(std::move(s));
  }
  for (std::size_t k = 0; k < src.synth_specs.size(); ++k) {
    const auto spec = data::parse_synth_spec(src.synth_specs[k]);
    if (spec.length != w.obs + w.pred) {
      throw ContractError("synthetic length " + std::to_string(spec.length) +
                          " differs from obs + pred = " +
                          std::to_string(w.obs + w.pred));
    }
    splits.push_back({std::string(data::to_string(spec.scenario)) + "_" +
                          std::to_string(k),
                      data::synth_generate(spec)});
  }
  return splits;
}

void add_source_flags(CLI::App* app, Sources& src, bool many) {
  auto* d = app->add_option("--data", src.data_dirs,
                            "Dataset directory of `frame ped_id x y` .txt files");
  auto* s = app->add_option("--synth", src.synth_specs,
                            "Synthetic spec, e.g. crossing:n=4,scenes=50,seed=1");
  if (!many) {
    d->expected(1);
    s->expected(1);
  }
  d->excludes(s);
}

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--model", f.model, "Variant: mesrnn | srnn | vlstm")
      ->capture_default_str()
      ->check(CLI::IsMember({"mesrnn", "srnn", "vlstm"}));
  app->add_option("--epochs", f.epochs, "Training epochs")->capture_default_str();
  app->add_option("--lr", f.lr, "ADAM learning rate")->capture_default_str();
  app->add_option("--clip", f.clip, "Global gradient-norm clip")->capture_default_str();
  app->add_option("--obs", f.obs, "Observed steps")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--pred", f.pred, "Predicted steps")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--dropout", f.dropout, "Dropout rate on embedder outputs")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  app->add_option("--loss-window", f.loss_window, "Loss window: pred | full")
      ->capture_default_str()
      ->check(CLI::IsMember({"pred", "full"}));
  app->add_option("--seed", f.seed, "Seed for init, split, order and dropout")
      ->capture_default_str();
  app->add_option("--val-fraction", f.val_fraction,
                  "Share of scenes held out for checkpoint selection")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  app->add_option("--init", f.init, "Initialization: glorot | zero")
      ->capture_default_str()
      ->check(CLI::IsMember({"glorot", "zero"}));
  app->add_option("--stride", f.stride, "Window stride in frames")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--frame-interval", f.interval, "Seconds between frames")
      ->capture_default_str();
  app->add_option("--workers", f.workers, "Threads for read-only evaluation")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

train::TrainConfig to_config(const TrainFlags& f) {
  train::TrainConfig c;
  c.epochs = f.epochs;
  c.learning_rate = f.lr;
  c.clip_norm = f.clip;
  c.obs = f.obs;
  c.pred = f.pred;
  c.loss_window = train::parse_loss_window(f.loss_window);
  c.dropout = f.dropout;
  c.seed = f.seed;
  c.validation_fraction = f.val_fraction;
  c.init = f.init == "zero" ? model::InitScheme::kZero : model::InitScheme::kGlorot;
  c.workers = f.workers;
  return c;
}

data::WindowOptions windows(std::size_t obs, std::size_t pred, std::size_t stride) {
  return {obs, pred, stride, data::WindowMode::kInference};
}

void print_epoch(const train::EpochRecord& r) {
  std::fprintf(stderr, "epoch %zu  train %.6g  val %.6g\n", r.epoch,
               r.train_loss, r.val_loss);
}

int cmd_train(const CLI::App& app, const Sources& src, const TrainFlags& f,
              const std::string& out, bool quiet) {
  Manifest manifest(app);
  const auto splits = load_splits(src, windows(f.obs, f.pred, f.stride),
                                  f.interval, false, &manifest);
  std::vector<Scene> scenes;
  for (const auto& s : splits) scenes.insert(scenes.end(), s.scenes.begin(), s.scenes.end());

  const auto result =
      train::train(to_config(f), scenes, model::parse_variant(f.model),
                   quiet ? train::EpochCallback{} : print_epoch);
  const fs::path ckpt(out);
  model::save_checkpoint(result.best, ckpt);
  const fs::path history = sibling(ckpt, ".history.csv");
  {
    std::ofstream h(history, std::ios::binary);
    if (!h) throw DataError("cannot write '" + history.string() + "'");
    train::write_history_csv(h, result.history);
  }
  manifest.output(ckpt);
  manifest.output(history);
  manifest.set("seed", f.seed);
  manifest.set("best_epoch", result.best_epoch);
  manifest.set("train_scenes", result.train_fingerprints.size());
  manifest.set("validation_scenes", result.validation_fingerprints.size());
  manifest.write(sibling(ckpt, ".manifest.json"));
  if (!quiet) {
    std::printf("wrote %s (best epoch %zu of %zu)\n", ckpt.string().c_str(),
                result.best_epoch, result.history.size());
  }
  return kOk;
}

void write_metrics(const fs::path& out, const eval::Report& report) {
  {
    std::ofstream csv(out, std::ios::binary);
    if (!csv) throw DataError("cannot write '" + out.string() + "'");
    eval::write_metrics_csv(csv, report.metrics);
  }
  std::ofstream json(sibling(out, ".json"), std::ios::binary);
  if (!json) throw DataError("cannot write '" + out.string() + ".json'");
  json << eval::export_json(report);
}

void print_metrics(const std::vector<eval::MetricsRow>& rows) {
  std::printf("%-16s %-8s %12s %12s %12s %12s %8s %8s\n", "split", "variant",
              "ade_norm", "fde_norm", "ade_world", "fde_world", "scenes", "peds");
  for (const auto& r : rows) {
    std::printf("%-16s %-8s %12.6f %12.6f %12.6f %12.6f %8zu %8zu\n",
                r.split.c_str(), r.variant.c_str(), r.ade_norm, r.fde_norm,
                r.ade_world, r.fde_world, r.n_scenes, r.n_peds);
  }
}

int cmd_eval(const CLI::App& app, const Sources& src, const TrainFlags& f,
             const std::string& checkpoint, bool loo, bool model_given,
             const std::string& out, bool quiet) {
  Manifest manifest(app);
  const auto splits = load_splits(src, windows(f.obs, f.pred, f.stride),
                                  f.interval, loo, &manifest);
  if (splits.empty()) throw ContractError("--data or --synth is required");
  eval::Report report;
  if (loo) {
    const auto loo_report = eval::leave_one_out(
        splits, to_config(f), model::parse_variant(f.model),
        quiet ? train::EpochCallback{} : print_epoch);
    for (const auto& h : loo_report.hygiene) {
      if (h.leaked != 0) {
        throw DataError("held-out split '" + h.held_out +
                        "' shares scenes with its training set");
      }
    }
    report.metrics = loo_report.rows;
    manifest.set("hygiene", [&] {
      nlohmann::json j = nlohmann::json::array();
      for (const auto& h : loo_report.hygiene) {
        j.push_back({{"held_out", h.held_out},
                     {"held_out_scenes", h.held_out_scenes},
                     {"train_scenes", h.train_scenes},
                     {"leaked", h.leaked}});
      }
      return j;
    }());
  } else {
    if (checkpoint.empty()) throw ContractError("--checkpoint is required without --loo");
    const auto expected = model_given ? std::optional(model::parse_variant(f.model))
                                      : std::nullopt;
    const auto ckpt = model::load_checkpoint(checkpoint, expected);
    manifest.input(checkpoint);
    for (const auto& s : splits) {
      const auto result = eval::predict(ckpt, s.scenes, f.obs, f.pred, f.workers);
      report.metrics.push_back(eval::score(result, s.name, ckpt.meta.seed));
      report.prediction.variant = result.variant;
      report.prediction.norm = result.norm;
    }
    if (report.metrics.size() > 1) report.metrics.push_back(eval::average_row(report.metrics));
  }
  report.prediction.obs = f.obs;
  report.prediction.pred = f.pred;
  if (loo) report.prediction.variant = model::parse_variant(f.model);

  const fs::path path(out);
  write_metrics(path, report);
  manifest.output(path);
  manifest.output(sibling(path, ".json"));
  manifest.set("seed", f.seed);
  manifest.write(sibling(path, ".manifest.json"));
  if (!quiet) print_metrics(report.metrics);
  return kOk;
}

int cmd_predict(const CLI::App& app, const Sources& src, const std::string& scene_file,
                const std::string& checkpoint, std::size_t obs_flag,
                std::size_t pred_flag, std::size_t stride, double interval,
                std::size_t workers, const std::string& format,
                const std::string& out) {
  Manifest manifest(app);
  const auto ckpt = model::load_checkpoint(checkpoint);
  manifest.input(checkpoint);
  const std::size_t obs = obs_flag ? obs_flag : ckpt.meta.obs;
  const std::size_t pred = pred_flag ? pred_flag : ckpt.meta.pred;

  std::vector<Scene> scenes;
  if (!scene_file.empty()) {
    const auto table = data::load_table(scene_file, interval);
    manifest.input(scene_file);
    const std::size_t frames = table.frames().size();
    if (frames < obs) {
      throw DataError("scene file has " + std::to_string(frames) +
                      " frames, fewer than --obs " + std::to_string(obs));
    }
    // Short files become a single scene with partial ground truth.
    scenes = frames < obs + pred
                 ? data::window_scenes(table, windows(obs, frames - obs, 1))
                 : data::window_scenes(table, windows(obs, pred, stride));
    if (scenes.empty()) {
      throw DataError("no pedestrian is present over the first " +
                      std::to_string(obs) + " frames");
    }
  } else {
    for (auto& s : load_splits(src, windows(obs, pred, stride), interval, false, &manifest)) {
      scenes.insert(scenes.end(), s.scenes.begin(), s.scenes.end());
    }
  }
  if (scenes.empty()) throw ContractError("--scene, --data or --synth is required");

  eval::Report report;
  report.prediction = eval::predict(ckpt, scenes, obs, pred, workers);
  try {
    report.metrics.push_back(eval::score(report.prediction, "predict", ckpt.meta.seed));
  } catch (const DataError&) {
    // No ground truth over the window: trajectories only.
  }
  const fs::path path(out);
  const auto fmt = eval::parse_export_format(format);
  eval::export_report(report, fmt, path);
  manifest.output(path);
  if (fmt == eval::ExportFormat::kCsv) {
    fs::path m = path;
    m.replace_filename(path.stem().string() + "_metrics.csv");
    manifest.output(m);
  }
  manifest.write(sibling(path, ".manifest.json"));
  return kOk;
}

int cmd_synth(const CLI::App& app, const std::string& spec_text,
              const std::string& out) {
  Manifest manifest(app);
  const auto spec = data::parse_synth_spec(spec_text);
  const auto scenes = data::synth_generate(spec);
  const auto table = data::scenes_to_table(scenes);
  data::save_table(table, out);
  manifest.set("spec", data::format_synth_spec(spec));
  manifest.output(out);
  manifest.write(sibling(out, ".manifest.json"));
  return kOk;
}

int cmd_verify(const verify::VerifyOptions& options) {
  const auto report = verify::run_all(options);
  verify::write_table(std::cout, report);
  return report.passed() ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory prediction with meta-path enhanced structural RNNs"};
  app.set_version_flag("--version", MESRNN_VERSION);
  app.require_subcommand(1);

  Sources src;
  TrainFlags tf;
  std::string out;
  bool quiet = false;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->set_config("--config", "", "key=value file of flags, one per line");
  add_source_flags(train_cmd, src, false);
  add_train_flags(train_cmd, tf);
  train_cmd->add_option("--out", out, "Checkpoint path (history and manifest written next to it)")
      ->required();
  train_cmd->add_flag("--quiet", quiet, "No per-epoch progress");

  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint, or run leave-one-out");
  eval_cmd->set_config("--config", "", "key=value file of flags, one per line");
  std::string checkpoint;
  bool loo = false;
  add_source_flags(eval_cmd, src, true);
  add_train_flags(eval_cmd, tf);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate");
  eval_cmd->add_flag("--loo", loo,
                     "Leave-one-out: each --data/--synth source (or each "
                     "subdirectory of a single --data DIR) is one split");
  eval_cmd->add_option("--out", out, "Metrics CSV path (JSON and manifest written next to it)")
      ->required();
  eval_cmd->add_flag("--quiet", quiet, "No progress or table");

  auto* predict_cmd = app.add_subcommand("predict", "Roll out a checkpoint and export trajectories");
  predict_cmd->set_config("--config", "", "key=value file of flags, one per line");
  std::string scene_file, format = "csv";
  std::size_t p_obs = 0, p_pred = 0, p_stride = 10, p_workers = 1;
  double p_interval = Scene::kDefaultFrameInterval;
  predict_cmd->add_option("--checkpoint", checkpoint, "Checkpoint to roll out")->required();
  auto* scene_opt = predict_cmd->add_option("--scene", scene_file, "Trajectory file to predict");
  add_source_flags(predict_cmd, src, false);
  scene_opt->excludes(predict_cmd->get_option("--data"));
  scene_opt->excludes(predict_cmd->get_option("--synth"));
  predict_cmd->add_option("--obs", p_obs, "Observed steps (0: from checkpoint)")->capture_default_str();
  predict_cmd->add_option("--pred", p_pred, "Predicted steps (0: from checkpoint)")->capture_default_str();
  predict_cmd->add_option("--stride", p_stride, "Window stride in frames")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  predict_cmd->add_option("--frame-interval", p_interval, "Seconds between frames")
      ->capture_default_str();
  predict_cmd->add_option("--workers", p_workers, "Rollout threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  predict_cmd->add_option("--format", format, "Output format: csv | json | svg")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "json", "svg"}));
  predict_cmd->add_option("--out", out, "Output path")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset file");
  std::string spec_text;
  synth_cmd->add_option("--spec", spec_text, "Synthetic spec, e.g. crossing:n=4,scenes=50")
      ->required();
  synth_cmd->add_option("--out", out, "Dataset file path")->required();

  auto* verify_cmd = app.add_subcommand("verify", "Gradient checks and meta-path oracle checks");
  verify::VerifyOptions vo;
  verify_cmd->add_option("--tol", vo.tolerance, "Relative tolerance for gradient checks")
      ->capture_default_str();
  verify_cmd->add_option("--step", vo.step, "Central-difference step")->capture_default_str();
  verify_cmd->add_option("--seed", vo.seed, "Seed for tensors, scenes and sampled entries")
      ->capture_default_str();
  verify_cmd->add_option("--scenes", vo.oracle_scenes, "Random scenes for the oracle suite")
      ->capture_default_str();
  verify_cmd->add_option("--entries", vo.sampled_entries,
                         "Entries sampled per tensor of the full-size networks")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (!out.empty()) {
      const fs::path parent = fs::path(out).parent_path();
      std::error_code ec;
      if (!parent.empty()) fs::create_directories(parent, ec);
    }
    if (*train_cmd) {
      if (src.data_dirs.empty() && src.synth_specs.empty()) {
        throw ContractError("one of --data or --synth is required");
      }
      return cmd_train(*train_cmd, src, tf, out, quiet);
    }
    if (*eval_cmd) {
      return cmd_eval(*eval_cmd, src, tf, checkpoint, loo,
                      eval_cmd->count("--model") > 0, out, quiet);
    }
    if (*predict_cmd) {
      return cmd_predict(*predict_cmd, src, scene_file, checkpoint, p_obs, p_pred,
                         p_stride, p_interval, p_workers, format, out);
    }
    if (*synth_cmd) return cmd_synth(*synth_cmd, spec_text, out);
    if (*verify_cmd) return cmd_verify(vo);
  } catch (const ContractError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kNumeric;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
