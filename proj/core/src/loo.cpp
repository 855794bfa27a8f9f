// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/eval.hpp"

#include <algorithm>
#include <unordered_set>

#include "mesrnn/error.hpp"

namespace mesrnn::eval {

LooReport leave_one_out(std::span<const NamedSplit> splits,
                        const train::TrainConfig& config,
                        model::Variant variant,
                        const train::EpochCallback& on_epoch) {
  if (splits.size() < 2) {
    throw DataError("leave-one-out needs at least two splits");
  }
  for (const auto& s : splits) {
    if (s.scenes.empty()) throw DataError("split '" + s.name + "' is empty");
  }

  LooReport report;
  for (std::size_t held = 0; held < splits.size(); ++held) {
    std::vector<Scene> pool;
    for (std::size_t k = 0; k < splits.size(); ++k) {
      if (k == held) continue;
      pool.insert(pool.end(), splits[k].scenes.begin(), splits[k].scenes.end());
    }
    const train::TrainResult trained = train::train(config, pool, variant, on_epoch);

    // Fingerprints of the held-out scenes as training would see them, plus
    // the raw scenes, must be disjoint from everything training touched.
    const std::size_t length = config.obs + config.pred;
    std::unordered_set<std::uint64_t> held_prints;
    for (const Scene& s : splits[held].scenes) {
      held_prints.insert(s.fingerprint());
    }
    for (const Scene& s : train::training_scenes(splits[held].scenes, length)) {
      held_prints.insert(s.fingerprint());
    }
    SplitHygiene hygiene;
    hygiene.held_out = splits[held].name;
    hygiene.held_out_scenes = splits[held].scenes.size();
    hygiene.train_scenes = trained.train_fingerprints.size();
    for (const auto* prints : {&trained.train_fingerprints,
                               &trained.validation_fingerprints,
                               &trained.norm_fingerprints}) {
      hygiene.leaked += static_cast<std::size_t>(
          std::count_if(prints->begin(), prints->end(),
                        [&](std::uint64_t f) { return held_prints.contains(f); }));
    }
    report.hygiene.push_back(hygiene);

    const PredictionResult result =
        predict(trained.best, splits[held].scenes, config.obs, config.pred,
                config.workers, config.graph);
    report.rows.push_back(score(result, splits[held].name, config.seed));
    report.checkpoints.push_back(trained.best);
  }
  report.rows.push_back(average_row(report.rows));
  return report;
}

}  // namespace mesrnn::eval
