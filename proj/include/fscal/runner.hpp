#pragma once

// End-to-end workflows shared by the command-line tool and the tests:
// episode sources for the synthetic world and for reorganized corpora,
// training to a checkpoint, and episodic evaluation.

#include <filesystem>
#include <memory>
#include <vector>

#include "fscal/config.hpp"
#include "fscal/engine.hpp"
#include "fscal/evaluation.hpp"

namespace fscal {

std::uint64_t synthetic_train_seed(std::uint64_t seed, std::uint64_t iteration);
std::uint64_t synthetic_eval_seed(std::uint64_t seed, std::uint64_t index);

EpisodeSource synthetic_train_source(const RunConfig& cfg);

/// Held-out synthetic episode `index` under the given eval settings.
EpisodeTensors synthetic_eval_episode(const RunConfig& cfg, const EvalSettings& es,
                                      std::uint64_t index);

/// A reorganized corpus (split manifest + feature directory) and its
/// episode sampler.
class Corpus {
 public:
  explicit Corpus(const RunConfig& cfg);
  Corpus(const Corpus&) = delete;
  Corpus& operator=(const Corpus&) = delete;

  EpisodeTensors train_episode(int supports);
  EpisodeTensors fixed_episode(const EvalSettings& es, std::uint64_t index, std::string* id = nullptr);

 private:
  LoadedManifest manifest_;
  FeatureBank bank_;
  EpisodeSampler sampler_;
};

struct TrainOutcome {
  Model model;
  std::vector<LossRecord> trace;
};

/// Trains from `cfg`. When `out_dir` is non-empty, writes model.ckpt,
/// train_log.jsonl and config.json there.
TrainOutcome run_training(const RunConfig& cfg, const std::filesystem::path& out_dir = {},
                          std::ostream* progress = nullptr);

void write_checkpoint(const Model& model, const RunConfig& cfg, std::uint64_t iteration,
                      const std::filesystem::path& path);

struct LoadedModel {
  RunConfig config;
  Model model;
  std::uint64_t iteration = 0;
};

LoadedModel load_model(const std::filesystem::path& checkpoint);

/// Runs inference on held-out episodes and scores them.
std::vector<EpisodeResult> collect_predictions(Model& model, const RunConfig& cfg,
                                               const EvalSettings& es);
EvalResult run_evaluation(Model& model, const RunConfig& cfg, const EvalSettings& es);

/// One evaluation per support count 1..max_supports on the same episodes.
std::vector<SweepPoint> run_sweep(Model& model, const RunConfig& cfg, const EvalSettings& es,
                                  int max_supports);

/// Default output directory: $FSCAL_OUTPUT_DIR or ./fscal_out.
std::filesystem::path default_output_dir();

}  // namespace fscal
