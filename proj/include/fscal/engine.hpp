#pragma once

// Model assembly, the training loop, single-episode inference and the
// multi-scale sliding-window path for long queries.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fscal/alignment.hpp"
#include "fscal/data.hpp"
#include "fscal/diff.hpp"
#include "fscal/features.hpp"
#include "fscal/heads.hpp"
#include "fscal/io.hpp"
#include "fscal/proposals.hpp"

namespace fscal {

struct ModelConfig {
  BackboneConfig backbone;
  AlignmentDims align;  // align.channels follows backbone.channels
  int parts = 4;        // T
  int proposal_hidden = 128;
  AnchorConfig anchors;
};

void validate(const ModelConfig& cfg);

struct Model {
  ModelConfig config;
  diff::ParameterStore params;
};

/// Fresh parameters. `align_out` chooses how the alignment output
/// projections start (Zero = identity alignment).
Model build_model(const ModelConfig& cfg, std::uint64_t seed,
                  OutputInit align_out = OutputInit::Zero);

/// Rebuilds the model skeleton for `cfg` and loads every tensor from
/// `ckpt`, checking names and shapes.
Model model_from_checkpoint(const ModelConfig& cfg, const Checkpoint& ckpt);

/// Backbone inputs for one episode. For the passthrough backbone rows are
/// feature steps, otherwise frames.
struct EpisodeTensors {
  diff::Matrix query;
  std::vector<diff::Matrix> supports;
  std::vector<TemporalSegment> gts;     // common-action instances, frames
  std::vector<TemporalSegment> others;  // instances of other actions
  int num_frames = 0;
};

EpisodeTensors from_synthetic(const SyntheticEpisode& ep);

/// Reads backbone feature files named <source_id>.fea from one directory.
class FeatureBank {
 public:
  FeatureBank(std::filesystem::path dir, int channels, int stride);

  const FrameFeatures& get(const std::string& source_id);
  /// Feature steps covering `segment` (frames within `video`).
  diff::Matrix crop(const AnnotatedVideo& video, const TemporalSegment& segment);

 private:
  std::filesystem::path dir_;
  int channels_;
  int stride_;
  std::map<std::string, FrameFeatures> cache_;
};

EpisodeTensors episode_tensors(const Episode& episode, const EpisodeSampler& sampler,
                               const PhaseData& data, FeatureBank& bank);

struct TargetConfig {
  double anchor_pos = 0.7;
  double anchor_neg = 0.3;
  double cond_pos = 0.5;
  double cond_neg = 0.3;
};

struct ForwardPass {
  std::vector<TemporalSegment> anchors;
  ProposalOutputs proposals;
  ProposalSelection selection;
  AlignmentOutput alignment;
  HeadOutputs heads;
};

ForwardPass forward(diff::Tape& tape, Model& model, const EpisodeTensors& ep, SelectPhase phase,
                    const SelectionPolicy& policy);

struct TrainConfig {
  double lr = 1e-5;
  double decay_lr = 1e-6;
  long long decay_at = 25000;
  long long iterations = 40000;
  std::uint64_t seed = 0;
  int supports = 5;
  bool cls_mean = false;  // normalize classification by proposal count
};

void validate(const TrainConfig& cfg);

/// Learning rate used for the update at 0-based `iteration`.
double lr_at(const TrainConfig& cfg, long long iteration);

struct LossRecord {
  long long iteration = 0;
  double total = 0.0;
  double cls = 0.0;
  double reg = 0.0;
  double lr = 0.0;

  bool operator==(const LossRecord&) const = default;
};

std::string to_jsonl(const LossRecord& r);

struct EpisodeLoss {
  diff::Var total;
  double cls = 0.0;
  double reg = 0.0;
};

/// Support-agnostic loss on all anchors (every action instance is a
/// target) plus support-conditioned loss on the selected proposals (only
/// the common action is).
EpisodeLoss episode_loss(diff::Tape& tape, Model& model, const EpisodeTensors& ep,
                         const SelectionPolicy& policy, const TargetConfig& targets,
                         bool cls_mean);

using EpisodeSource = std::function<EpisodeTensors(std::uint64_t iteration)>;

struct TrainHooks {
  std::ostream* log = nullptr;  // JSON lines
  std::function<void(const LossRecord&)> progress;
  std::filesystem::path divergence_snapshot;  // written before rethrowing
};

/// Runs the full schedule and returns the loss trace. Parameters end up
/// rounded to binary32 so the in-memory model matches its checkpoint.
std::vector<LossRecord> train(Model& model, const TrainConfig& cfg, const SelectionPolicy& policy,
                              const TargetConfig& targets, const EpisodeSource& source,
                              const TrainHooks& hooks = {});

struct InferConfig {
  double theta = 0.5;
  std::optional<double> final_nms;  // absolute override
  double min_score = 0.0;
  int max_window = 768;
  std::vector<int> windows{256, 512, 768};
  double overlap = 0.75;
  SelectionPolicy policy;
};

double final_nms_threshold(const InferConfig& cfg);

using PredictionSet = std::vector<ScoredSegment>;

/// Detection confidence is the conditioned probability times the
/// proposal's activityness. Supports are put into a canonical order
/// first, so the result does not depend on the order they were given in.
PredictionSet infer(Model& model, const EpisodeTensors& ep, const InferConfig& cfg);

/// Sliding-window inference; queries no longer than max_window go
/// straight to infer().
PredictionSet infer_long(Model& model, const EpisodeTensors& ep, const InferConfig& cfg);

/// Query rows covering frames [window.start, window.end).
diff::Matrix crop_query(const ModelConfig& cfg, const diff::Matrix& query,
                        const TemporalSegment& window);

nlohmann::ordered_json to_json(const PredictionSet& p);

}  // namespace fscal
