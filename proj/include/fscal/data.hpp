#pragma once

// Annotation ingestion, dataset reorganization into class-disjoint
// phases, few-shot episode sampling and the synthetic episode generator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "fscal/diff.hpp"
#include "fscal/temporal.hpp"

namespace fscal {

struct ActionInstance {
  std::string label;
  TemporalSegment segment;  // frames, relative to the owning video

  bool operator==(const ActionInstance&) const = default;
};

struct AnnotatedVideo {
  std::string video_id;
  int num_frames = 0;
  double fps = 0.0;
  std::vector<ActionInstance> instances;
  // Derived videos remember where they came from in the source video.
  std::string source_id;
  double source_offset = 0.0;

  bool operator==(const AnnotatedVideo&) const = default;
};

enum class AnnotationFormat { ActivityNet, Thumos };
enum class Dataset { ActivityNet, Thumos };
enum class Phase { Train = 0, Val = 1, Test = 2 };

const char* phase_name(Phase p);
Phase parse_phase(const std::string& s);

struct IngestResult {
  std::vector<AnnotatedVideo> videos;  // sorted by video_id
  std::vector<std::string> warnings;
};

/// ActivityNet-style: JSON object (optionally under "database") mapping
/// video_id -> {num_frames | duration, fps, annotations: [{label, segment}]}.
/// Thumos-style: one instance per line,
///   video_id label start_sec end_sec num_frames fps
/// separated by commas or whitespace; '#' starts a comment.
IngestResult ingest_annotations(const std::filesystem::path& path, AnnotationFormat format);
IngestResult parse_activitynet(const std::string& text);
IngestResult parse_thumos(const std::string& text);

std::set<std::string> class_labels(const std::vector<AnnotatedVideo>& videos);

struct ClassSplit {
  std::vector<std::string> train, val, test;  // each sorted

  const std::vector<std::string>& classes(Phase p) const;
  std::optional<Phase> phase_of(const std::string& label) const;
};

struct FixedSplitLists {
  const std::vector<std::string>& train;
  const std::vector<std::string>& val;
  const std::vector<std::string>& test;
};

const FixedSplitLists& fixed_split_lists(Dataset dataset);

enum class SplitMode { Fixed, Random };

/// Random mode: seeded 80/10/10 partition. Fixed mode: the published
/// subset tables for `dataset`; every input class must be listed and
/// every listed class must be present.
ClassSplit split_classes(const std::set<std::string>& classes, SplitMode mode, std::uint64_t seed,
                         Dataset dataset = Dataset::ActivityNet);

struct PhaseData {
  std::array<std::vector<AnnotatedVideo>, 3> videos;

  std::vector<AnnotatedVideo>& operator[](Phase p) { return videos[static_cast<int>(p)]; }
  const std::vector<AnnotatedVideo>& operator[](Phase p) const {
    return videos[static_cast<int>(p)];
  }
};

struct ReorganizeStats {
  std::size_t derived = 0;
  std::size_t discarded_long = 0;
  std::size_t discarded_overlap = 0;
  std::size_t discarded_unsplit = 0;
};

/// One derived video per instance: the instance plus background up to the
/// midpoint toward each neighbouring instance. Derived videos longer than
/// `max_frames` are dropped. Instances overlapping another instance cannot
/// be isolated and are dropped.
PhaseData reorganize_common_instance(const std::vector<AnnotatedVideo>& videos,
                                     const ClassSplit& split, int max_frames = 768,
                                     ReorganizeStats* stats = nullptr);

/// Whole videos, assigned to the phase of their majority class (ties go
/// to train). Instances of classes outside the split are kept as
/// unlabeled background.
PhaseData reorganize_multi_instance(const std::vector<AnnotatedVideo>& videos,
                                    const ClassSplit& split, ReorganizeStats* stats = nullptr);

nlohmann::ordered_json split_manifest(const ClassSplit& split, const PhaseData& data,
                                      const nlohmann::ordered_json& meta);

struct LoadedManifest {
  ClassSplit split;
  PhaseData data;
};

/// Inverse of split_manifest(). Throws ParseError on malformed input.
LoadedManifest load_manifest(const std::string& text);

// ---- episodes ---------------------------------------------------------------

/// A trimmed support clip: one instance cut out of a phase video.
struct SupportClip {
  std::string video_id;
  std::string label;
  TemporalSegment segment;  // frames within video_id
  bool noisy = false;
  bool image = false;

  bool operator==(const SupportClip&) const = default;
};

struct Episode {
  Phase phase = Phase::Train;
  std::vector<SupportClip> supports;
  std::size_t query_index = 0;  // into the phase's video list
  std::string query_id;
  std::string common_class;
  std::vector<TemporalSegment> gt_segments;

  bool operator==(const Episode&) const = default;
};

nlohmann::ordered_json to_json(const Episode& e);

struct EpisodeOptions {
  int supports = 5;
  int noisy_count = 0;
  bool noisy_same_class = false;
  bool image_support = false;
};

/// Draws few-shot episodes from reorganized phase data. Train episodes
/// come from an advancing seeded stream; val/test episodes are a pure
/// function of (phase, index).
class EpisodeSampler {
 public:
  EpisodeSampler(const PhaseData& data, const ClassSplit& split, std::uint64_t seed);

  Episode next_train(const EpisodeOptions& opts);
  Episode fixed(Phase phase, std::uint64_t index, const EpisodeOptions& opts) const;

  const AnnotatedVideo& query_video(const Episode& e) const;

 private:
  Episode draw(Phase phase, std::uint64_t episode_seed, const EpisodeOptions& opts) const;

  const PhaseData& data_;
  const ClassSplit& split_;
  std::uint64_t seed_;
  std::uint64_t train_counter_ = 0;
};

// ---- synthetic episodes -------------------------------------------------------

struct SyntheticConfig {
  int supports = 5;
  int channels = 64;
  int num_gt = 1;
  int num_frames = 768;
  double noise_std = 0.25;
  std::uint64_t seed = 0;
  int stride = 8;
  double gt_min_frames = 96;
  double gt_max_frames = 320;
  int support_min_steps = 8;
  int support_max_steps = 24;
  // Weight of the direction shared by every action class (what makes
  // class-agnostic activityness learnable).
  double activity_share = 0.5;
  // Instances of other classes planted in the query.
  int distractors = 0;
  int noisy_count = 0;
  bool noisy_same_class = false;
  bool image_support = false;
};

struct SyntheticEpisode {
  diff::Matrix query;                  // num_steps x C, passthrough features
  std::vector<diff::Matrix> supports;  // per support: steps x C
  std::vector<bool> noisy;
  std::vector<TemporalSegment> gt_segments;
  std::vector<TemporalSegment> distractor_segments;
  Eigen::VectorXd embedding;
  int num_frames = 0;
  int stride = 8;
};

SyntheticEpisode synthesize_episode(const SyntheticConfig& config);

/// True when step t (covering frames [t*stride, (t+1)*stride)) has its
/// centre inside `s`.
bool step_inside(int step, int stride, const TemporalSegment& s);

}  // namespace fscal
