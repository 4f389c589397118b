#pragma once

// Class-agnostic proposal subnet: anchors over the query feature map, an
// activityness/offset head, training-target assignment and the fixed-size
// proposal selection used by training and inference.

#include <span>
#include <vector>

#include "fscal/diff.hpp"
#include "fscal/temporal.hpp"

namespace fscal {

struct AnchorConfig {
  std::vector<double> scales{32, 64, 128, 256, 512};  // frames, ascending
  int stride = 8;                                     // frames between centres
};

void validate(const AnchorConfig& cfg);

/// One anchor per (centre step, scale), centre at step * stride, clipped to
/// [0, num_steps * stride]. Position-major, then scale.
std::vector<TemporalSegment> generate_anchors(int num_steps, const AnchorConfig& cfg);

/// Registers proposal.hidden.* (3C -> H), proposal.score.* (H -> 1) and
/// proposal.reg.* (H -> 2).
void add_proposal_head(diff::ParameterStore& store, int channels, int hidden, Rng& rng,
                       diff::Init init = diff::Init::Xavier);

struct ProposalOutputs {
  diff::Var logits;   // A x 1 activityness logits
  diff::Var offsets;  // A x 2 predicted (delta_center, delta_length)
  std::vector<double> scores;            // sigmoid(logits)
  std::vector<TemporalSegment> decoded;  // offset-decoded, clipped anchors
};

/// Averaging matrix over each anchor's flank of its own length, clipped
/// to the video (zero row when nothing remains). `side` < 0 is the left
/// flank, otherwise the right.
diff::Matrix context_pooling(std::span<const TemporalSegment> anchors, int stride, int num_steps,
                             double side);

/// Scores and regresses every anchor from its inside mean next to the
/// means of its two flanks.
ProposalOutputs proposal_forward(diff::Tape& tape, diff::ParameterStore& store, diff::Var features,
                                 std::span<const TemporalSegment> anchors, int stride,
                                 double num_frames);

inline constexpr int kIgnore = -1;

struct AnchorTarget {
  int label = 0;  // 1, 0 or kIgnore
  OffsetPair offsets;  // toward the best-overlapping GT, positives only
};

std::vector<AnchorTarget> assign_targets(std::span<const TemporalSegment> anchors,
                                         std::span<const TemporalSegment> gts, double pos_thresh = 0.7,
                                         double neg_thresh = 0.3);

struct SelectionPolicy {
  double score_threshold = 0.7;
  int min_keep = 16;
  double nms_threshold = 0.7;
  int train_count = 128;
  int eval_count = 300;
};

enum class SelectPhase { Train, Eval };

/// Fixed-size proposal set. Entries past the real survivors duplicate
/// the top proposal and carry valid = false.
struct ProposalSelection {
  std::vector<int> source;  // candidate index per slot
  std::vector<TemporalSegment> segments;
  std::vector<double> scores;
  std::vector<bool> valid;

  std::size_t size() const { return segments.size(); }
  std::size_t valid_count() const;
};

ProposalSelection select_proposals(std::span<const ScoredSegment> candidates, SelectPhase phase,
                                   const SelectionPolicy& policy = {});

}  // namespace fscal
