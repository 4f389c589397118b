#pragma once

// Support-conditioned classification/regression heads and the joint
// classification + gated regression loss shared by both training signals.

#include <span>
#include <vector>

#include "fscal/diff.hpp"
#include "fscal/proposals.hpp"
#include "fscal/temporal.hpp"

namespace fscal {

/// Registers head.cls.* (C -> 1) and head.reg.* (C -> 2).
void add_heads(diff::ParameterStore& store, int channels, Rng& rng,
               diff::Init init = diff::Init::Xavier);

struct HeadOutputs {
  diff::Var logits;   // R x 1
  diff::Var offsets;  // R x 2
  std::vector<double> probs;
};

HeadOutputs classify_and_regress(diff::Tape& tape, diff::ParameterStore& store, diff::Var fused);

/// Per-proposal labels in {1, 0, kIgnore}; offsets meaningful for label 1.
using LossTargets = std::vector<AnchorTarget>;

struct LossValue {
  diff::Var total;  // 1x1, differentiable
  double cls = 0.0;
  double reg = 0.0;
};

double smooth_l1(double x);

/// (1/n_cls) sum BCE(a_i, a*_i) + (1/n_reg) sum a*_i smoothL1(t_i - t*_i)
/// over entries that are valid and not ignored. `logits` is R x 1 and
/// `offsets` R x 2; an empty `valid` means every entry is valid. Throws
/// DivergenceError on a non-finite result.
LossValue joint_loss(diff::Var logits, diff::Var offsets, const LossTargets& targets,
                     const std::vector<bool>& valid, double n_cls, double n_reg);

/// Label 1 when the best tIoU with a GT reaches `pos_thresh`, 0 below
/// `neg_thresh`, ignore otherwise.
LossTargets build_conditioned_targets(std::span<const TemporalSegment> proposals,
                                      std::span<const TemporalSegment> gts,
                                      double pos_thresh = 0.5, double neg_thresh = 0.3);

}  // namespace fscal
