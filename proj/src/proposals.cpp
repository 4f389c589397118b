#include "fscal/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fscal/error.hpp"
#include "fscal/features.hpp"

namespace fscal {

using diff::Matrix;
using diff::Var;

void validate(const AnchorConfig& cfg) {
  require(cfg.stride >= 1, "anchors: stride must be >= 1");
  require(!cfg.scales.empty(), "anchors: need at least one scale");
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    require(cfg.scales[i] > 0.0, "anchors: scales must be positive");
    if (i > 0) require(cfg.scales[i] > cfg.scales[i - 1], "anchors: scales must be ascending");
  }
}

std::vector<TemporalSegment> generate_anchors(int num_steps, const AnchorConfig& cfg) {
  validate(cfg);
  require(num_steps >= 1, "generate_anchors: num_steps must be >= 1");
  const double extent = static_cast<double>(num_steps) * cfg.stride;
  std::vector<TemporalSegment> out;
  out.reserve(static_cast<std::size_t>(num_steps) * cfg.scales.size());
  for (int i = 0; i < num_steps; ++i) {
    const double c = static_cast<double>(i) * cfg.stride;
    for (double len : cfg.scales) {
      out.push_back({std::max(0.0, c - 0.5 * len), std::min(extent, c + 0.5 * len)});
    }
  }
  return out;
}

void add_proposal_head(diff::ParameterStore& store, int channels, int hidden, Rng& rng,
                       diff::Init init) {
  diff::add_linear(store, "proposal.hidden", 3 * channels, hidden, rng, init);
  diff::add_linear(store, "proposal.score", hidden, 1, rng, init);
  diff::add_linear(store, "proposal.reg", hidden, 2, rng, init);
}

Matrix context_pooling(std::span<const TemporalSegment> anchors, int stride, int num_steps,
                       double side) {
  const double extent = static_cast<double>(num_steps) * stride;
  Matrix pool = Matrix::Zero(static_cast<Eigen::Index>(anchors.size()), num_steps);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double w = anchors[i].length();
    TemporalSegment c = side < 0 ? TemporalSegment{anchors[i].start - w, anchors[i].start}
                                 : TemporalSegment{anchors[i].end, anchors[i].end + w};
    c.start = std::clamp(c.start, 0.0, extent);
    c.end = std::clamp(c.end, 0.0, extent);
    if (c.length() < 0.5 * stride) continue;  // flank lies outside the video
    const auto [lo, hi] = step_range(c, stride, num_steps);
    for (int t = lo; t < hi; ++t) pool(static_cast<Eigen::Index>(i), t) = 1.0 / (hi - lo);
  }
  return pool;
}

ProposalOutputs proposal_forward(diff::Tape& tape, diff::ParameterStore& store, Var features,
                                 std::span<const TemporalSegment> anchors, int stride,
                                 double num_frames) {
  require(!anchors.empty(), "proposal_forward: no anchors");
  const auto steps = static_cast<int>(features.rows());
  Var inside = pool_segments(features, anchors, stride);
  Var left = diff::matmul(tape.constant(context_pooling(anchors, stride, steps, -1.0)), features);
  Var right = diff::matmul(tape.constant(context_pooling(anchors, stride, steps, +1.0)), features);
  Var pooled = diff::hstack({inside, left, right});
  Var hidden = diff::relu(diff::linear(pooled, diff::bind_linear(tape, store, "proposal.hidden")));

  ProposalOutputs out;
  out.logits = diff::linear(hidden, diff::bind_linear(tape, store, "proposal.score"));
  out.offsets = diff::linear(hidden, diff::bind_linear(tape, store, "proposal.reg"));
  const Matrix& lg = out.logits.value();
  const Matrix& off = out.offsets.value();
  out.scores.resize(anchors.size());
  out.decoded.resize(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.scores[i] = 1.0 / (1.0 + std::exp(-lg(r, 0)));
    const auto d = decode_offsets(anchors[i], {off(r, 0), off(r, 1)});
    out.decoded[i] = clip_segment(d.segment, num_frames);
  }
  return out;
}

std::vector<AnchorTarget> assign_targets(std::span<const TemporalSegment> anchors,
                                         std::span<const TemporalSegment> gts, double pos_thresh,
                                         double neg_thresh) {
  require(!anchors.empty(), "assign_targets: no anchors");
  std::vector<AnchorTarget> out(anchors.size());
  if (gts.empty()) return out;

  std::vector<double> best_iou(anchors.size(), 0.0);
  std::vector<std::size_t> best_gt(anchors.size(), 0);
  std::vector<double> gt_best(gts.size(), 0.0);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = tiou(anchors[a], gts[g]);
      if (o > best_iou[a]) {
        best_iou[a] = o;
        best_gt[a] = g;
      }
      gt_best[g] = std::max(gt_best[g], o);
    }
  }
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    int label = kIgnore;
    if (best_iou[a] >= pos_thresh) {
      label = 1;
    } else if (best_iou[a] <= neg_thresh) {
      label = 0;
    }
    // Every GT keeps its best anchor(s) as positives.
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_best[g] > 0.0 && tiou(anchors[a], gts[g]) == gt_best[g]) label = 1;
    }
    out[a].label = label;
    if (label == 1) out[a].offsets = encode_offsets(anchors[a], gts[best_gt[a]]);
  }
  return out;
}

std::size_t ProposalSelection::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
}

ProposalSelection select_proposals(std::span<const ScoredSegment> candidates, SelectPhase phase,
                                   const SelectionPolicy& policy) {
  if (candidates.empty()) {
    throw ContractViolation("select_proposals: no proposals generated (video shorter than the smallest anchor?)");
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return candidates[i].score > candidates[j].score;
  });

  std::vector<std::size_t> survivors;
  for (std::size_t i : order) {
    if (candidates[i].score >= policy.score_threshold) survivors.push_back(i);
  }
  if (static_cast<int>(survivors.size()) < policy.min_keep) {
    const std::size_t k = std::min<std::size_t>(order.size(), static_cast<std::size_t>(policy.min_keep));
    survivors.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }

  std::vector<ScoredSegment> pool;
  pool.reserve(survivors.size());
  for (std::size_t i : survivors) pool.push_back(candidates[i]);
  const std::vector<std::size_t> kept = nms_indices(pool, policy.nms_threshold);

  const int count = phase == SelectPhase::Train ? policy.train_count : policy.eval_count;
  ProposalSelection sel;
  for (std::size_t k = 0; k < kept.size() && static_cast<int>(sel.size()) < count; ++k) {
    const std::size_t src = survivors[kept[k]];
    sel.source.push_back(static_cast<int>(src));
    sel.segments.push_back(candidates[src].segment);
    sel.scores.push_back(candidates[src].score);
    sel.valid.push_back(true);
  }
  while (static_cast<int>(sel.size()) < count) {
    sel.source.push_back(sel.source.front());
    sel.segments.push_back(sel.segments.front());
    sel.scores.push_back(sel.scores.front());
    sel.valid.push_back(false);
  }
  return sel;
}

}  // namespace fscal
