#include "fscal/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fscal/error.hpp"

namespace fscal {

bool TemporalSegment::valid() const {
  return std::isfinite(start) && std::isfinite(end) && start >= 0.0 && start < end;
}

void validate(const TemporalSegment& s) {
  if (!s.valid()) {
    throw ContractViolation("invalid segment [" + std::to_string(s.start) + ", " +
                            std::to_string(s.end) + "]");
  }
}

double tiou(const TemporalSegment& a, const TemporalSegment& b) {
  validate(a);
  validate(b);
  const double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

std::vector<std::size_t> nms_indices(std::span<const ScoredSegment> candidates, double threshold) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto& a = candidates[i];
    const auto& b = candidates[j];
    if (a.score != b.score) return a.score > b.score;
    if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
    return i < j;
  });

  std::vector<std::size_t> kept;
  std::vector<char> suppressed(candidates.size(), 0);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    kept.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && tiou(candidates[i].segment, candidates[j].segment) > threshold) {
        suppressed[j] = 1;
      }
    }
  }
  return kept;
}

std::vector<ScoredSegment> nms(std::span<const ScoredSegment> candidates, double threshold) {
  std::vector<ScoredSegment> out;
  for (std::size_t i : nms_indices(candidates, threshold)) out.push_back(candidates[i]);
  return out;
}

OffsetPair encode_offsets(const TemporalSegment& proposal, const TemporalSegment& target) {
  validate(proposal);
  validate(target);
  const double lp = proposal.length();
  return {(target.center() - proposal.center()) / lp, std::log(target.length() / lp)};
}

DecodedSegment decode_offsets(const TemporalSegment& proposal, const OffsetPair& offsets) {
  validate(proposal);
  const double lp = proposal.length();
  const double center = proposal.center() + offsets.delta_center * lp;
  double length = lp * std::exp(offsets.delta_length);
  DecodedSegment out;
  if (!(length >= 1.0) || !std::isfinite(length)) {
    length = 1.0;
    out.clamped = true;
  }
  out.segment = {center - 0.5 * length, center + 0.5 * length};
  return out;
}

TemporalSegment clip_segment(const TemporalSegment& s, double limit, double min_length) {
  double start = std::clamp(s.start, 0.0, limit);
  double end = std::clamp(s.end, 0.0, limit);
  if (end - start < min_length) {
    const double c = std::clamp(0.5 * (start + end), 0.5 * min_length, limit - 0.5 * min_length);
    start = std::max(0.0, c - 0.5 * min_length);
    end = std::min(limit, start + min_length);
  }
  return {start, end};
}

std::vector<TemporalSegment> sliding_windows(int num_frames, std::span<const int> window_lengths,
                                             double overlap) {
  require(num_frames >= 1, "sliding_windows: num_frames must be >= 1");
  require(overlap >= 0.0 && overlap < 1.0, "sliding_windows: overlap must lie in [0, 1)");

  std::vector<TemporalSegment> out;
  auto push_unique = [&](TemporalSegment w) {
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
  };

  const double total = num_frames;
  for (int len : window_lengths) {
    require(len >= 1, "sliding_windows: window length must be positive");
    if (len > num_frames) continue;
    const double stride = std::max(1.0, len * (1.0 - overlap));
    double last_end = 0.0;
    for (int k = 0;; ++k) {
      const double start = k * stride;
      if (start + len > total) break;
      push_unique({start, start + len});
      last_end = start + len;
    }
    if (last_end < total) push_unique({total - len, total});
  }
  if (out.empty()) out.push_back({0.0, total});
  return out;
}

}  // namespace fscal
