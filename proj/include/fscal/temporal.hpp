#pragma once

// Temporal interval geometry: overlap, suppression, offset coding and
// multi-scale window generation. Everything here is a pure function.

#include <span>
#include <vector>

namespace fscal {

/// Closed interval [start, end] in frame units.
struct TemporalSegment {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  double center() const { return 0.5 * (start + end); }
  bool valid() const;

  bool operator==(const TemporalSegment&) const = default;
};

struct ScoredSegment {
  TemporalSegment segment;
  double score = 0.0;

  bool operator==(const ScoredSegment&) const = default;
};

/// Regression target of a segment relative to a reference proposal.
struct OffsetPair {
  double delta_center = 0.0;
  double delta_length = 0.0;  // log-ratio of lengths

  bool operator==(const OffsetPair&) const = default;
};

/// Throws ContractViolation unless start < end, both finite and >= 0.
void validate(const TemporalSegment& s);

double tiou(const TemporalSegment& a, const TemporalSegment& b);

/// Greedy NMS. Output sorted by descending score; ties broken by earlier
/// start, then by input index.
std::vector<ScoredSegment> nms(std::span<const ScoredSegment> candidates, double threshold);

/// Same as nms() but returns the kept input indices in output order.
std::vector<std::size_t> nms_indices(std::span<const ScoredSegment> candidates, double threshold);

OffsetPair encode_offsets(const TemporalSegment& proposal, const TemporalSegment& target);

struct DecodedSegment {
  TemporalSegment segment;
  bool clamped = false;  // decoded length fell below the 1-frame minimum
};

DecodedSegment decode_offsets(const TemporalSegment& proposal, const OffsetPair& offsets);

/// Clip into [0, limit], keeping at least `min_length` frames.
TemporalSegment clip_segment(const TemporalSegment& s, double limit, double min_length = 1.0);

/// Multi-scale sliding windows over [0, num_frames]. Lengths longer than
/// the video are skipped; if none fit, the whole video is one window.
std::vector<TemporalSegment> sliding_windows(int num_frames, std::span<const int> window_lengths,
                                             double overlap);

}  // namespace fscal
