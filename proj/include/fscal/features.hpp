#pragma once

// Backbone providers and the pooling that turns step features into
// per-proposal (F_Q) and per-support-part (F_S) representations.

#include <span>
#include <utility>
#include <vector>

#include "fscal/diff.hpp"
#include "fscal/temporal.hpp"

namespace fscal {

enum class BackboneKind {
  Passthrough,      // inputs already are step features (synthetic, precomputed)
  TemporalEncoder,  // tiny trainable temporal conv stack over frame descriptors
};

struct BackboneConfig {
  BackboneKind kind = BackboneKind::Passthrough;
  int input_channels = 64;  // frame descriptor width (encoder only)
  int channels = 64;        // C
  int stride = 8;           // frames per output step
};

/// Registers `backbone.*` parameters. No-op for the passthrough provider.
void add_backbone(diff::ParameterStore& store, const BackboneConfig& cfg, Rng& rng);

/// Step feature map (num_steps x C). The encoder consumes frames x
/// input_channels and emits ceil(frames / stride) steps; passthrough
/// returns `input` as a constant.
diff::Var encode_query(diff::Tape& tape, diff::ParameterStore& store, const BackboneConfig& cfg,
                       const diff::Matrix& input);

struct PartSplit {
  std::vector<std::pair<int, int>> parts;  // [begin, end) step ranges
  bool duplicated = false;                 // fewer steps than parts
};

/// Contiguous parts; the first (length % parts) parts are one step longer.
PartSplit split_parts(int length, int parts);

struct SupportEncoding {
  diff::Var parts;  // T x C
  bool duplicated = false;
};

/// Encodes a trimmed support video with the shared backbone and mean-pools
/// each of its T parts.
SupportEncoding encode_support(diff::Tape& tape, diff::ParameterStore& store,
                               const BackboneConfig& cfg, const diff::Matrix& input, int parts);

/// A static video made of `length` copies of one frame (or feature row).
diff::Matrix inflate_image(const diff::Matrix& row, int length);

/// Steps [begin, end) whose centres fall inside `seg`; never empty.
std::pair<int, int> step_range(const TemporalSegment& seg, int stride, int num_steps);

/// Segments x num_steps averaging matrix.
diff::Matrix pooling_matrix(std::span<const TemporalSegment> segs, int stride, int num_steps);

/// Mean of step features inside each segment: segments x C.
diff::Var pool_segments(diff::Var steps, std::span<const TemporalSegment> segs, int stride);

}  // namespace fscal
