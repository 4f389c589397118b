#include "fscal/features.hpp"

#include <algorithm>
#include <cmath>

#include "fscal/error.hpp"

namespace fscal {

using diff::Matrix;
using diff::Var;

void add_backbone(diff::ParameterStore& store, const BackboneConfig& cfg, Rng& rng) {
  if (cfg.kind == BackboneKind::Passthrough) return;
  require(cfg.stride >= 1 && cfg.input_channels >= 1 && cfg.channels >= 1,
          "backbone: invalid dimensions");
  diff::add_linear(store, "backbone.conv1", cfg.stride * cfg.input_channels, cfg.channels, rng);
  diff::add_linear(store, "backbone.conv2.prev", cfg.channels, cfg.channels, rng);
  diff::add_linear(store, "backbone.conv2.cur", cfg.channels, cfg.channels, rng);
  diff::add_linear(store, "backbone.conv2.next", cfg.channels, cfg.channels, rng);
}

namespace {

Matrix shift_matrix(int n, int offset) {
  Matrix s = Matrix::Zero(n, n);
  for (int t = 0; t < n; ++t) {
    s(t, std::clamp(t + offset, 0, n - 1)) = 1.0;
  }
  return s;
}

}  // namespace

Var encode_query(diff::Tape& tape, diff::ParameterStore& store, const BackboneConfig& cfg,
                 const Matrix& input) {
  require(input.rows() >= 1, "encode: empty input");
  if (cfg.kind == BackboneKind::Passthrough) {
    require(input.cols() == cfg.channels, "encode: passthrough features must have C channels");
    return tape.constant(input);
  }
  require(input.cols() == cfg.input_channels, "encode: frame descriptor width mismatch");

  // Stride-s temporal convolution with kernel s: unfold s frames per step,
  // padding the tail by repeating the last frame.
  const auto frames = static_cast<int>(input.rows());
  const int steps = (frames + cfg.stride - 1) / cfg.stride;
  Matrix unfolded(steps, cfg.stride * cfg.input_channels);
  for (int t = 0; t < steps; ++t) {
    for (int k = 0; k < cfg.stride; ++k) {
      const int f = std::min(frames - 1, t * cfg.stride + k);
      unfolded.block(t, k * cfg.input_channels, 1, cfg.input_channels) = input.row(f);
    }
  }
  Var x = diff::relu(diff::linear(tape.constant(std::move(unfolded)),
                                  diff::bind_linear(tape, store, "backbone.conv1")));

  // Kernel-3 convolution with edge padding, as a residual refinement.
  Var prev = diff::matmul(tape.constant(shift_matrix(steps, -1)), x);
  Var next = diff::matmul(tape.constant(shift_matrix(steps, +1)), x);
  Var conv = diff::add(diff::linear(prev, diff::bind_linear(tape, store, "backbone.conv2.prev")),
                       diff::linear(x, diff::bind_linear(tape, store, "backbone.conv2.cur")));
  conv = diff::add(conv, diff::linear(next, diff::bind_linear(tape, store, "backbone.conv2.next")));
  return diff::add(x, diff::relu(conv));
}

PartSplit split_parts(int length, int parts) {
  require(length >= 1 && parts >= 1, "split_parts: length and parts must be positive");
  PartSplit out;
  if (length < parts) {
    out.duplicated = true;
    for (int k = 0; k < parts; ++k) {
      const int s = static_cast<int>(static_cast<long long>(k) * length / parts);
      out.parts.emplace_back(s, s + 1);
    }
    return out;
  }
  const int base = length / parts;
  const int rem = length % parts;
  int begin = 0;
  for (int k = 0; k < parts; ++k) {
    const int len = base + (k < rem ? 1 : 0);
    out.parts.emplace_back(begin, begin + len);
    begin += len;
  }
  return out;
}

SupportEncoding encode_support(diff::Tape& tape, diff::ParameterStore& store,
                               const BackboneConfig& cfg, const Matrix& input, int parts) {
  Var steps = encode_query(tape, store, cfg, input);
  const PartSplit split = split_parts(static_cast<int>(steps.rows()), parts);
  Matrix pool = Matrix::Zero(parts, steps.rows());
  for (int k = 0; k < parts; ++k) {
    const auto [b, e] = split.parts[k];
    for (int t = b; t < e; ++t) pool(k, t) = 1.0 / (e - b);
  }
  return {diff::matmul(tape.constant(std::move(pool)), steps), split.duplicated};
}

Matrix inflate_image(const Matrix& row, int length) {
  require(row.rows() == 1, "inflate_image: expected a single frame");
  require(length >= 1, "inflate_image: length must be positive");
  return row.replicate(length, 1);
}

std::pair<int, int> step_range(const TemporalSegment& seg, int stride, int num_steps) {
  require(num_steps >= 1 && stride >= 1, "step_range: invalid feature map");
  // Step t is inside when start <= (t + 0.5) * stride < end.
  int lo = static_cast<int>(std::ceil(seg.start / stride - 0.5));
  int hi = static_cast<int>(std::ceil(seg.end / stride - 0.5));
  lo = std::clamp(lo, 0, num_steps);
  hi = std::clamp(hi, 0, num_steps);
  if (hi <= lo) {
    const int c = std::clamp(static_cast<int>(std::floor(seg.center() / stride)), 0, num_steps - 1);
    return {c, c + 1};
  }
  return {lo, hi};
}

Matrix pooling_matrix(std::span<const TemporalSegment> segs, int stride, int num_steps) {
  Matrix pool = Matrix::Zero(static_cast<Eigen::Index>(segs.size()), num_steps);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto [lo, hi] = step_range(segs[i], stride, num_steps);
    for (int t = lo; t < hi; ++t) pool(static_cast<Eigen::Index>(i), t) = 1.0 / (hi - lo);
  }
  return pool;
}

Var pool_segments(Var steps, std::span<const TemporalSegment> segs, int stride) {
  diff::Tape& tape = *steps.tape();
  return diff::matmul(tape.constant(pooling_matrix(segs, stride, static_cast<int>(steps.rows()))),
                      steps);
}

}  // namespace fscal
