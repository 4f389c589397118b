#include "fscal/heads.hpp"

#include <algorithm>
#include <cmath>

#include "fscal/error.hpp"

namespace fscal {

using diff::Matrix;
using diff::Var;

void add_heads(diff::ParameterStore& store, int channels, Rng& rng, diff::Init init) {
  diff::add_linear(store, "head.cls", channels, 1, rng, init);
  diff::add_linear(store, "head.reg", channels, 2, rng, init);
}

HeadOutputs classify_and_regress(diff::Tape& tape, diff::ParameterStore& store, Var fused) {
  HeadOutputs out;
  out.logits = diff::linear(fused, diff::bind_linear(tape, store, "head.cls"));
  out.offsets = diff::linear(fused, diff::bind_linear(tape, store, "head.reg"));
  const Matrix& lg = out.logits.value();
  out.probs.resize(static_cast<std::size_t>(lg.rows()));
  for (Eigen::Index i = 0; i < lg.rows(); ++i) {
    out.probs[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-lg(i, 0)));
  }
  return out;
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

namespace {

// BCE on a logit, in the overflow-free form.
double bce_logit(double x, double y) {
  return std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

LossValue joint_loss(Var logits, Var offsets, const LossTargets& targets,
                     const std::vector<bool>& valid, double n_cls, double n_reg) {
  const auto R = logits.rows();
  require(logits.cols() == 1 && offsets.cols() == 2 && offsets.rows() == R,
          "joint_loss: expected R x 1 logits and R x 2 offsets");
  require(static_cast<Eigen::Index>(targets.size()) == R, "joint_loss: one target per proposal");
  require(valid.empty() || static_cast<Eigen::Index>(valid.size()) == R,
          "joint_loss: mask length must equal R");
  require(n_cls > 0.0 && n_reg > 0.0, "joint_loss: normalizers must be positive");

  const Matrix& lg = logits.value();
  const Matrix& off = offsets.value();
  Matrix g_logits = Matrix::Zero(R, 1);
  Matrix g_offsets = Matrix::Zero(R, 2);
  double cls = 0.0;
  double reg = 0.0;
  for (Eigen::Index i = 0; i < R; ++i) {
    const auto& t = targets[static_cast<std::size_t>(i)];
    if (t.label == kIgnore) continue;
    if (!valid.empty() && !valid[static_cast<std::size_t>(i)]) continue;
    const double y = t.label == 1 ? 1.0 : 0.0;
    cls += bce_logit(lg(i, 0), y);
    g_logits(i, 0) = (sigmoid(lg(i, 0)) - y) / n_cls;
    if (t.label != 1) continue;
    const double d[2] = {off(i, 0) - t.offsets.delta_center, off(i, 1) - t.offsets.delta_length};
    for (int k = 0; k < 2; ++k) {
      reg += smooth_l1(d[k]);
      g_offsets(i, k) = std::clamp(d[k], -1.0, 1.0) / n_reg;
    }
  }
  LossValue out;
  out.cls = cls / n_cls;
  out.reg = reg / n_reg;
  const double total = out.cls + out.reg;
  if (!std::isfinite(total)) {
    throw DivergenceError("joint_loss: non-finite loss (cls=" + std::to_string(out.cls) +
                          ", reg=" + std::to_string(out.reg) + ")");
  }
  Matrix value(1, 1);
  value(0, 0) = total;
  diff::Tape& tape = *logits.tape();
  out.total = tape.record(std::move(value), {logits, offsets},
                          [logits, offsets, g_logits, g_offsets](diff::Tape& t, const Matrix& g) {
                            t.accumulate(logits, g(0, 0) * g_logits);
                            t.accumulate(offsets, g(0, 0) * g_offsets);
                          });
  return out;
}

LossTargets build_conditioned_targets(std::span<const TemporalSegment> proposals,
                                      std::span<const TemporalSegment> gts, double pos_thresh,
                                      double neg_thresh) {
  LossTargets out(proposals.size());
  if (gts.empty()) return out;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = tiou(proposals[i], gts[g]);
      if (o > best) {
        best = o;
        best_g = g;
      }
    }
    if (best >= pos_thresh) {
      out[i].label = 1;
      out[i].offsets = encode_offsets(proposals[i], gts[best_g]);
    } else if (best < neg_thresh) {
      out[i].label = 0;
    } else {
      out[i].label = kIgnore;
    }
  }
  return out;
}

}  // namespace fscal
