#pragma once

// Support/query alignment: cross-attention basic block, mutual
// enhancement, progressive alignment with a recalibrating residual block,
// and cosine/distance pairwise matching that reweighs the aligned
// proposal features.
//
// Shapes: F_Q is R x C (one row per proposal). Support features are kept
// flat as (S*T) x C with support s occupying rows [s*T, (s+1)*T).

#include <string>
#include <vector>

#include "fscal/diff.hpp"

namespace fscal {

struct AlignmentDims {
  int channels = 64;      // C
  int attn_width = 0;     // d, 0 means C/2
  int value_width = 0;    // d_v, 0 means C/2
  int reduction = 4;      // r of the residual block
  int depth = 3;          // progressive alignment depth n
  bool scale_attention = false;  // divide logits by sqrt(d)

  int d() const { return attn_width > 0 ? attn_width : channels / 2; }
  int dv() const { return value_width > 0 ? value_width : channels / 2; }
};

/// Throws ConfigError on inconsistent dims (e.g. C not divisible by r).
void validate(const AlignmentDims& dims);

struct BasicBlockParams {
  diff::LinearMap c1;  // dv -> C
  diff::LinearMap c2;  // C -> d  (applied to I1)
  diff::LinearMap c3;  // C -> d  (applied to I2)
  diff::LinearMap c4;  // C -> dv (applied to I2)
};

struct ResidualBlockParams {
  diff::LinearMap c1;  // C/r -> C
  diff::LinearMap c2;  // C -> C/r
};

/// How the output projections (c1 of every block) start out. Zero makes
/// the stack an exact identity on F_Q at initialization.
enum class OutputInit { Xavier, Zero };

void add_basic_block(diff::ParameterStore& store, const std::string& prefix,
                     const AlignmentDims& dims, Rng& rng, OutputInit out = OutputInit::Xavier);
void add_residual_block(diff::ParameterStore& store, const std::string& prefix,
                        const AlignmentDims& dims, Rng& rng, OutputInit out = OutputInit::Xavier);

/// Registers mem.sq.*, mem.qs.*, pam.k{0..n-1}.*, pam.res.*.
void add_alignment(diff::ParameterStore& store, const AlignmentDims& dims, Rng& rng,
                   OutputInit out = OutputInit::Zero);

std::size_t basic_block_param_count(const AlignmentDims& dims);
std::size_t residual_block_param_count(const AlignmentDims& dims);

BasicBlockParams bind_basic_block(diff::Tape& tape, diff::ParameterStore& store,
                                  const std::string& prefix);
ResidualBlockParams bind_residual_block(diff::Tape& tape, diff::ParameterStore& store,
                                        const std::string& prefix);

/// c1(softmax_rows(c2(I1) c3(I2)^T) c4(I2)) + I1, softmax over I2's rows.
diff::Var basic_block(diff::Var i1, diff::Var i2, const BasicBlockParams& p,
                      bool scale_attention = false);

struct Enhanced {
  diff::Var query;    // m_sq: R x C
  diff::Var support;  // m_qs: (S*T) x C
};

Enhanced mutual_enhance(diff::Var fq, diff::Var fs_flat, const BasicBlockParams& sq,
                        const BasicBlockParams& qs, bool scale_attention = false);

/// c1(relu(c2(I))) + I
diff::Var residual_block(diff::Var input, const ResidualBlockParams& p);

/// P_0 = m_sq; P_k = basic_block(P_{k-1}, residual_block(m_qs)).
diff::Var progressive_align(diff::Var m_sq, diff::Var m_qs, const std::vector<BasicBlockParams>& steps,
                            const ResidualBlockParams& res, bool scale_attention = false);

struct MatchResult {
  diff::Var weights;         // W: S x R
  int zero_norm_pairs = 0;   // pairs whose cosine was defined as 0
};

/// W[s, r] = cos(P_n[r], p_s) * sigmoid(-||P_n[r] - p_s||) with p_s the
/// temporal mean of support s in m_qs.
MatchResult pairwise_match(diff::Var pn, diff::Var m_qs, int supports, int parts);

/// P_n scaled per row by the support-mean of W.
diff::Var fuse(diff::Var pn, diff::Var weights);

struct AlignmentOutput {
  diff::Var fused;    // R x C
  diff::Var weights;  // S x R
  diff::Var pn;
  diff::Var m_sq;
  diff::Var m_qs;
  int zero_norm_pairs = 0;
};

/// The full mapping F = phi(F_Q, F_S) using parameters registered by
/// add_alignment().
AlignmentOutput align(diff::Tape& tape, diff::ParameterStore& store, const AlignmentDims& dims,
                      diff::Var fq, diff::Var fs_flat, int supports, int parts);

}  // namespace fscal
