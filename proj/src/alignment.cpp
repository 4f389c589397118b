#include "fscal/alignment.hpp"

#include <cmath>

#include "fscal/error.hpp"

namespace fscal {

using diff::Matrix;
using diff::Var;

void validate(const AlignmentDims& dims) {
  if (dims.channels < 1 || dims.d() < 1 || dims.dv() < 1) {
    throw ConfigError("alignment: widths must be positive");
  }
  if (dims.reduction < 1 || dims.channels % dims.reduction != 0) {
    throw ConfigError("alignment: C=" + std::to_string(dims.channels) +
                      " is not divisible by reduction r=" + std::to_string(dims.reduction));
  }
  if (dims.depth < 1) throw ConfigError("alignment: depth n must be >= 1");
}

void add_basic_block(diff::ParameterStore& store, const std::string& prefix,
                     const AlignmentDims& dims, Rng& rng, OutputInit out) {
  const int c = dims.channels;
  diff::add_linear(store, prefix + ".c1", dims.dv(), c, rng,
                   out == OutputInit::Zero ? diff::Init::Zero : diff::Init::Xavier);
  diff::add_linear(store, prefix + ".c2", c, dims.d(), rng);
  diff::add_linear(store, prefix + ".c3", c, dims.d(), rng);
  diff::add_linear(store, prefix + ".c4", c, dims.dv(), rng);
}

void add_residual_block(diff::ParameterStore& store, const std::string& prefix,
                        const AlignmentDims& dims, Rng& rng, OutputInit out) {
  validate(dims);
  const int hidden = dims.channels / dims.reduction;
  diff::add_linear(store, prefix + ".c1", hidden, dims.channels, rng,
                   out == OutputInit::Zero ? diff::Init::Zero : diff::Init::Xavier);
  diff::add_linear(store, prefix + ".c2", dims.channels, hidden, rng);
}

void add_alignment(diff::ParameterStore& store, const AlignmentDims& dims, Rng& rng,
                   OutputInit out) {
  validate(dims);
  add_basic_block(store, "mem.sq", dims, rng, out);
  add_basic_block(store, "mem.qs", dims, rng, out);
  for (int k = 0; k < dims.depth; ++k) {
    add_basic_block(store, "pam.k" + std::to_string(k), dims, rng, out);
  }
  add_residual_block(store, "pam.res", dims, rng, out);
}

std::size_t basic_block_param_count(const AlignmentDims& dims) {
  const int c = dims.channels;
  return diff::linear_param_count(dims.dv(), c) + 2 * diff::linear_param_count(c, dims.d()) +
         diff::linear_param_count(c, dims.dv());
}

std::size_t residual_block_param_count(const AlignmentDims& dims) {
  const int hidden = dims.channels / dims.reduction;
  return diff::linear_param_count(hidden, dims.channels) +
         diff::linear_param_count(dims.channels, hidden);
}

BasicBlockParams bind_basic_block(diff::Tape& tape, diff::ParameterStore& store,
                                  const std::string& prefix) {
  return {diff::bind_linear(tape, store, prefix + ".c1"), diff::bind_linear(tape, store, prefix + ".c2"),
          diff::bind_linear(tape, store, prefix + ".c3"), diff::bind_linear(tape, store, prefix + ".c4")};
}

ResidualBlockParams bind_residual_block(diff::Tape& tape, diff::ParameterStore& store,
                                        const std::string& prefix) {
  return {diff::bind_linear(tape, store, prefix + ".c1"), diff::bind_linear(tape, store, prefix + ".c2")};
}

Var basic_block(Var i1, Var i2, const BasicBlockParams& p, bool scale_attention) {
  require(i1.cols() == i2.cols(), "basic_block: inputs must share the channel dimension");
  require(i1.cols() == p.c2.weight.rows() && p.c1.weight.cols() == i1.cols(),
          "basic_block: parameters do not match channel dimension");
  Var query = diff::linear(i1, p.c2);
  Var key = diff::linear(i2, p.c3);
  Var value = diff::linear(i2, p.c4);
  Var logits = diff::matmul_nt(query, key);
  if (scale_attention) logits = diff::scale(logits, 1.0 / std::sqrt(static_cast<double>(query.cols())));
  Var attention = diff::softmax_rows(logits);
  return diff::add(diff::linear(diff::matmul(attention, value), p.c1), i1);
}

Enhanced mutual_enhance(Var fq, Var fs_flat, const BasicBlockParams& sq, const BasicBlockParams& qs,
                        bool scale_attention) {
  return {basic_block(fq, fs_flat, sq, scale_attention), basic_block(fs_flat, fq, qs, scale_attention)};
}

Var residual_block(Var input, const ResidualBlockParams& p) {
  require(input.cols() == p.c2.weight.rows(), "residual_block: channel mismatch");
  return diff::add(diff::linear(diff::relu(diff::linear(input, p.c2)), p.c1), input);
}

Var progressive_align(Var m_sq, Var m_qs, const std::vector<BasicBlockParams>& steps,
                      const ResidualBlockParams& res, bool scale_attention) {
  require(!steps.empty(), "progressive_align: depth must be >= 1");
  // The recalibrated support is the same second operand at every depth.
  Var support = residual_block(m_qs, res);
  Var p = m_sq;
  for (const auto& step : steps) p = basic_block(p, support, step, scale_attention);
  return p;
}

MatchResult pairwise_match(Var pn, Var m_qs, int supports, int parts) {
  require(supports >= 1 && parts >= 1, "pairwise_match: S and T must be positive");
  require(m_qs.rows() == static_cast<Eigen::Index>(supports) * parts,
          "pairwise_match: support rows must equal S*T");
  require(pn.cols() == m_qs.cols(), "pairwise_match: channel mismatch");

  Var pooled = diff::mean_row_groups(m_qs, parts);  // S x C
  const Matrix& P = pn.value();
  const Matrix& Q = pooled.value();
  const Eigen::Index R = P.rows();
  const Eigen::Index S = Q.rows();

  const Eigen::VectorXd pnorm = P.rowwise().norm();
  const Eigen::VectorXd qnorm = Q.rowwise().norm();
  Matrix cosine = Matrix::Zero(S, R);
  Matrix dist(S, R);
  Matrix gate(S, R);
  Matrix w(S, R);
  int zero_pairs = 0;
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index r = 0; r < R; ++r) {
      if (pnorm[r] > 0.0 && qnorm[s] > 0.0) {
        cosine(s, r) = P.row(r).dot(Q.row(s)) / (pnorm[r] * qnorm[s]);
      } else {
        ++zero_pairs;
      }
      dist(s, r) = (P.row(r) - Q.row(s)).norm();
      gate(s, r) = 1.0 / (1.0 + std::exp(dist(s, r)));  // sigmoid(-N)
      w(s, r) = cosine(s, r) * gate(s, r);
    }
  }

  diff::Tape& tape = *pn.tape();
  Var weights = tape.record(std::move(w), {pn, pooled},
      [pn, pooled, pnorm, qnorm, cosine, dist, gate](diff::Tape& t, const Matrix& g) {
        const Matrix& P = pn.value();
        const Matrix& Q = pooled.value();
        Matrix gp = Matrix::Zero(P.rows(), P.cols());
        Matrix gq = Matrix::Zero(Q.rows(), Q.cols());
        for (Eigen::Index s = 0; s < Q.rows(); ++s) {
          for (Eigen::Index r = 0; r < P.rows(); ++r) {
            const double up = g(s, r);
            if (up == 0.0) continue;
            // dW = gate * dM + M * dgate/dN * dN, dgate/dN = -gate (1 - gate)
            if (pnorm[r] > 0.0 && qnorm[s] > 0.0) {
              const double inv = 1.0 / (pnorm[r] * qnorm[s]);
              const double m = cosine(s, r);
              const double k = up * gate(s, r);
              gp.row(r) += k * (Q.row(s) * inv - m * P.row(r) / (pnorm[r] * pnorm[r]));
              gq.row(s) += k * (P.row(r) * inv - m * Q.row(s) / (qnorm[s] * qnorm[s]));
            }
            if (dist(s, r) > 0.0) {
              const double k = -up * cosine(s, r) * gate(s, r) * (1.0 - gate(s, r)) / dist(s, r);
              gp.row(r) += k * (P.row(r) - Q.row(s));
              gq.row(s) -= k * (P.row(r) - Q.row(s));
            }
          }
        }
        t.accumulate(pn, gp);
        t.accumulate(pooled, gq);
      });
  return {weights, zero_pairs};
}

Var fuse(Var pn, Var weights) {
  require(weights.cols() == pn.rows(), "fuse: W must be S x R");
  diff::Tape& tape = *pn.tape();
  const auto S = weights.rows();
  Var avg = diff::scale(diff::matmul(tape.constant(Matrix::Ones(1, S)), weights), 1.0 / S);  // 1 x R
  return diff::scale_rows(pn, diff::transpose(avg));
}

AlignmentOutput align(diff::Tape& tape, diff::ParameterStore& store, const AlignmentDims& dims,
                      Var fq, Var fs_flat, int supports, int parts) {
  require(fs_flat.rows() == static_cast<Eigen::Index>(supports) * parts,
          "align: support rows must equal S*T");
  const auto sq = bind_basic_block(tape, store, "mem.sq");
  const auto qs = bind_basic_block(tape, store, "mem.qs");
  std::vector<BasicBlockParams> steps;
  for (int k = 0;; ++k) {
    const std::string prefix = "pam.k" + std::to_string(k);
    if (!store.contains(prefix + ".c1.weight")) break;
    steps.push_back(bind_basic_block(tape, store, prefix));
  }
  if (static_cast<int>(steps.size()) != dims.depth) {
    throw ConfigError("align: depth n=" + std::to_string(dims.depth) + " but " +
                      std::to_string(steps.size()) + " progressive-alignment blocks registered");
  }
  const auto res = bind_residual_block(tape, store, "pam.res");

  AlignmentOutput out;
  const Enhanced e = mutual_enhance(fq, fs_flat, sq, qs, dims.scale_attention);
  out.m_sq = e.query;
  out.m_qs = e.support;
  out.pn = progressive_align(e.query, e.support, steps, res, dims.scale_attention);
  MatchResult match = pairwise_match(out.pn, e.support, supports, parts);
  out.weights = match.weights;
  out.zero_norm_pairs = match.zero_norm_pairs;
  out.fused = fuse(out.pn, out.weights);
  return out;
}

}  // namespace fscal
