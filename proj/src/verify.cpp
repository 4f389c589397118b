#include "fscal/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fscal/alignment.hpp"
#include "fscal/evaluation.hpp"
#include "fscal/features.hpp"
#include "fscal/heads.hpp"
#include "fscal/oracles.hpp"
#include "fscal/proposals.hpp"
#include "fscal/temporal.hpp"

namespace fscal {

using diff::Matrix;
using diff::ParameterStore;
using diff::Tape;
using diff::Var;

namespace {

constexpr int kR = 4, kS = 2, kT = 2, kC = 8;

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

/// sum(out .* probe): a scalar with non-degenerate gradient everywhere.
Var probe_sum(Tape& tape, Var out, const Matrix& probe) {
  return diff::sum(diff::hadamard(out, tape.constant(probe)));
}

AlignmentDims small_dims() {
  AlignmentDims d;
  d.channels = kC;
  d.depth = 3;
  return d;
}

GradcheckEntry run(const std::string& name, ParameterStore& store, const diff::ScalarFn& fn) {
  const auto r = diff::gradcheck(fn, store);
  return {name, r.max_rel_error, r.checked, r.worst_param};
}

}  // namespace

std::vector<GradcheckEntry> gradcheck_suite(std::uint64_t seed) {
  std::vector<GradcheckEntry> out;
  const AlignmentDims dims = small_dims();
  Rng rng(mix_seed(seed, 0x96ad));

  {  // basic block
    ParameterStore st;
    add_basic_block(st, "b", dims, rng);
    st.add("in.i1", random_matrix(rng, kR, kC));
    st.add("in.i2", random_matrix(rng, kS * kT, kC));
    const Matrix probe = random_matrix(rng, kR, kC);
    out.push_back(run("basic_block", st, [&](Tape& t) {
      return probe_sum(t, basic_block(t.param(st, "in.i1"), t.param(st, "in.i2"), bind_basic_block(t, st, "b")), probe);
    }));
  }
  {  // mutual enhancement
    ParameterStore st;
    add_basic_block(st, "mem.sq", dims, rng);
    add_basic_block(st, "mem.qs", dims, rng);
    st.add("in.fq", random_matrix(rng, kR, kC));
    st.add("in.fs", random_matrix(rng, kS * kT, kC));
    const Matrix pq = random_matrix(rng, kR, kC);
    const Matrix ps = random_matrix(rng, kS * kT, kC);
    out.push_back(run("mem", st, [&](Tape& t) {
      const Enhanced e = mutual_enhance(t.param(st, "in.fq"), t.param(st, "in.fs"),
                                        bind_basic_block(t, st, "mem.sq"), bind_basic_block(t, st, "mem.qs"));
      return diff::add(probe_sum(t, e.query, pq), probe_sum(t, e.support, ps));
    }));
  }
  {  // residual block
    ParameterStore st;
    add_residual_block(st, "res", dims, rng);
    st.add("in.x", random_matrix(rng, kS * kT, kC));
    const Matrix probe = random_matrix(rng, kS * kT, kC);
    out.push_back(run("residual_block", st, [&](Tape& t) {
      return probe_sum(t, residual_block(t.param(st, "in.x"), bind_residual_block(t, st, "res")), probe);
    }));
  }
  {  // progressive alignment, n = 3
    ParameterStore st;
    for (int k = 0; k < dims.depth; ++k) add_basic_block(st, "pam.k" + std::to_string(k), dims, rng);
    add_residual_block(st, "pam.res", dims, rng);
    st.add("in.msq", random_matrix(rng, kR, kC));
    st.add("in.mqs", random_matrix(rng, kS * kT, kC));
    const Matrix probe = random_matrix(rng, kR, kC);
    out.push_back(run("pam", st, [&](Tape& t) {
      std::vector<BasicBlockParams> steps;
      for (int k = 0; k < dims.depth; ++k) steps.push_back(bind_basic_block(t, st, "pam.k" + std::to_string(k)));
      return probe_sum(t, progressive_align(t.param(st, "in.msq"), t.param(st, "in.mqs"), steps,
                                            bind_residual_block(t, st, "pam.res")), probe);
    }));
  }
  {  // pairwise matching
    ParameterStore st;
    st.add("in.pn", random_matrix(rng, kR, kC, 0.3));
    st.add("in.mqs", random_matrix(rng, kS * kT, kC, 0.3));
    const Matrix probe = random_matrix(rng, kS, kR);
    out.push_back(run("pmm", st, [&](Tape& t) {
      return probe_sum(t, pairwise_match(t.param(st, "in.pn"), t.param(st, "in.mqs"), kS, kT).weights, probe);
    }));
  }
  {  // fuse
    ParameterStore st;
    st.add("in.pn", random_matrix(rng, kR, kC));
    st.add("in.w", random_matrix(rng, kS, kR, 0.2));
    const Matrix probe = random_matrix(rng, kR, kC);
    out.push_back(run("fuse", st, [&](Tape& t) {
      return probe_sum(t, fuse(t.param(st, "in.pn"), t.param(st, "in.w")), probe);
    }));
  }
  {  // heads
    ParameterStore st;
    add_heads(st, kC, rng);
    st.add("in.fused", random_matrix(rng, kR, kC));
    const Matrix pl = random_matrix(rng, kR, 1);
    const Matrix po = random_matrix(rng, kR, 2);
    out.push_back(run("heads", st, [&](Tape& t) {
      const HeadOutputs h = classify_and_regress(t, st, t.param(st, "in.fused"));
      return diff::add(probe_sum(t, diff::sigmoid(h.logits), pl), probe_sum(t, h.offsets, po));
    }));
  }
  {  // joint loss
    ParameterStore st;
    st.add("in.logits", random_matrix(rng, kR, 1));
    st.add("in.offsets", random_matrix(rng, kR, 2, 0.5));
    LossTargets targets(kR);
    targets[0] = {1, {0.1, -0.2}};
    targets[1] = {0, {}};
    targets[2] = {1, {-0.6, 2.5}};
    targets[3] = {kIgnore, {}};
    out.push_back(run("joint_loss", st, [&](Tape& t) {
      return joint_loss(t.param(st, "in.logits"), t.param(st, "in.offsets"), targets, {}, 1.0, 2.0).total;
    }));
  }
  {  // proposal head
    ParameterStore st;
    add_proposal_head(st, kC, 6, rng);
    st.add("in.steps", random_matrix(rng, 6, kC));
    const std::vector<TemporalSegment> anchors{{0, 16}, {8, 40}, {20, 48}};
    const Matrix pl = random_matrix(rng, 3, 1);
    const Matrix po = random_matrix(rng, 3, 2);
    out.push_back(run("proposal_head", st, [&](Tape& t) {
      const ProposalOutputs p = proposal_forward(t, st, t.param(st, "in.steps"), anchors, 8, 48);
      return diff::add(probe_sum(t, diff::sigmoid(p.logits), pl), probe_sum(t, p.offsets, po));
    }));
  }
  {  // temporal encoder backbone
    ParameterStore st;
    BackboneConfig bc{BackboneKind::TemporalEncoder, 3, kC, 2};
    add_backbone(st, bc, rng);
    const Matrix frames = random_matrix(rng, 7, 3);
    const Matrix probe = random_matrix(rng, 4, kC);
    out.push_back(run("backbone", st, [&](Tape& t) {
      return probe_sum(t, encode_query(t, st, bc, frames), probe);
    }));
  }
  {  // full alignment pipeline + heads + loss
    ParameterStore st;
    add_alignment(st, dims, rng, OutputInit::Xavier);
    add_heads(st, kC, rng);
    st.add("in.fq", random_matrix(rng, kR, kC, 0.5));
    st.add("in.fs", random_matrix(rng, kS * kT, kC, 0.5));
    LossTargets targets(kR);
    targets[0] = {1, {0.2, 0.1}};
    targets[1] = {0, {}};
    targets[2] = {1, {-0.3, 0.4}};
    targets[3] = {0, {}};
    out.push_back(run("pipeline", st, [&](Tape& t) {
      const AlignmentOutput a = align(t, st, dims, t.param(st, "in.fq"), t.param(st, "in.fs"), kS, kT);
      const HeadOutputs h = classify_and_regress(t, st, a.fused);
      return joint_loss(h.logits, h.offsets, targets, {}, 1.0, 4.0).total;
    }));
  }
  return out;
}

// ---- oracle cross-checks -------------------------------------------------------------

namespace {

std::vector<ScoredSegment> random_segments(Rng& rng, int n, double extent) {
  std::vector<ScoredSegment> v;
  for (int i = 0; i < n; ++i) {
    const double a = std::floor(rng.uniform(0.0, extent - 2.0));
    const double len = 1.0 + std::floor(rng.uniform(1.0, extent / 3.0));
    // Coarse scores so that ties occur.
    v.push_back({{a, std::min(extent, a + len)}, std::floor(rng.uniform(0.0, 20.0)) / 20.0});
  }
  return v;
}

SelftestEntry check_nms(Rng& rng) {
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(rng.below(51));
    const auto cands = random_segments(rng, n, 200.0);
    const double thr = std::floor(rng.uniform(0.0, 10.0)) / 10.0;
    if (nms(cands, thr) != oracle::nms(cands, thr)) {
      return {"nms_vs_greedy_oracle", false, "mismatch on trial " + std::to_string(trial)};
    }
  }
  return {"nms_vs_greedy_oracle", true, "1000 instances"};
}

SelftestEntry check_ap(Rng& rng) {
  double worst = 0.0;
  int count = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int np = static_cast<int>(rng.below(7));
    const int ng = 1 + static_cast<int>(rng.below(3));
    const auto preds = random_segments(rng, np, 60.0);
    std::vector<TemporalSegment> gts;
    for (const auto& g : random_segments(rng, ng, 60.0)) gts.push_back(g.segment);
    for (double theta : default_thresholds()) {
      const double a = *episode_ap(preds, gts, theta);
      const double b = oracle::episode_ap(preds, gts, theta);
      worst = std::max(worst, std::abs(a - b));
      ++count;
    }
  }
  std::ostringstream os;
  os << count << " cases, max |diff| " << worst;
  return {"episode_ap_vs_pr_enumeration", worst <= 1e-9, os.str()};
}

SelftestEntry check_offsets(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double ps = rng.uniform(0.0, 500.0);
    const TemporalSegment p{ps, ps + rng.uniform(1.0, 300.0)};
    const double ts = rng.uniform(0.0, 500.0);
    const TemporalSegment t{ts, ts + rng.uniform(1.0, 300.0)};
    const auto d = decode_offsets(p, encode_offsets(p, t));
    worst = std::max({worst, std::abs(d.segment.start - t.start) / std::max(1.0, std::abs(t.start)),
                      std::abs(d.segment.end - t.end) / std::max(1.0, std::abs(t.end))});
  }
  std::ostringstream os;
  os << "max relative error " << worst;
  return {"offset_round_trip", worst <= 1e-9, os.str()};
}

oracle::Dense dense_of(const ParameterStore& st, const std::string& prefix) {
  return {st.get(prefix + ".weight").value, st.get(prefix + ".bias").value};
}

SelftestEntry check_blocks(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    AlignmentDims dims;
    dims.channels = 8;
    ParameterStore st;
    add_basic_block(st, "b", dims, rng);
    add_residual_block(st, "r", dims, rng);
    const Matrix i1 = random_matrix(rng, 5, 8);
    const Matrix i2 = random_matrix(rng, 4, 8);
    Tape t;
    const Matrix got = basic_block(t.constant(i1), t.constant(i2), bind_basic_block(t, st, "b")).value();
    const Matrix want = oracle::basic_block(i1, i2, dense_of(st, "b.c1"), dense_of(st, "b.c2"),
                                            dense_of(st, "b.c3"), dense_of(st, "b.c4"));
    worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
    const Matrix rgot = residual_block(t.constant(i2), bind_residual_block(t, st, "r")).value();
    const Matrix rwant = oracle::residual_block(i2, dense_of(st, "r.c1"), dense_of(st, "r.c2"));
    worst = std::max(worst, (rgot - rwant).cwiseAbs().maxCoeff());
  }
  std::ostringstream os;
  os << "max |diff| " << worst;
  return {"blocks_vs_explicit_composition", worst <= 1e-12, os.str()};
}

SelftestEntry check_pmm(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix pn = random_matrix(rng, 3, 5);
    const Matrix mqs = random_matrix(rng, 4, 5);
    Tape t;
    const Var pv = t.constant(pn);
    const MatchResult m = pairwise_match(pv, t.constant(mqs), 2, 2);
    worst = std::max(worst, (m.weights.value() - oracle::pairwise_weights(pn, mqs, 2, 2)).cwiseAbs().maxCoeff());
    const Matrix fused = fuse(pv, m.weights).value();
    worst = std::max(worst, (fused - oracle::fuse(pn, m.weights.value())).cwiseAbs().maxCoeff());
  }
  std::ostringstream os;
  os << "max |diff| " << worst;
  return {"pmm_fuse_vs_loop_oracle", worst <= 1e-12, os.str()};
}

SelftestEntry check_tiou(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = random_segments(rng, 2, 100.0);
    worst = std::max(worst, std::abs(tiou(s[0].segment, s[1].segment) - oracle::tiou(s[0].segment, s[1].segment)));
  }
  std::ostringstream os;
  os << "max |diff| " << worst;
  return {"tiou_vs_interval_oracle", worst <= 1e-12, os.str()};
}

SelftestEntry check_gradients(std::uint64_t seed) {
  const auto entries = gradcheck_suite(seed);
  double worst = 0.0;
  std::string where;
  for (const auto& e : entries) {
    if (e.max_rel_error >= worst) {
      worst = e.max_rel_error;
      where = e.module;
    }
  }
  std::ostringstream os;
  os << entries.size() << " modules, max relative error " << worst << " (" << where << ")";
  return {"gradcheck_suite", worst < kGradcheckTolerance, os.str()};
}

}  // namespace

std::vector<SelftestEntry> selftest_suite(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5e1f));
  return {check_tiou(rng), check_nms(rng), check_ap(rng), check_offsets(rng),
          check_blocks(rng), check_pmm(rng), check_gradients(seed)};
}

}  // namespace fscal
