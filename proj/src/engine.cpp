#include "fscal/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fscal/error.hpp"

namespace fscal {

using diff::Matrix;
using diff::Var;

void validate(const ModelConfig& cfg) {
  if (cfg.backbone.channels < 1 || cfg.backbone.stride < 1) {
    throw ConfigError("model: channels and stride must be positive");
  }
  if (cfg.align.channels != cfg.backbone.channels) {
    throw ConfigError("model: alignment width must equal backbone channels");
  }
  if (cfg.parts < 1) throw ConfigError("model: parts T must be >= 1");
  if (cfg.proposal_hidden < 1) throw ConfigError("model: proposal hidden width must be >= 1");
  if (cfg.anchors.stride != cfg.backbone.stride) {
    throw ConfigError("model: anchor stride must equal backbone stride");
  }
  validate(cfg.align);
  try {
    validate(cfg.anchors);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

Model build_model(const ModelConfig& cfg, std::uint64_t seed, OutputInit align_out) {
  validate(cfg);
  Model m;
  m.config = cfg;
  Rng rng(mix_seed(seed, 0x30de1));
  add_backbone(m.params, cfg.backbone, rng);
  add_proposal_head(m.params, cfg.backbone.channels, cfg.proposal_hidden, rng);
  add_alignment(m.params, cfg.align, rng, align_out);
  add_heads(m.params, cfg.backbone.channels, rng);
  return m;
}

Model model_from_checkpoint(const ModelConfig& cfg, const Checkpoint& ckpt) {
  Model m = build_model(cfg, 0);
  if (ckpt.params.size() != m.params.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                      " tensors, model expects " + std::to_string(m.params.size()));
  }
  for (auto& p : m.params) {
    if (!ckpt.params.contains(p.name)) throw ConfigError("checkpoint is missing tensor " + p.name);
    const Matrix& v = ckpt.params.get(p.name).value;
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw ConfigError("checkpoint tensor " + p.name + " has shape " + std::to_string(v.rows()) +
                        "x" + std::to_string(v.cols()) + ", model expects " +
                        std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()));
    }
    p.value = v;
  }
  return m;
}

EpisodeTensors from_synthetic(const SyntheticEpisode& ep) {
  return {ep.query, ep.supports, ep.gt_segments, ep.distractor_segments, ep.num_frames};
}

// ---- real features ------------------------------------------------------------

FeatureBank::FeatureBank(std::filesystem::path dir, int channels, int stride)
    : dir_(std::move(dir)), channels_(channels), stride_(stride) {}

const FrameFeatures& FeatureBank::get(const std::string& source_id) {
  auto it = cache_.find(source_id);
  if (it == cache_.end()) {
    FrameFeatures f = load_precomputed(dir_ / (source_id + ".fea"), channels_);
    if (f.stride != stride_) {
      throw ConfigError("feature file for " + source_id + " has stride " + std::to_string(f.stride) +
                        ", expected " + std::to_string(stride_));
    }
    it = cache_.emplace(source_id, std::move(f)).first;
  }
  return it->second;
}

Matrix FeatureBank::crop(const AnnotatedVideo& video, const TemporalSegment& segment) {
  const std::string& src = video.source_id.empty() ? video.video_id : video.source_id;
  const FrameFeatures& f = get(src);
  const auto steps = static_cast<int>(f.num_steps());
  int lo = static_cast<int>(std::floor((video.source_offset + segment.start) / stride_));
  int hi = static_cast<int>(std::ceil((video.source_offset + segment.end) / stride_));
  lo = std::clamp(lo, 0, steps - 1);
  hi = std::clamp(hi, lo + 1, steps);
  return f.values.middleRows(lo, hi - lo);
}

EpisodeTensors episode_tensors(const Episode& episode, const EpisodeSampler& sampler,
                               const PhaseData& data, FeatureBank& bank) {
  EpisodeTensors out;
  const AnnotatedVideo& q = sampler.query_video(episode);
  out.num_frames = q.num_frames;
  out.gts = episode.gt_segments;
  for (const auto& inst : q.instances) {
    if (inst.label != episode.common_class) out.others.push_back(inst.segment);
  }
  out.query = bank.crop(q, {0.0, static_cast<double>(q.num_frames)});
  const auto& videos = data[episode.phase];
  for (const auto& s : episode.supports) {
    const auto it = std::find_if(videos.begin(), videos.end(),
                                 [&](const AnnotatedVideo& v) { return v.video_id == s.video_id; });
    require(it != videos.end(), "episode_tensors: unknown support video " + s.video_id);
    Matrix clip = bank.crop(*it, s.segment);
    if (s.image) {
      const Matrix mid = clip.row(clip.rows() / 2);
      clip = inflate_image(mid, static_cast<int>(clip.rows()));
    }
    out.supports.push_back(std::move(clip));
  }
  return out;
}

// ---- forward ---------------------------------------------------------------------

ForwardPass forward(diff::Tape& tape, Model& model, const EpisodeTensors& ep, SelectPhase phase,
                    const SelectionPolicy& policy) {
  const ModelConfig& cfg = model.config;
  require(!ep.supports.empty(), "forward: at least one support is required");
  require(ep.num_frames >= 1, "forward: query has no frames");
  Var steps = encode_query(tape, model.params, cfg.backbone, ep.query);

  ForwardPass fp;
  fp.anchors = generate_anchors(static_cast<int>(steps.rows()), cfg.anchors);
  fp.proposals = proposal_forward(tape, model.params, steps, fp.anchors, cfg.backbone.stride,
                                  static_cast<double>(ep.num_frames));
  std::vector<ScoredSegment> cands(fp.anchors.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    cands[i] = {fp.proposals.decoded[i], fp.proposals.scores[i]};
  }
  fp.selection = select_proposals(cands, phase, policy);
  Var fq = pool_segments(steps, fp.selection.segments, cfg.backbone.stride);

  std::vector<Var> parts;
  for (const Matrix& s : ep.supports) {
    parts.push_back(encode_support(tape, model.params, cfg.backbone, s, cfg.parts).parts);
  }
  Var fs = diff::vstack(parts);
  fp.alignment = align(tape, model.params, cfg.align, fq, fs, static_cast<int>(ep.supports.size()),
                       cfg.parts);
  fp.heads = classify_and_regress(tape, model.params, fp.alignment.fused);
  return fp;
}

// ---- training ----------------------------------------------------------------------

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0) || !(cfg.decay_lr > 0.0)) throw ConfigError("train: learning rates must be positive");
  if (cfg.iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (cfg.decay_at < 0 || cfg.decay_at >= cfg.iterations) {
    throw ConfigError("train: decay iteration " + std::to_string(cfg.decay_at) +
                      " must lie before the total " + std::to_string(cfg.iterations));
  }
  if (cfg.supports < 1) throw ConfigError("train: supports N must be >= 1");
}

double lr_at(const TrainConfig& cfg, long long iteration) {
  return iteration < cfg.decay_at ? cfg.lr : cfg.decay_lr;
}

std::string to_jsonl(const LossRecord& r) {
  nlohmann::ordered_json j;
  j["iteration"] = r.iteration;
  j["total_loss"] = r.total;
  j["cls_loss"] = r.cls;
  j["reg_loss"] = r.reg;
  j["lr"] = r.lr;
  return j.dump();
}

EpisodeLoss episode_loss(diff::Tape& tape, Model& model, const EpisodeTensors& ep,
                         const SelectionPolicy& policy, const TargetConfig& targets,
                         bool cls_mean) {
  ForwardPass fp = forward(tape, model, ep, SelectPhase::Train, policy);

  std::vector<TemporalSegment> actions = ep.gts;
  actions.insert(actions.end(), ep.others.begin(), ep.others.end());
  const LossTargets anchor_t = assign_targets(fp.anchors, actions, targets.anchor_pos, targets.anchor_neg);
  const auto counted = static_cast<double>(std::max<std::ptrdiff_t>(
      1, std::count_if(anchor_t.begin(), anchor_t.end(), [](const auto& t) { return t.label != kIgnore; })));
  const LossValue agnostic = joint_loss(fp.proposals.logits, fp.proposals.offsets, anchor_t, {},
                                        cls_mean ? counted : 1.0, counted);

  const LossTargets cond_t =
      build_conditioned_targets(fp.selection.segments, ep.gts, targets.cond_pos, targets.cond_neg);
  const auto valid = static_cast<double>(std::max<std::size_t>(1, fp.selection.valid_count()));
  const LossValue conditioned = joint_loss(fp.heads.logits, fp.heads.offsets, cond_t,
                                           fp.selection.valid, cls_mean ? valid : 1.0, valid);

  return {diff::add(agnostic.total, conditioned.total), agnostic.cls + conditioned.cls,
          agnostic.reg + conditioned.reg};
}

std::vector<LossRecord> train(Model& model, const TrainConfig& cfg, const SelectionPolicy& policy,
                              const TargetConfig& targets, const EpisodeSource& source,
                              const TrainHooks& hooks) {
  validate(cfg);
  diff::Adam adam;
  std::vector<LossRecord> trace;
  trace.reserve(static_cast<std::size_t>(cfg.iterations));
  for (long long it = 0; it < cfg.iterations; ++it) {
    const double lr = lr_at(cfg, it);
    try {
      const EpisodeTensors ep = source(static_cast<std::uint64_t>(it));
      diff::Tape tape;
      model.params.zero_grad();
      EpisodeLoss loss = episode_loss(tape, model, ep, policy, targets, cfg.cls_mean);
      tape.backward(loss.total);
      for (const auto& p : model.params) {
        if (!p.grad.allFinite()) throw DivergenceError("non-finite gradient in " + p.name);
      }
      adam.step(model.params, lr);
      trace.push_back({it, loss.total.value()(0, 0), loss.cls, loss.reg, lr});
    } catch (const DivergenceError& e) {
      if (!hooks.divergence_snapshot.empty()) {
        Checkpoint snap{model.params, "{}", static_cast<std::uint64_t>(it)};
        save_checkpoint(snap, hooks.divergence_snapshot);
      }
      throw DivergenceError("training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    if (hooks.log) *hooks.log << to_jsonl(trace.back()) << '\n';
    if (hooks.progress) hooks.progress(trace.back());
  }
  round_to_float(model.params);
  return trace;
}

// ---- inference ----------------------------------------------------------------------

double final_nms_threshold(const InferConfig& cfg) {
  if (cfg.final_nms) return *cfg.final_nms;
  return std::max(0.1, cfg.theta - 0.1);
}

namespace {

bool matrix_less(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  if (a.cols() != b.cols()) return a.cols() < b.cols();
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace

PredictionSet infer(Model& model, const EpisodeTensors& ep, const InferConfig& cfg) {
  EpisodeTensors canon = ep;
  std::stable_sort(canon.supports.begin(), canon.supports.end(), matrix_less);

  diff::Tape tape;
  const ForwardPass fp = forward(tape, model, canon, SelectPhase::Eval, cfg.policy);
  const Matrix& off = fp.heads.offsets.value();
  std::vector<ScoredSegment> raw;
  for (std::size_t i = 0; i < fp.selection.size(); ++i) {
    if (!fp.selection.valid[i]) continue;
    const double score = fp.heads.probs[i] * fp.selection.scores[i];
    if (score < cfg.min_score) continue;
    const auto r = static_cast<Eigen::Index>(i);
    const auto d = decode_offsets(fp.selection.segments[i], {off(r, 0), off(r, 1)});
    raw.push_back({clip_segment(d.segment, ep.num_frames), score});
  }
  return nms(raw, final_nms_threshold(cfg));
}

Matrix crop_query(const ModelConfig& cfg, const Matrix& query, const TemporalSegment& window) {
  const int unit = cfg.backbone.kind == BackboneKind::Passthrough ? cfg.backbone.stride : 1;
  const auto rows = static_cast<int>(query.rows());
  int lo = static_cast<int>(std::floor(window.start / unit));
  int hi = static_cast<int>(std::ceil(window.end / unit));
  lo = std::clamp(lo, 0, rows - 1);
  hi = std::clamp(hi, lo + 1, rows);
  return query.middleRows(lo, hi - lo);
}

PredictionSet infer_long(Model& model, const EpisodeTensors& ep, const InferConfig& cfg) {
  if (ep.num_frames <= cfg.max_window) return infer(model, ep, cfg);
  const auto windows = sliding_windows(ep.num_frames, cfg.windows, cfg.overlap);
  std::vector<ScoredSegment> pooled;
  for (const auto& w : windows) {
    EpisodeTensors sub;
    sub.supports = ep.supports;
    sub.query = crop_query(model.config, ep.query, w);
    sub.num_frames = static_cast<int>(std::lround(w.length()));
    for (const auto& p : infer(model, sub, cfg)) {
      const TemporalSegment shifted{p.segment.start + w.start, p.segment.end + w.start};
      pooled.push_back({clip_segment(shifted, ep.num_frames), p.score});
    }
  }
  return nms(pooled, final_nms_threshold(cfg));
}

nlohmann::ordered_json to_json(const PredictionSet& p) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : p) {
    arr.push_back({{"start", s.segment.start}, {"end", s.segment.end}, {"score", s.score}});
  }
  return arr;
}

}  // namespace fscal
