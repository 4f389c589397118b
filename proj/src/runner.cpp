#include "fscal/runner.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>

#include "fscal/error.hpp"

namespace fscal {

std::uint64_t synthetic_train_seed(std::uint64_t seed, std::uint64_t iteration) {
  return mix_seed(mix_seed(seed, 0x7a11), iteration);
}

std::uint64_t synthetic_eval_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(mix_seed(seed, 0xe7a1), index);
}

EpisodeSource synthetic_train_source(const RunConfig& cfg) {
  const std::uint64_t seed = cfg.seed();
  const int supports = cfg.train().supports;
  return [cfg, seed, supports](std::uint64_t it) {
    return from_synthetic(synthesize_episode(cfg.synthetic_episode(synthetic_train_seed(seed, it), supports)));
  };
}

EpisodeTensors synthetic_eval_episode(const RunConfig& cfg, const EvalSettings& es,
                                      std::uint64_t index) {
  SyntheticConfig s = cfg.synthetic_episode(synthetic_eval_seed(cfg.seed(), index), es.supports);
  s.noisy_count = es.noisy_count;
  s.noisy_same_class = es.noisy_same_class;
  s.image_support = es.image_support;
  EpisodeTensors t = from_synthetic(synthesize_episode(s));
  if (es.image_support) {
    for (auto& m : t.supports) m = inflate_image(m.row(0), cfg.synthetic_episode(0, 1).support_min_steps);
  }
  return t;
}

// ---- corpus ----------------------------------------------------------------------

namespace {

LoadedManifest read_manifest(const RunConfig& cfg) {
  const DataSettings d = cfg.data();
  if (d.manifest.empty() || d.features.empty()) {
    throw ConfigError("real-data runs need data.manifest and data.features (or use --synthetic)");
  }
  return load_manifest(read_file(d.manifest));
}

}  // namespace

Corpus::Corpus(const RunConfig& cfg)
    : manifest_(read_manifest(cfg)),
      bank_(cfg.data().features, cfg.model().backbone.channels, cfg.model().backbone.stride),
      sampler_(manifest_.data, manifest_.split, cfg.seed()) {}

EpisodeTensors Corpus::train_episode(int supports) {
  EpisodeOptions o;
  o.supports = supports;
  const Episode e = sampler_.next_train(o);
  return episode_tensors(e, sampler_, manifest_.data, bank_);
}

EpisodeTensors Corpus::fixed_episode(const EvalSettings& es, std::uint64_t index, std::string* id) {
  EpisodeOptions o;
  o.supports = es.supports;
  o.noisy_count = es.noisy_count;
  o.noisy_same_class = es.noisy_same_class;
  o.image_support = es.image_support;
  const Episode e = sampler_.fixed(es.phase, index, o);
  if (id) *id = e.query_id;
  return episode_tensors(e, sampler_, manifest_.data, bank_);
}

// ---- training ----------------------------------------------------------------------

void write_checkpoint(const Model& model, const RunConfig& cfg, std::uint64_t iteration,
                      const std::filesystem::path& path) {
  save_checkpoint({model.params, cfg.echo(), iteration}, path);
}

TrainOutcome run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                          std::ostream* progress) {
  cfg.validate();
  const TrainConfig tc = cfg.train();
  TrainOutcome out{build_model(cfg.model(), cfg.seed()), {}};

  std::unique_ptr<Corpus> corpus;
  EpisodeSource source;
  if (cfg.synthetic()) {
    source = synthetic_train_source(cfg);
  } else {
    corpus = std::make_unique<Corpus>(cfg);
    source = [&corpus, &tc](std::uint64_t) { return corpus->train_episode(tc.supports); };
  }

  std::ofstream log;
  TrainHooks hooks;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + (out_dir / "train_log.jsonl").string());
    hooks.log = &log;
    hooks.divergence_snapshot = out_dir / "diverged.ckpt";
  }
  if (progress) {
    const long long every = std::max<long long>(1, tc.iterations / 20);
    hooks.progress = [progress, every, &tc](const LossRecord& r) {
      if ((r.iteration + 1) % every == 0 || r.iteration + 1 == tc.iterations) {
        *progress << "iter " << r.iteration + 1 << "/" << tc.iterations << "  loss " << r.total
                  << "  (cls " << r.cls << ", reg " << r.reg << ")  lr " << r.lr << "\n";
      }
    };
  }
  out.trace = train(out.model, tc, cfg.selection(), cfg.targets(), source, hooks);
  if (!out_dir.empty()) {
    write_checkpoint(out.model, cfg, static_cast<std::uint64_t>(tc.iterations), out_dir / "model.ckpt");
    write_file(out_dir / "config.json", cfg.doc().dump(2) + "\n");
  }
  return out;
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  RunConfig cfg = config_from_echo(ckpt.config_json);
  Model m = model_from_checkpoint(cfg.model(), ckpt);
  return {std::move(cfg), std::move(m), ckpt.iteration};
}

// ---- evaluation ----------------------------------------------------------------------

std::vector<EpisodeResult> collect_predictions(Model& model, const RunConfig& cfg,
                                               const EvalSettings& es) {
  const InferConfig ic = cfg.inference();
  std::vector<EpisodeResult> out;
  std::unique_ptr<Corpus> corpus;
  if (!cfg.synthetic()) corpus = std::make_unique<Corpus>(cfg);
  for (int i = 0; i < es.episodes; ++i) {
    EpisodeResult r;
    EpisodeTensors ep;
    if (corpus) {
      std::string qid;
      ep = corpus->fixed_episode(es, static_cast<std::uint64_t>(i), &qid);
      r.id = std::to_string(i) + ":" + qid;
    } else {
      ep = synthetic_eval_episode(cfg, es, static_cast<std::uint64_t>(i));
      r.id = "synthetic-" + std::to_string(i);
    }
    r.predictions = infer_long(model, ep, ic);
    r.gts = ep.gts;
    out.push_back(std::move(r));
  }
  return out;
}

EvalResult run_evaluation(Model& model, const RunConfig& cfg, const EvalSettings& es) {
  return evaluate(collect_predictions(model, cfg, es), es.thresholds, es.micro_map);
}

std::vector<SweepPoint> run_sweep(Model& model, const RunConfig& cfg, const EvalSettings& es,
                                  int max_supports) {
  require(max_supports >= 1, "sweep: max supports must be >= 1");
  std::vector<SweepPoint> points;
  for (int n = 1; n <= max_supports; ++n) {
    EvalSettings e = es;
    e.supports = n;
    e.noisy_count = std::min(e.noisy_count, n);
    points.push_back({n, run_evaluation(model, cfg, e)});
  }
  return points;
}

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("FSCAL_OUTPUT_DIR"); env && *env) return env;
  return "fscal_out";
}

}  // namespace fscal
