// fscal: command-line front end for training, inference and evaluation of
// few-shot common action localization models.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "fscal/config.hpp"
#include "fscal/data.hpp"
#include "fscal/error.hpp"
#include "fscal/io.hpp"
#include "fscal/runner.hpp"
#include "fscal/verify.hpp"

namespace fs = std::filesystem;
using fscal::RunConfig;
using ordered_json = nlohmann::ordered_json;

namespace {

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::string> presets;
  bool synthetic = false;
  std::string out;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("-c,--config", o.config_file, "JSON configuration file");
  app->add_option("--set", o.sets, "Override a configuration key (section.key=value)")->take_all();
  app->add_option("--preset", o.presets, "Apply a preset (synthetic, full)");
  app->add_flag("--synthetic", o.synthetic, "Use the synthetic episode generator");
  app->add_option("-o,--out", o.out, "Output directory (default $FSCAL_OUTPUT_DIR or ./fscal_out)");
}

fs::path out_dir(const CommonOptions& o) { return o.out.empty() ? fscal::default_output_dir() : fs::path(o.out); }

/// defaults < presets < file < --set, then the subcommand's own flags.
RunConfig build_config(const CommonOptions& o, RunConfig base = {}) {
  if (o.synthetic) base.apply_preset("synthetic");
  for (const auto& p : o.presets) base.apply_preset(p);
  if (!o.config_file.empty()) base.merge_file(o.config_file);
  for (const auto& s : o.sets) base.set(s);
  return base;
}

bool was_set(const CommonOptions& o, const std::string& key) {
  for (const auto& s : o.sets) {
    if (s.rfind(key + "=", 0) == 0) return true;
  }
  return false;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct EvalFlags {
  std::string checkpoint;
  int episodes = -1;
  int supports = -1;
  int noisy = -1;
  bool noisy_same_class = false;
  bool image_support = false;
  bool micro = false;
  std::string phase;
};

void add_eval_flags(CLI::App* app, EvalFlags& f) {
  app->add_option("--checkpoint", f.checkpoint, "Model checkpoint (default <out>/model.ckpt)");
  app->add_option("--episodes", f.episodes, "Number of held-out episodes");
  app->add_option("-N,--supports", f.supports, "Support videos per episode");
  app->add_option("--noisy", f.noisy, "Replace this many supports with other-class clips");
  app->add_flag("--noisy-same-class", f.noisy_same_class, "Draw all noisy supports from one class");
  app->add_flag("--image-support", f.image_support, "Use still images inflated to clips as supports");
  app->add_flag("--micro-map", f.micro, "Pool predictions over episodes instead of averaging APs");
  app->add_option("--phase", f.phase, "Episode phase for real data (val, test)");
}

/// Loads the checkpoint and layers this invocation's options over its
/// config echo.
fscal::LoadedModel load_for_eval(const CommonOptions& o, const EvalFlags& f) {
  const fs::path ckpt = f.checkpoint.empty() ? out_dir(o) / "model.ckpt" : fs::path(f.checkpoint);
  fscal::LoadedModel lm = fscal::load_model(ckpt);
  RunConfig cfg = build_config(o, lm.config);
  if (f.episodes >= 0) cfg.set("eval.episodes=" + std::to_string(f.episodes));
  if (f.supports >= 0) cfg.set("eval.supports=" + std::to_string(f.supports));
  if (f.noisy >= 0) cfg.set("eval.noisy_count=" + std::to_string(f.noisy));
  if (f.noisy_same_class) cfg.set("eval.noisy_same_class=true");
  if (f.image_support) cfg.set("eval.image_support=true");
  if (f.micro) cfg.set("eval.micro_map=true");
  if (!f.phase.empty()) cfg.set("eval.phase=\"" + f.phase + "\"");
  cfg.validate();
  const fscal::ModelConfig original = lm.config.model();
  const fscal::ModelConfig now = cfg.model();
  if (now.backbone.channels != original.backbone.channels || now.align.depth != original.align.depth ||
      now.parts != original.parts || now.proposal_hidden != original.proposal_hidden) {
    throw fscal::ConfigError("model settings differ from the checkpoint's");
  }
  lm.config = std::move(cfg);
  return lm;
}

ordered_json run_meta(const fscal::LoadedModel& lm, const fs::path& ckpt) {
  ordered_json meta;
  meta["seed"] = lm.config.seed();
  meta["checkpoint"] = ckpt.string();
  meta["checkpoint_id"] = hex64(fscal::fnv1a(fscal::read_file(ckpt)));
  meta["iteration"] = lm.iteration;
  meta["config"] = lm.config.doc();
  return meta;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot common action localization"};
  app.require_subcommand(1);

  CommonOptions common;

  // reorganize
  auto* reorg = app.add_subcommand("reorganize", "Split annotations into class-disjoint phases");
  add_common(reorg, common);
  std::string annotations, format, dataset, split_mode, variant;
  int max_frames = -1;
  reorg->add_option("--annotations", annotations, "Annotation file")->required();
  reorg->add_option("--format", format, "activitynet | thumos");
  reorg->add_option("--dataset", dataset, "Class table for fixed splits: activitynet | thumos");
  reorg->add_option("--split-mode", split_mode, "fixed | random");
  reorg->add_option("--variant", variant, "common | multi");
  reorg->add_option("--max-frames", max_frames, "Longest derived video kept (common variant)");

  // train
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(train, common);
  long long iters = -1;
  int seed = -1;
  train->add_option("--iters", iters, "Total iterations (the decay point scales along)");
  train->add_option("--seed", seed, "Random seed");

  // infer
  auto* infer = app.add_subcommand("infer", "Localize the common action in one episode");
  add_common(infer, common);
  EvalFlags infer_flags;
  std::uint64_t episode_index = 0;
  add_eval_flags(infer, infer_flags);
  infer->add_option("--episode", episode_index, "Held-out episode index");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate on held-out episodes");
  add_common(eval, common);
  EvalFlags eval_flags;
  add_eval_flags(eval, eval_flags);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Evaluate for N = 1..k supports");
  add_common(sweep, common);
  EvalFlags sweep_flags;
  int max_supports = 6;
  add_eval_flags(sweep, sweep_flags);
  sweep->add_option("--max-supports", max_supports, "Largest support count");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check of every module");
  std::uint64_t gc_seed = 0;
  gradcheck->add_option("--seed", gc_seed, "Random seed");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "Cross-check against reference oracles");
  std::uint64_t st_seed = 0;
  selftest->add_option("--seed", st_seed, "Random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*reorg) {
      RunConfig cfg = build_config(common);
      if (!format.empty()) cfg.set("data.format=\"" + format + "\"");
      if (!dataset.empty()) cfg.set("data.dataset=\"" + dataset + "\"");
      if (!split_mode.empty()) cfg.set("data.split_mode=\"" + split_mode + "\"");
      if (!variant.empty()) cfg.set("data.variant=\"" + variant + "\"");
      if (max_frames > 0) cfg.set("data.max_frames=" + std::to_string(max_frames));
      cfg.set("data.annotations=\"" + annotations + "\"");
      const fscal::DataSettings d = cfg.data();
      const fscal::IngestResult in = fscal::ingest_annotations(d.annotations, d.format);
      for (const auto& w : in.warnings) std::cerr << "warning: " << w << "\n";
      const fscal::ClassSplit split =
          fscal::split_classes(fscal::class_labels(in.videos), d.split_mode, cfg.seed(), d.dataset);
      fscal::ReorganizeStats stats;
      const fscal::PhaseData data = d.variant == "common"
                                        ? fscal::reorganize_common_instance(in.videos, split, d.max_frames, &stats)
                                        : fscal::reorganize_multi_instance(in.videos, split, &stats);
      ordered_json meta;
      meta["annotations"] = d.annotations;
      meta["variant"] = d.variant;
      meta["config"] = cfg.doc();
      const fs::path dir = out_dir(common);
      fs::create_directories(dir);
      fscal::write_file(dir / "split.json", fscal::split_manifest(split, data, meta).dump(2) + "\n");
      std::cout << "classes train/val/test: " << split.train.size() << "/" << split.val.size() << "/"
                << split.test.size() << "\n";
      for (auto p : {fscal::Phase::Train, fscal::Phase::Val, fscal::Phase::Test}) {
        std::cout << fscal::phase_name(p) << " videos: " << data[p].size() << "\n";
      }
      std::cout << "discarded: " << stats.discarded_long << " too long, " << stats.discarded_overlap
                << " overlapping, " << stats.discarded_unsplit << " unsplit\n"
                << "wrote " << (dir / "split.json").string() << "\n";
      return 0;
    }

    if (*train) {
      RunConfig cfg = build_config(common);
      if (seed >= 0) cfg.set("seed=" + std::to_string(seed));
      if (iters > 0) {
        cfg.set("train.iterations=" + std::to_string(iters));
        if (!was_set(common, "train.decay_at")) {
          cfg.set("train.decay_at=" + std::to_string(static_cast<long long>(iters * 5 / 8)));
        }
      }
      const fs::path dir = out_dir(common);
      const auto t0 = std::chrono::steady_clock::now();
      const auto outcome = fscal::run_training(cfg, dir, &std::cout);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << "trained " << outcome.trace.size() << " iterations in " << secs << " s\n"
                << "wrote " << (dir / "model.ckpt").string() << "\n";
      return 0;
    }

    if (*infer) {
      fscal::LoadedModel lm = load_for_eval(common, infer_flags);
      const fscal::EvalSettings es = lm.config.eval();
      fscal::EpisodeTensors ep;
      std::string id;
      if (lm.config.synthetic()) {
        ep = fscal::synthetic_eval_episode(lm.config, es, episode_index);
        id = "synthetic-" + std::to_string(episode_index);
      } else {
        fscal::Corpus corpus(lm.config);
        ep = corpus.fixed_episode(es, episode_index, &id);
      }
      const auto preds = fscal::infer_long(lm.model, ep, lm.config.inference());
      ordered_json doc;
      doc["schema_version"] = 1;
      doc["episode"] = id;
      doc["num_frames"] = ep.num_frames;
      ordered_json gts = ordered_json::array();
      for (const auto& g : ep.gts) gts.push_back({g.start, g.end});
      doc["gt_segments"] = std::move(gts);
      doc["predictions"] = fscal::to_json(preds);
      const fs::path dir = out_dir(common);
      fs::create_directories(dir);
      fscal::write_file(dir / "predictions.json", doc.dump(2) + "\n");
      for (std::size_t i = 0; i < std::min<std::size_t>(5, preds.size()); ++i) {
        std::printf("%zu: [%.1f, %.1f] score %.4f\n", i + 1, preds[i].segment.start, preds[i].segment.end,
                    preds[i].score);
      }
      std::cout << "wrote " << (dir / "predictions.json").string() << "\n";
      return 0;
    }

    if (*eval || *sweep) {
      const EvalFlags& f = *eval ? eval_flags : sweep_flags;
      const fs::path ckpt = f.checkpoint.empty() ? out_dir(common) / "model.ckpt" : fs::path(f.checkpoint);
      fscal::LoadedModel lm = load_for_eval(common, f);
      const fscal::EvalSettings es = lm.config.eval();
      const fs::path dir = out_dir(common);
      if (*eval) {
        const fscal::EvalResult r = fscal::run_evaluation(lm.model, lm.config, es);
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
        fscal::report(r, run_meta(lm, ckpt), dir);
        for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
          std::printf("mAP@%.2f = %.4f\n", r.thresholds[i], r.map[i]);
        }
        std::printf("mAP@avg  = %.4f\n", r.mean_map);
        std::cout << "wrote " << (dir / "result.json").string() << "\n";
      } else {
        const auto points = fscal::run_sweep(lm.model, lm.config, es, max_supports);
        fscal::report_sweep(points, run_meta(lm, ckpt), dir);
        for (const auto& p : points) {
          std::printf("N=%d  mAP@%.2f = %.4f  mAP@avg = %.4f\n", p.supports, p.result.thresholds.front(),
                      p.result.map.front(), p.result.mean_map);
        }
        std::cout << "wrote " << (dir / "sweep.json").string() << "\n";
      }
      return 0;
    }

    if (*gradcheck) {
      bool ok = true;
      for (const auto& e : fscal::gradcheck_suite(gc_seed)) {
        const bool pass = e.max_rel_error < fscal::kGradcheckTolerance;
        ok = ok && pass;
        std::printf("%-16s max_rel_error %.3e over %zu scalars%s\n", e.module.c_str(), e.max_rel_error, e.checked,
                    pass ? "" : ("  FAIL at " + e.worst).c_str());
      }
      return ok ? 0 : 1;
    }

    if (*selftest) {
      bool ok = true;
      for (const auto& e : fscal::selftest_suite(st_seed)) {
        ok = ok && e.passed;
        std::printf("%s %-32s %s\n", e.passed ? "PASS" : "FAIL", e.name.c_str(), e.detail.c_str());
      }
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
