// Prints one PASS/FAIL line per acceptance criterion and exits nonzero if
// any fails. Expensive artifacts (the synthetic model) are built once and
// shared between checks.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fscal/alignment.hpp"
#include "fscal/config.hpp"
#include "fscal/data.hpp"
#include "fscal/engine.hpp"
#include "fscal/evaluation.hpp"
#include "fscal/heads.hpp"
#include "fscal/io.hpp"
#include "fscal/oracles.hpp"
#include "fscal/runner.hpp"
#include "fscal/temporal.hpp"
#include "fscal/verify.hpp"

using namespace fscal;
using diff::Matrix;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

TemporalSegment random_segment(Rng& rng, double extent) {
  const double a = rng.uniform(0.0, extent - 1.0);
  const double b = rng.uniform(a + 1.0, extent);
  return {a, b};
}

std::vector<std::string> split_names(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    out.push_back(item.substr(b, e - b + 1));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Class tables, transcribed.
const char* kAnetTrain =
    "Fun sliding down, Beer pong, Getting a piercing, Shoveling snow, Kneeling, Tumbling, "
    "Playing water polo, Washing dishes, Blowing leaves, Playing congas, Making a lemonade, "
    "Playing kickball, Removing ice from car, Playing racquetball, Swimming, Playing bagpipes, Painting, "
    "Assembling bicycle, Playing violin, Surfing, Making a sandwich, Welding, Hopscotch, "
    "Gargling mouthwash, Baking cookies, Braiding hair, Capoeira, Slacklining, Plastering, "
    "Changing car wheel, Chopping wood, Removing curlers, Horseback riding, Smoking hookah, "
    "Doing a powerbomb, Playing ten pins, Getting a haircut, Playing beach volleyball, Making a cake, "
    "Clean and jerk, Trimming branches or hedges, Drum corps, Windsurfing, Kite flying, "
    "Using parallel bars, Doing kickboxing, Cleaning shoes, Playing field hockey, Playing squash, "
    "Rollerblading, Playing drums, Playing rubik cube, Sharpening knives, Zumba, Raking leaves, "
    "Bathing dog, Tug of war, Ping-pong, Using the balance beam, Playing lacrosse, Scuba diving, "
    "Preparing pasta, Brushing teeth, Playing badminton, Mixing drinks, Discus throw, Playing ice hockey, "
    "Doing crunches, Wrapping presents, Hand washing clothes, Rock climbing, Cutting the grass, "
    "Wakeboarding, Futsal, Playing piano, Baton twirling, Mooping floor, Triple jump, Longboarding, "
    "Polishing shoes, Doing motocross, Arm wrestling, Doing fencing, Hammer throw, Shot put, Playing pool, "
    "Blow-drying hair, Cricket, Spinning, Running a marathon, Table soccer, Playing flauta, Ice fishing, "
    "Tai chi, Archery, Shaving, Using the monkey bar, Layup drill in basketball, Spread mulch, "
    "Skateboarding, Canoeing, Mowing the lawn, Beach soccer, Hanging wallpaper, Tango, Disc dog, "
    "Powerbocking, Getting a tattoo, Doing nails, Snowboarding, Putting on shoes, Clipping cat claws, "
    "Snow tubing, River tubing, Putting on makeup, Decorating the Christmas tree, Fixing bicycle, "
    "Hitting a pinata, High jump, Doing karate, Kayaking, Grooming dog, Bungee jumping, Washing hands, "
    "Painting fence, Doing step aerobics, Installing carpet, Playing saxophone, Long jump, Javelin throw, "
    "Playing accordion, Smoking a cigarette, Belly dance, Playing polo, Throwing darts, "
    "Roof shingle removal, Tennis serve with ball bouncing, Skiing, Peeling potatoes, Elliptical trainer, "
    "Building sandcastles, Drinking beer, Rock-paper-scissors, Using the pommel horse, Croquet, "
    "Laying tile, Cleaning windows, Fixing the roof, Springboard diving, Waterskiing, Using uneven bars, "
    "Having an ice cream, Sailing, Washing face, Knitting, Bullfighting, Applying sunscreen, "
    "Painting furniture, Grooming horse, Carving jack-o-lanterns";
const char* kAnetVal =
    "Swinging at the playground, Dodgeball, Ballet, Playing harmonica, Paintball, Cumbia, Rafting, Hula hoop, "
    "Cheerleading, Vacuuming floor, Playing blackjack, Waxing skis, Curling, Using the rowing machine, "
    "Ironing clothes, Playing guitarra, Sumo, Putting in contact lenses, Brushing hair, Volleyball";
const char* kAnetTest =
    "Hurling, Polishing forniture, BMX, Riding bumper cars, Starting a campfire, Walking the dog, Preparing salad, "
    "Plataform diving, Breakdancing, Camel ride, Hand car wash, Making an omelette, Shuffleboard, Calf roping, "
    "Shaving legs, Snatch, Cleaning sink, Rope skipping, Drinking coffee, Pole vault";
const char* kThumosTrain =
    "BaseballPitch, BasketballDunk, Billiards, CleanAndJerk, CliffDiving, CricketBowling, CricketShot, Diving, "
    "FrisbeeCatch, GolfSwing, HammerThrow, HighJump, JavelinThrow, LongJump, PoleVault, Shotput";
const char* kThumosVal = "SoccerPenalty, TennisSwing";
const char* kThumosTest = "ThrowDiscus, VolleyballSpiking";

// ---- shared synthetic model ------------------------------------------------------

RunConfig synthetic_config() {
  RunConfig cfg;
  cfg.apply_preset("synthetic");
  cfg.set("seed=0");
  cfg.set("train.iterations=2000");
  cfg.set("train.supports=5");
  cfg.set("synthetic.noise_std=0.25");
  cfg.set("eval.episodes=50");
  return cfg;
}

struct Shared {
  RunConfig cfg = synthetic_config();
  TrainOutcome trained;
  double train_seconds = 0.0;
};

Shared& shared() {
  static Shared s = [] {
    Shared out;
    const auto t0 = Clock::now();
    out.trained = run_training(out.cfg);
    out.train_seconds = seconds_since(t0);
    return out;
  }();
  return s;
}

// ---- criteria --------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  const auto entries = gradcheck_suite(0);
  const double secs = seconds_since(t0);
  const std::set<std::string> needed{"basic_block", "mem", "residual_block", "pam", "pmm",
                                     "fuse", "heads", "joint_loss"};
  std::set<std::string> seen;
  double worst = 0.0;
  for (const auto& e : entries) {
    seen.insert(e.module);
    worst = std::max(worst, e.max_rel_error);
  }
  const bool covered = std::includes(seen.begin(), seen.end(), needed.begin(), needed.end());
  return {covered && worst < 1e-5 && secs < 30.0,
          "max rel error " + fmt("%.2e", worst) + " over " + std::to_string(entries.size()) + " modules in " +
              fmt("%.2f", secs) + " s"};
}

Outcome residual_identity() {
  Rng rng(11);
  AlignmentDims dims;
  dims.channels = 16;
  dims.depth = 3;
  diff::ParameterStore store;
  add_alignment(store, dims, rng, OutputInit::Xavier);
  for (auto& p : store) {
    if (p.name.find(".c1.") != std::string::npos) p.value.setZero();
  }
  bool exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix fq = random_matrix(rng, 7, 16);
    const Matrix fs = random_matrix(rng, 3 * 4, 16);
    diff::Tape tape;
    const auto out = align(tape, store, dims, tape.constant(fq), tape.constant(fs), 3, 4);
    exact = exact && out.pn.value() == fq && out.m_sq.value() == fq;
  }
  return {exact, exact ? "P_n == F_Q bitwise on 20 inputs" : "non-identity output"};
}

Outcome pmm_range() {
  Rng rng(12);
  double lo = 0.0, hi = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int r = 1 + static_cast<int>(rng.below(6));
    const int s = 1 + static_cast<int>(rng.below(5));
    const int t = 1 + static_cast<int>(rng.below(4));
    const int c = 2 + static_cast<int>(rng.below(15));
    const double scale = std::pow(10.0, rng.uniform(-3.0, 2.0));
    diff::Tape tape;
    const Matrix w = pairwise_match(tape.constant(random_matrix(rng, r, c, scale)),
                                    tape.constant(random_matrix(rng, s * t, c, scale)), s, t)
                         .weights.value();
    lo = std::min(lo, w.minCoeff());
    hi = std::max(hi, w.maxCoeff());
  }
  double self_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix row = random_matrix(rng, 1, 12);
    diff::Tape tape;
    const Matrix w = pairwise_match(tape.constant(row), tape.constant(row.replicate(4, 1)), 1, 4).weights.value();
    self_err = std::max(self_err, std::abs(w(0, 0) - 0.5));
  }
  return {lo >= -0.5 && hi <= 0.5 && self_err <= 1e-9,
          "W in [" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "], self-match error " + fmt("%.1e", self_err)};
}

bool same(const PredictionSet& a, const PredictionSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] == b[i])) return false;
  }
  return true;
}

Outcome permutation_invariance() {
  Shared& sh = shared();
  const EvalSettings es = sh.cfg.eval();
  const InferConfig icfg = sh.cfg.inference();
  Rng rng(13);
  int identical = 0;
  const int n = 10;
  for (int i = 0; i < n; ++i) {
    EpisodeTensors ep = synthetic_eval_episode(sh.cfg, es, static_cast<std::uint64_t>(i));
    const auto base = infer(sh.trained.model, ep, icfg);
    bool all = true;
    for (int p = 0; p < 3; ++p) {
      rng.shuffle(ep.supports);
      all = all && same(base, infer(sh.trained.model, ep, icfg));
    }
    identical += all;
  }
  return {identical == n, std::to_string(identical) + "/" + std::to_string(n) + " episodes identical under 3 shuffles"};
}

// Ranked prefix enumeration with greedy best-overlap matching.
double brute_force_ap(std::vector<ScoredSegment> preds, const std::vector<TemporalSegment>& gts, double theta) {
  std::stable_sort(preds.begin(), preds.end(), [](const ScoredSegment& a, const ScoredSegment& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
    return a.segment.end < b.segment.end;
  });
  std::vector<double> precision, recall;
  std::vector<bool> used(gts.size(), false);
  int tp = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    int best = -1;
    double best_o = theta;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = oracle::tiou(preds[k].segment, gts[g]);
      if (!used[g] && o > best_o) {
        best_o = o;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
  }
  double ap = 0.0, prev = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    double p = 0.0;
    for (std::size_t j = k; j < preds.size(); ++j) p = std::max(p, precision[j]);
    ap += (recall[k] - prev) * p;
    prev = recall[k];
  }
  return ap;
}

Outcome oracle_equivalences() {
  Rng rng(14);
  int nms_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<ScoredSegment> c;
    const int n = 1 + static_cast<int>(rng.below(50));
    for (int i = 0; i < n; ++i) c.push_back({random_segment(rng, 200.0), static_cast<double>(rng.below(20)) / 19.0});
    const double thr = rng.uniform(0.1, 0.9);
    nms_mismatch += !(nms(c, thr) == oracle::nms(c, thr));
  }
  double ap_err = 0.0;
  int ap_cases = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<TemporalSegment> gts;
    const int ng = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < ng; ++i) gts.push_back(random_segment(rng, 100.0));
    std::vector<ScoredSegment> preds;
    const int np = static_cast<int>(rng.below(7));
    for (int i = 0; i < np; ++i) {
      TemporalSegment s = random_segment(rng, 100.0);
      if (rng.uniform() < 0.4) s = gts[rng.below(static_cast<std::uint64_t>(ng))];
      preds.push_back({s, static_cast<double>(rng.below(5)) / 4.0});
    }
    for (double theta : {0.5, 0.7, 0.9}) {
      ap_err = std::max(ap_err, std::abs(*episode_ap(preds, gts, theta) - brute_force_ap(preds, gts, theta)));
      ++ap_cases;
    }
  }
  double rt_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const TemporalSegment p = random_segment(rng, 1000.0);
    const TemporalSegment g = random_segment(rng, 1000.0);
    const TemporalSegment back = decode_offsets(p, encode_offsets(p, g)).segment;
    rt_err = std::max({rt_err, std::abs(back.start - g.start) / std::max(1.0, std::abs(g.start)),
                       std::abs(back.end - g.end) / std::max(1.0, std::abs(g.end))});
  }
  return {nms_mismatch == 0 && ap_err <= 1e-9 && rt_err <= 1e-9,
          "NMS mismatches " + std::to_string(nms_mismatch) + "/1000, AP error " + fmt("%.1e", ap_err) + " over " +
              std::to_string(ap_cases) + ", round trip " + fmt("%.1e", rt_err)};
}

Outcome regression_gating() {
  Rng rng(15);
  int changed = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int r = 2 + static_cast<int>(rng.below(8));
    LossTargets t(static_cast<std::size_t>(r));
    std::vector<int> negatives;
    for (int i = 0; i < r; ++i) {
      const auto kind = rng.below(3);
      t[static_cast<std::size_t>(i)].label = kind == 0 ? 1 : (kind == 1 ? 0 : kIgnore);
      t[static_cast<std::size_t>(i)].offsets = {rng.normal(), rng.normal()};
      if (kind == 1) negatives.push_back(i);
    }
    if (negatives.empty()) continue;
    const Matrix logits = random_matrix(rng, r, 1);
    const Matrix offsets = random_matrix(rng, r, 2);
    Matrix moved = offsets;
    for (int i : negatives) moved.row(i) = random_matrix(rng, 1, 2, 100.0);
    diff::Tape tape;
    const double a = joint_loss(tape.constant(logits), tape.constant(offsets), t, {}, 3.0, 2.0).total.value()(0, 0);
    const double b = joint_loss(tape.constant(logits), tape.constant(moved), t, {}, 3.0, 2.0).total.value()(0, 0);
    changed += a != b;
  }
  return {changed == 0, std::to_string(changed) + " of 500 perturbations changed the loss"};
}

struct SyntheticEvals {
  EvalResult n5, n1, noisy1, noisy2;
};

SyntheticEvals& synthetic_evals() {
  static SyntheticEvals ev = [] {
    Shared& sh = shared();
    SyntheticEvals out;
    EvalSettings es = sh.cfg.eval();
    es.supports = 5;
    out.n5 = run_evaluation(sh.trained.model, sh.cfg, es);
    EvalSettings one = es;
    one.supports = 1;
    out.n1 = run_evaluation(sh.trained.model, sh.cfg, one);
    EvalSettings n1 = es;
    n1.noisy_count = 1;
    out.noisy1 = run_evaluation(sh.trained.model, sh.cfg, n1);
    EvalSettings n2 = es;
    n2.noisy_count = 2;
    n2.noisy_same_class = true;
    out.noisy2 = run_evaluation(sh.trained.model, sh.cfg, n2);
    return out;
  }();
  return ev;
}

Outcome synthetic_end_to_end() {
  const auto t0 = Clock::now();
  Shared& sh = shared();
  SyntheticEvals& ev = synthetic_evals();
  const double total = sh.train_seconds + seconds_since(t0);
  const double m5 = ev.n5.map_at(0.5);
  const double m1 = ev.n1.map_at(0.5);
  return {m5 >= 0.9 && m5 >= m1 && total < 600.0,
          "mAP@0.5 N=5 " + fmt("%.4f", m5) + ", N=1 " + fmt("%.4f", m1) + ", " + fmt("%.1f", total) + " s"};
}

Outcome noisy_support_direction() {
  SyntheticEvals& ev = synthetic_evals();
  const double clean = ev.n5.map_at(0.5);
  const double one = ev.noisy1.map_at(0.5);
  const double two = ev.noisy2.map_at(0.5);
  return {clean >= one && one >= two,
          "mAP@0.5 clean " + fmt("%.4f", clean) + ", 1 noisy " + fmt("%.4f", one) + ", 2 noisy same class " +
              fmt("%.4f", two)};
}

/// Videos for every class: one clean instance each, plus multi-action and
/// over-long videos the reorganizer must split or drop.
std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::pair<double, double>>>>> corpus_videos(
    const std::vector<std::string>& classes) {
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::pair<double, double>>>>> out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string& a = classes[i];
    const std::string& b = classes[(i + 7) % classes.size()];
    out.push_back({"single_" + std::to_string(i), {{a, {2.0, 9.0}}}});
    out.push_back({"double_" + std::to_string(i), {{a, {3.0, 8.0}}, {b, {40.0, 52.0}}}});
    out.push_back({"long_" + std::to_string(i), {{a, {1.0, 60.0}}}});
  }
  return out;
}

int frames_of(const std::string& id) { return id.rfind("single_", 0) == 0 ? 600 : 2400; }

Outcome split_reproduction() {
  const fs::path dir = fs::temp_directory_path() / "fscal_acceptance_splits";
  fs::remove_all(dir);
  fs::create_directories(dir);
  bool ok = true;
  std::ostringstream detail;
  struct Case {
    Dataset dataset;
    AnnotationFormat format;
    const char* train;
    const char* val;
    const char* test;
    std::size_t sizes[3];
  };
  const Case cases[] = {{Dataset::ActivityNet, AnnotationFormat::ActivityNet, kAnetTrain, kAnetVal, kAnetTest, {160, 20, 20}},
                        {Dataset::Thumos, AnnotationFormat::Thumos, kThumosTrain, kThumosVal, kThumosTest, {16, 2, 2}}};
  for (const Case& c : cases) {
    const auto train = split_names(c.train);
    const auto val = split_names(c.val);
    const auto test = split_names(c.test);
    std::vector<std::string> all = train;
    all.insert(all.end(), val.begin(), val.end());
    all.insert(all.end(), test.begin(), test.end());
    const auto videos = corpus_videos(all);
    fs::path file;
    if (c.format == AnnotationFormat::ActivityNet) {
      nlohmann::json db;
      for (const auto& [id, inst] : videos) {
        nlohmann::json anns = nlohmann::json::array();
        for (const auto& [label, seg] : inst) anns.push_back({{"label", label}, {"segment", {seg.first, seg.second}}});
        db["database"][id] = {{"num_frames", frames_of(id)}, {"fps", 30}, {"annotations", anns}};
      }
      file = dir / "activitynet.json";
      std::ofstream(file) << db.dump();
    } else {
      file = dir / "thumos.csv";
      std::ofstream out(file);
      out << "# video,label,start,end,frames,fps\n";
      for (const auto& [id, inst] : videos) {
        for (const auto& [label, seg] : inst) out << id << "," << label << "," << seg.first << "," << seg.second << "," << frames_of(id) << ",30\n";
      }
    }
    const IngestResult in = ingest_annotations(file, c.format);
    const ClassSplit split = split_classes(class_labels(in.videos), SplitMode::Fixed, 0, c.dataset);
    const bool sizes = split.train.size() == c.sizes[0] && split.val.size() == c.sizes[1] && split.test.size() == c.sizes[2];
    const bool names = split.train == train && split.val == val && split.test == test;
    const PhaseData data = reorganize_common_instance(in.videos, split, 768);
    bool single = true, short_enough = true, disjoint = true;
    std::size_t kept = 0;
    for (auto phase : {Phase::Train, Phase::Val, Phase::Test}) {
      for (const auto& v : data[phase]) {
        ++kept;
        single = single && v.instances.size() == 1;
        short_enough = short_enough && v.num_frames <= 768;
        if (phase == Phase::Train) {
          for (const auto& inst : v.instances) {
            disjoint = disjoint && !std::binary_search(val.begin(), val.end(), inst.label) &&
                       !std::binary_search(test.begin(), test.end(), inst.label);
          }
        }
      }
    }
    const bool pass = sizes && names && single && short_enough && disjoint && kept > 0;
    ok = ok && pass;
    detail << (c.dataset == Dataset::ActivityNet ? "activitynet " : "thumos ") << split.train.size() << "/"
           << split.val.size() << "/" << split.test.size() << (names ? " names match" : " NAMES DIFFER") << ", "
           << kept << " videos" << (single && short_enough ? "" : " (multi-instance or long video kept)")
           << (disjoint ? "" : " (leak)");
    if (c.dataset == Dataset::ActivityNet) detail << "; ";
  }
  return {ok, detail.str()};
}

Outcome long_video_path() {
  Shared& sh = shared();
  const EvalSettings es = sh.cfg.eval();
  const InferConfig icfg = sh.cfg.inference();
  bool equal = true;
  for (int frames : {256, 512, 768}) {
    RunConfig c = sh.cfg;
    c.set("synthetic.num_frames=" + std::to_string(frames));
    c.set("synthetic.gt_max_frames=" + std::to_string(std::min(320, frames - 32)));
    for (std::uint64_t i = 0; i < 3; ++i) {
      const auto ep = synthetic_eval_episode(c, es, i);
      equal = equal && same(infer(sh.trained.model, ep, icfg), infer_long(sh.trained.model, ep, icfg));
    }
  }
  RunConfig lc = sh.cfg;
  lc.set("synthetic.num_frames=3000");
  const auto long_ep = synthetic_eval_episode(lc, es, 0);
  const auto preds = infer_long(sh.trained.model, long_ep, icfg);
  const double top1 = preds.empty() ? 0.0 : tiou(preds[0].segment, long_ep.gts[0]);
  // Informational: hit rate over further long episodes.
  int hits = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto ep = synthetic_eval_episode(lc, es, i);
    const auto p = infer_long(sh.trained.model, ep, icfg);
    hits += !p.empty() && tiou(p[0].segment, ep.gts[0]) > 0.5;
  }
  return {equal && long_ep.num_frames == 3000 && long_ep.gts.size() == 1 && top1 > 0.5,
          std::string(equal ? "infer_long == infer up to 768 frames" : "infer_long differs from infer") +
              ", 3000-frame top-1 tIoU " + fmt("%.3f", top1) +
              " (top-1 above 0.5 on " + std::to_string(hits) + "/20 such videos)"};
}

Outcome depth_knob() {
  AlignmentDims dims;
  dims.channels = 64;
  std::vector<std::size_t> counts;
  for (int n = 1; n <= 6; ++n) {
    ModelConfig mc;
    mc.backbone.channels = 64;
    mc.backbone.input_channels = 64;
    mc.align.channels = 64;
    mc.align.depth = n;
    counts.push_back(build_model(mc, 0).params.scalar_count());
  }
  const std::size_t block = basic_block_param_count(dims);
  bool exact = true;
  for (std::size_t i = 1; i < counts.size(); ++i) exact = exact && counts[i] - counts[i - 1] == block;
  return {exact, "one basic block = " + std::to_string(block) + " parameters; totals " + std::to_string(counts.front()) +
                     " .. " + std::to_string(counts.back())};
}

Outcome determinism() {
  Shared& sh = shared();
  const TrainOutcome again = run_training(sh.cfg);
  const bool traces = again.trace == sh.trained.trace;
  bool params = true;
  auto it = again.model.params.begin();
  for (const auto& p : sh.trained.model.params) {
    params = params && p.value == it->value;
    ++it;
  }
  const fs::path base = fs::temp_directory_path() / "fscal_acceptance_eval";
  fs::remove_all(base);
  const EvalSettings es = sh.cfg.eval();
  const nlohmann::ordered_json meta{{"config", sh.cfg.doc()}};
  report(run_evaluation(sh.trained.model, sh.cfg, es), meta, base / "a");
  report(run_evaluation(sh.trained.model, sh.cfg, es), meta, base / "b");
  const bool docs = read_file(base / "a" / "result.json") == read_file(base / "b" / "result.json");
  return {traces && params && docs, std::string(traces ? "identical loss traces" : "loss traces differ") +
                                        (params ? ", identical parameters" : ", parameters differ") +
                                        (docs ? ", identical result documents" : ", result documents differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"residual identity", residual_identity},
      {"pairwise matching range and self-match", pmm_range},
      {"support permutation invariance", permutation_invariance},
      {"oracle equivalences", oracle_equivalences},
      {"regression gating", regression_gating},
      {"synthetic end-to-end", synthetic_end_to_end},
      {"noisy support degradation direction", noisy_support_direction},
      {"split reproduction", split_reproduction},
      {"long video path", long_video_path},
      {"depth knob", depth_knob},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
