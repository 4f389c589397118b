#include "fscal/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "fscal/error.hpp"
#include "fscal/io.hpp"
#include "fscal/rng.hpp"

namespace fscal {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Train: return "train";
    case Phase::Val: return "val";
    case Phase::Test: return "test";
  }
  return "?";
}

Phase parse_phase(const std::string& s) {
  if (s == "train") return Phase::Train;
  if (s == "val") return Phase::Val;
  if (s == "test") return Phase::Test;
  throw ConfigError("unknown phase: " + s);
}

// ---- ingestion --------------------------------------------------------------

namespace {

/// Appends an instance unless it falls outside [0, num_frames]. The
/// tolerance absorbs rounding in seconds -> frames conversion.
void add_instance(AnnotatedVideo& v, std::string label, double start_sec, double end_sec,
                  std::vector<std::string>& warnings) {
  TemporalSegment seg{start_sec * v.fps, end_sec * v.fps};
  constexpr double kTol = 1e-6;
  if (!(seg.start >= -kTol && seg.end <= v.num_frames + kTol && seg.start < seg.end)) {
    std::ostringstream msg;
    msg << "video '" << v.video_id << "': instance '" << label << "' [" << start_sec << ", "
        << end_sec << "]s outside [0, " << v.num_frames << "] frames; skipped";
    warnings.push_back(msg.str());
    return;
  }
  seg.start = std::max(0.0, seg.start);
  seg.end = std::min<double>(v.num_frames, seg.end);
  v.instances.push_back({std::move(label), seg});
}

void sort_instances(AnnotatedVideo& v) {
  std::stable_sort(v.instances.begin(), v.instances.end(),
                   [](const ActionInstance& a, const ActionInstance& b) {
                     return a.segment.start < b.segment.start;
                   });
}

}  // namespace

IngestResult parse_activitynet(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("activitynet annotations: ") + e.what());
  }
  const json& db = doc.contains("database") ? doc.at("database") : doc;
  if (!db.is_object()) throw ParseError("activitynet annotations: expected an object of videos");

  IngestResult out;
  for (const auto& [vid, rec] : db.items()) {
    const std::string ctx = "video '" + vid + "'";
    if (!rec.is_object()) throw ParseError(ctx + ": record is not an object");
    auto number = [&](const char* key) -> std::optional<double> {
      if (!rec.contains(key) || rec.at(key).is_null()) return std::nullopt;
      if (!rec.at(key).is_number()) throw ParseError(ctx + ": field '" + key + "' is not a number");
      return rec.at(key).get<double>();
    };
    const auto fps = number("fps");
    const auto frames = number("num_frames");
    const auto duration = number("duration");

    AnnotatedVideo v;
    v.video_id = vid;
    v.source_id = vid;
    if (fps && frames) {
      v.fps = *fps;
      v.num_frames = static_cast<int>(std::lround(*frames));
    } else if (fps && duration) {
      v.fps = *fps;
      v.num_frames = static_cast<int>(std::lround(*duration * *fps));
    } else if (frames && duration) {
      v.num_frames = static_cast<int>(std::lround(*frames));
      v.fps = *frames / *duration;
    } else {
      throw ParseError(ctx + ": needs two of num_frames, duration, fps");
    }
    if (!(v.fps > 0.0) || v.num_frames <= 0) throw ParseError(ctx + ": non-positive fps or length");

    if (!rec.contains("annotations") || !rec.at("annotations").is_array()) {
      throw ParseError(ctx + ": missing 'annotations' array");
    }
    const auto& anns = rec.at("annotations");
    for (std::size_t i = 0; i < anns.size(); ++i) {
      const std::string actx = ctx + ": annotations[" + std::to_string(i) + "]";
      const auto& a = anns[i];
      if (!a.is_object() || !a.contains("label") || !a.at("label").is_string()) {
        throw ParseError(actx + ": missing string 'label'");
      }
      if (!a.contains("segment") || !a.at("segment").is_array() || a.at("segment").size() != 2 ||
          !a.at("segment")[0].is_number() || !a.at("segment")[1].is_number()) {
        throw ParseError(actx + ": 'segment' must be [start_sec, end_sec]");
      }
      add_instance(v, a.at("label").get<std::string>(), a.at("segment")[0].get<double>(),
                   a.at("segment")[1].get<double>(), out.warnings);
    }
    sort_instances(v);
    out.videos.push_back(std::move(v));
  }
  std::sort(out.videos.begin(), out.videos.end(),
            [](const AnnotatedVideo& a, const AnnotatedVideo& b) { return a.video_id < b.video_id; });
  return out;
}

IngestResult parse_thumos(const std::string& text) {
  std::map<std::string, AnnotatedVideo> by_id;
  IngestResult out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::replace(line.begin(), line.end(), '\t', ' ');
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    if (f.empty()) continue;
    const std::string ctx = "line " + std::to_string(lineno);
    if (f.size() != 6) {
      throw ParseError(ctx + ": expected 6 fields (video_id label start end num_frames fps), got " +
                       std::to_string(f.size()));
    }
    double start, end, frames, fps;
    try {
      std::size_t used = 0;
      auto num = [&](const std::string& s) {
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      };
      start = num(f[2]);
      end = num(f[3]);
      frames = num(f[4]);
      fps = num(f[5]);
    } catch (const std::exception&) {
      throw ParseError(ctx + ": non-numeric field");
    }
    if (!(fps > 0.0) || !(frames >= 1.0)) throw ParseError(ctx + ": non-positive fps or num_frames");

    auto [it, inserted] = by_id.try_emplace(f[0]);
    AnnotatedVideo& v = it->second;
    if (inserted) {
      v.video_id = f[0];
      v.source_id = f[0];
      v.num_frames = static_cast<int>(std::lround(frames));
      v.fps = fps;
    } else if (v.num_frames != static_cast<int>(std::lround(frames)) || v.fps != fps) {
      throw ParseError(ctx + ": video '" + f[0] + "' redeclared with different num_frames/fps");
    }
    if (f[1] == "Ambiguous") {
      out.warnings.push_back(ctx + ": 'Ambiguous' instance skipped");
      continue;
    }
    add_instance(v, f[1], start, end, out.warnings);
  }
  for (auto& [id, v] : by_id) {
    sort_instances(v);
    out.videos.push_back(std::move(v));
  }
  return out;
}

IngestResult ingest_annotations(const std::filesystem::path& path, AnnotationFormat format) {
  const std::string text = read_file(path);
  return format == AnnotationFormat::ActivityNet ? parse_activitynet(text) : parse_thumos(text);
}

std::set<std::string> class_labels(const std::vector<AnnotatedVideo>& videos) {
  std::set<std::string> out;
  for (const auto& v : videos) {
    for (const auto& i : v.instances) out.insert(i.label);
  }
  return out;
}

// ---- class splits -------------------------------------------------------------

const std::vector<std::string>& ClassSplit::classes(Phase p) const {
  switch (p) {
    case Phase::Train: return train;
    case Phase::Val: return val;
    case Phase::Test: return test;
  }
  return train;
}

std::optional<Phase> ClassSplit::phase_of(const std::string& label) const {
  for (Phase p : {Phase::Train, Phase::Val, Phase::Test}) {
    const auto& c = classes(p);
    if (std::binary_search(c.begin(), c.end(), label)) return p;
  }
  return std::nullopt;
}

ClassSplit split_classes(const std::set<std::string>& classes, SplitMode mode, std::uint64_t seed,
                         Dataset dataset) {
  require(classes.size() >= 3, "split_classes: need at least 3 classes");
  ClassSplit split;
  if (mode == SplitMode::Fixed) {
    const FixedSplitLists& lists = fixed_split_lists(dataset);
    std::set<std::string> listed;
    for (const auto* l : {&lists.train, &lists.val, &lists.test}) listed.insert(l->begin(), l->end());
    std::vector<std::string> missing, unexpected;
    std::set_difference(listed.begin(), listed.end(), classes.begin(), classes.end(),
                        std::back_inserter(missing));
    std::set_difference(classes.begin(), classes.end(), listed.begin(), listed.end(),
                        std::back_inserter(unexpected));
    if (!missing.empty() || !unexpected.empty()) {
      std::string msg = "fixed split does not match input classes.";
      auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
        return s;
      };
      if (!missing.empty()) msg += " missing: " + join(missing) + ".";
      if (!unexpected.empty()) msg += " not in tables: " + join(unexpected) + ".";
      throw ConfigError(msg);
    }
    split.train = lists.train;
    split.val = lists.val;
    split.test = lists.test;
  } else {
    std::vector<std::string> all(classes.begin(), classes.end());
    Rng rng(seed);
    rng.shuffle(all);
    const auto n = static_cast<long>(all.size());
    const long n_val = std::max(1L, std::lround(0.1 * n));
    const long n_test = std::max(1L, std::lround(0.1 * n));
    const long n_train = n - n_val - n_test;
    split.train.assign(all.begin(), all.begin() + n_train);
    split.val.assign(all.begin() + n_train, all.begin() + n_train + n_val);
    split.test.assign(all.begin() + n_train + n_val, all.end());
  }
  for (auto* v : {&split.train, &split.val, &split.test}) std::sort(v->begin(), v->end());
  return split;
}

// ---- reorganization -------------------------------------------------------------

PhaseData reorganize_common_instance(const std::vector<AnnotatedVideo>& videos,
                                     const ClassSplit& split, int max_frames,
                                     ReorganizeStats* stats) {
  ReorganizeStats local;
  ReorganizeStats& st = stats ? *stats : local;
  PhaseData out;
  for (const auto& v : videos) {
    if (v.instances.size() == 1) {
      const auto phase = split.phase_of(v.instances[0].label);
      if (!phase) {
        ++st.discarded_unsplit;
      } else if (v.num_frames > max_frames) {
        ++st.discarded_long;
      } else {
        out[*phase].push_back(v);
        ++st.derived;
      }
      continue;
    }
    const auto& inst = v.instances;  // sorted by start
    for (std::size_t k = 0; k < inst.size(); ++k) {
      const TemporalSegment& seg = inst[k].segment;
      bool overlaps = false;
      double prev_end = 0.0;
      double next_start = v.num_frames;
      for (std::size_t j = 0; j < inst.size(); ++j) {
        if (j == k) continue;
        const TemporalSegment& o = inst[j].segment;
        if (o.start < seg.end && seg.start < o.end) overlaps = true;
        if (o.end <= seg.start) prev_end = std::max(prev_end, o.end);
        if (o.start >= seg.end) next_start = std::min(next_start, o.start);
      }
      if (overlaps) {
        ++st.discarded_overlap;
        continue;
      }
      const auto phase = split.phase_of(inst[k].label);
      if (!phase) {
        ++st.discarded_unsplit;
        continue;
      }
      // Background reaches halfway toward each neighbour; integer frame
      // bounds never cross into a neighbour nor cut the instance itself.
      const bool has_prev = k > 0 || prev_end > 0.0;
      const double lo_mid = has_prev ? 0.5 * (prev_end + seg.start) : 0.0;
      const double hi_mid = next_start < v.num_frames ? 0.5 * (seg.end + next_start) : v.num_frames;
      const double lo = std::min(std::ceil(lo_mid), std::floor(seg.start));
      const double hi = std::max(std::floor(hi_mid), std::ceil(seg.end));
      AnnotatedVideo d;
      d.video_id = v.video_id + "#" + std::to_string(k);
      d.source_id = v.source_id.empty() ? v.video_id : v.source_id;
      d.source_offset = v.source_offset + lo;
      d.fps = v.fps;
      d.num_frames = static_cast<int>(std::lround(std::min<double>(hi, v.num_frames) - std::max(0.0, lo)));
      d.instances.push_back({inst[k].label, {seg.start - lo, seg.end - lo}});
      if (d.num_frames > max_frames) {
        ++st.discarded_long;
        continue;
      }
      out[*phase].push_back(std::move(d));
      ++st.derived;
    }
  }
  return out;
}

PhaseData reorganize_multi_instance(const std::vector<AnnotatedVideo>& videos,
                                    const ClassSplit& split, ReorganizeStats* stats) {
  ReorganizeStats local;
  ReorganizeStats& st = stats ? *stats : local;
  PhaseData out;
  for (const auto& v : videos) {
    std::map<std::string, int> counts;
    for (const auto& i : v.instances) {
      if (split.phase_of(i.label)) ++counts[i.label];
    }
    if (counts.empty()) {
      ++st.discarded_unsplit;
      continue;
    }
    int best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    std::set<Phase> leaders;
    for (const auto& [label, c] : counts) {
      if (c == best) leaders.insert(*split.phase_of(label));
    }
    const Phase phase = leaders.size() == 1 ? *leaders.begin() : Phase::Train;
    out[phase].push_back(v);
    ++st.derived;
  }
  return out;
}

namespace {

ordered_json video_json(const AnnotatedVideo& v) {
  ordered_json j;
  j["video_id"] = v.video_id;
  j["source_id"] = v.source_id;
  j["source_offset"] = v.source_offset;
  j["num_frames"] = v.num_frames;
  j["fps"] = v.fps;
  ordered_json inst = ordered_json::array();
  for (const auto& i : v.instances) {
    inst.push_back({{"label", i.label}, {"segment", {i.segment.start, i.segment.end}}});
  }
  j["instances"] = std::move(inst);
  return j;
}

}  // namespace

ordered_json split_manifest(const ClassSplit& split, const PhaseData& data,
                            const ordered_json& meta) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["meta"] = meta;
  ordered_json phases = ordered_json::array();
  for (Phase p : {Phase::Train, Phase::Val, Phase::Test}) {
    ordered_json ph;
    ph["phase"] = phase_name(p);
    ph["classes"] = split.classes(p);
    ordered_json vids = ordered_json::array();
    for (const auto& v : data[p]) vids.push_back(video_json(v));
    ph["videos"] = std::move(vids);
    phases.push_back(std::move(ph));
  }
  doc["phases"] = std::move(phases);
  return doc;
}

LoadedManifest load_manifest(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("split manifest: ") + e.what());
  }
  try {
    if (doc.at("schema_version").get<int>() != 1) {
      throw ParseError("split manifest: unsupported schema_version");
    }
    LoadedManifest out;
    for (const auto& ph : doc.at("phases")) {
      const Phase p = parse_phase(ph.at("phase").get<std::string>());
      auto classes = ph.at("classes").get<std::vector<std::string>>();
      std::sort(classes.begin(), classes.end());
      (p == Phase::Train ? out.split.train : p == Phase::Val ? out.split.val : out.split.test) =
          std::move(classes);
      for (const auto& vj : ph.at("videos")) {
        AnnotatedVideo v;
        v.video_id = vj.at("video_id").get<std::string>();
        v.source_id = vj.at("source_id").get<std::string>();
        v.source_offset = vj.at("source_offset").get<double>();
        v.num_frames = vj.at("num_frames").get<int>();
        v.fps = vj.at("fps").get<double>();
        for (const auto& ij : vj.at("instances")) {
          const auto seg = ij.at("segment");
          v.instances.push_back({ij.at("label").get<std::string>(),
                                 {seg.at(0).get<double>(), seg.at(1).get<double>()}});
        }
        out.data[p].push_back(std::move(v));
      }
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("split manifest: ") + e.what());
  }
}

// ---- episodes ----------------------------------------------------------------------

ordered_json to_json(const Episode& e) {
  ordered_json j;
  j["phase"] = phase_name(e.phase);
  j["query_index"] = e.query_index;
  j["query_id"] = e.query_id;
  j["common_class"] = e.common_class;
  ordered_json gts = ordered_json::array();
  for (const auto& g : e.gt_segments) gts.push_back({g.start, g.end});
  j["gt_segments"] = std::move(gts);
  ordered_json sup = ordered_json::array();
  for (const auto& s : e.supports) {
    sup.push_back({{"video_id", s.video_id},
                   {"label", s.label},
                   {"segment", {s.segment.start, s.segment.end}},
                   {"noisy", s.noisy},
                   {"image", s.image}});
  }
  j["supports"] = std::move(sup);
  return j;
}

EpisodeSampler::EpisodeSampler(const PhaseData& data, const ClassSplit& split, std::uint64_t seed)
    : data_(data), split_(split), seed_(seed) {}

Episode EpisodeSampler::next_train(const EpisodeOptions& opts) {
  const std::uint64_t s = mix_seed(mix_seed(seed_, 0x7a11), train_counter_++);
  return draw(Phase::Train, s, opts);
}

Episode EpisodeSampler::fixed(Phase phase, std::uint64_t index, const EpisodeOptions& opts) const {
  const std::uint64_t s = mix_seed(mix_seed(seed_, 0xf1ed + static_cast<int>(phase)), index);
  return draw(phase, s, opts);
}

const AnnotatedVideo& EpisodeSampler::query_video(const Episode& e) const {
  return data_[e.phase].at(e.query_index);
}

Episode EpisodeSampler::draw(Phase phase, std::uint64_t episode_seed, const EpisodeOptions& opts) const {
  require(opts.supports >= 1, "sample_episode: N must be >= 1");
  require(opts.noisy_count >= 0 && opts.noisy_count <= opts.supports,
          "sample_episode: noisy_count must lie in [0, N]");
  const auto& videos = data_[phase];
  const auto& phase_classes = split_.classes(phase);

  // Support pool: every instance of a phase class in a phase video.
  std::map<std::string, std::vector<SupportClip>> pool;
  std::map<std::string, std::vector<std::string>> pool_source;
  for (const auto& v : videos) {
    for (const auto& i : v.instances) {
      if (!std::binary_search(phase_classes.begin(), phase_classes.end(), i.label)) continue;
      pool[i.label].push_back({v.video_id, i.label, i.segment, false, false});
      pool_source[i.label].push_back(v.source_id.empty() ? v.video_id : v.source_id);
    }
  }
  auto candidates = [&](const std::string& label, const std::string& exclude_source) {
    std::vector<SupportClip> out;
    auto it = pool.find(label);
    if (it == pool.end()) return out;
    for (std::size_t k = 0; k < it->second.size(); ++k) {
      if (pool_source[label][k] != exclude_source) out.push_back(it->second[k]);
    }
    return out;
  };

  const int clean_needed = opts.supports - opts.noisy_count;
  struct Choice {
    std::size_t video;
    std::string label;
  };
  std::vector<Choice> eligible;
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    const auto& v = videos[vi];
    const std::string src = v.source_id.empty() ? v.video_id : v.source_id;
    std::set<std::string> labels;
    for (const auto& i : v.instances) {
      if (std::binary_search(phase_classes.begin(), phase_classes.end(), i.label)) labels.insert(i.label);
    }
    for (const auto& label : labels) {
      if (static_cast<int>(candidates(label, src).size()) >= std::max(clean_needed, 1)) {
        eligible.push_back({vi, label});
      }
    }
  }
  if (eligible.empty()) {
    throw ConfigError(std::string("sample_episode: no eligible class in phase ") + phase_name(phase) +
                      " with >= " + std::to_string(opts.supports) + " support candidates");
  }

  Rng rng(episode_seed);
  const Choice pick = eligible[rng.below(eligible.size())];
  const AnnotatedVideo& q = videos[pick.video];
  const std::string src = q.source_id.empty() ? q.video_id : q.source_id;

  Episode e;
  e.phase = phase;
  e.query_index = pick.video;
  e.query_id = q.video_id;
  e.common_class = pick.label;
  for (const auto& i : q.instances) {
    if (i.label == pick.label) e.gt_segments.push_back(i.segment);
  }

  auto draw_from = [&](std::vector<SupportClip> c, int k) {
    std::vector<SupportClip> out;
    for (int j = 0; j < k; ++j) {
      const std::size_t r = j + rng.below(c.size() - j);
      std::swap(c[j], c[r]);
      out.push_back(c[j]);
    }
    return out;
  };
  e.supports = draw_from(candidates(pick.label, src), clean_needed);

  if (opts.noisy_count > 0) {
    std::vector<std::string> wrong;
    for (const auto& label : phase_classes) {
      if (label == pick.label) continue;
      const auto n = static_cast<int>(candidates(label, src).size());
      if (n >= (opts.noisy_same_class ? opts.noisy_count : 1)) wrong.push_back(label);
    }
    const int classes_needed = opts.noisy_same_class ? 1 : opts.noisy_count;
    if (static_cast<int>(wrong.size()) < classes_needed) {
      throw ConfigError("sample_episode: not enough distractor classes for noisy supports");
    }
    std::vector<std::string> chosen;
    for (int j = 0; j < classes_needed; ++j) {
      const std::size_t r = j + rng.below(wrong.size() - j);
      std::swap(wrong[j], wrong[r]);
      chosen.push_back(wrong[j]);
    }
    std::vector<SupportClip> noisy;
    if (opts.noisy_same_class) {
      noisy = draw_from(candidates(chosen[0], src), opts.noisy_count);
    } else {
      for (const auto& label : chosen) noisy.push_back(draw_from(candidates(label, src), 1)[0]);
    }
    for (auto& c : noisy) {
      c.noisy = true;
      e.supports.push_back(std::move(c));
    }
  }
  for (auto& s : e.supports) s.image = opts.image_support;
  return e;
}

// ---- synthetic ------------------------------------------------------------------------

bool step_inside(int step, int stride, const TemporalSegment& s) {
  const double c = (step + 0.5) * stride;
  return c >= s.start && c < s.end;
}

namespace {

Eigen::VectorXd unit_gaussian(Rng& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v / v.norm();
}

Eigen::VectorXd class_embedding(Rng& rng, const Eigen::VectorXd& shared, double share) {
  const Eigen::VectorXd own = unit_gaussian(rng, static_cast<int>(shared.size()));
  Eigen::VectorXd e = share * shared + std::sqrt(std::max(0.0, 1.0 - share * share)) * own;
  return e / e.norm();
}

diff::Matrix noisy_rows(Rng& rng, int rows, const Eigen::VectorXd& mean, double std_dev) {
  diff::Matrix m(rows, mean.size());
  for (int r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < mean.size(); ++c) m(r, c) = mean[c] + std_dev * rng.normal();
  }
  return m;
}

}  // namespace

SyntheticEpisode synthesize_episode(const SyntheticConfig& cfg) {
  require(cfg.supports >= 1 && cfg.channels >= 1 && cfg.num_frames >= cfg.stride && cfg.stride >= 1,
          "synthesize_episode: invalid dimensions");
  require(cfg.noise_std >= 0.0, "synthesize_episode: noise_std must be >= 0");
  require(cfg.noisy_count >= 0 && cfg.noisy_count <= cfg.supports,
          "synthesize_episode: noisy_count must lie in [0, N]");
  require(cfg.gt_min_frames >= cfg.stride && cfg.gt_min_frames <= cfg.gt_max_frames,
          "synthesize_episode: invalid gt length range");

  // The shared activity direction is a property of the synthetic world,
  // identical for every seed.
  Rng world(0x5eedf00dULL + static_cast<std::uint64_t>(cfg.channels));
  const Eigen::VectorXd shared = unit_gaussian(world, cfg.channels);

  SyntheticEpisode ep;
  ep.num_frames = cfg.num_frames;
  ep.stride = cfg.stride;

  Rng qrng(mix_seed(cfg.seed, 1));
  ep.embedding = class_embedding(qrng, shared, cfg.activity_share);

  const double max_len = std::min<double>(cfg.gt_max_frames, cfg.num_frames);
  const double min_len = std::min(cfg.gt_min_frames, max_len);
  for (int attempt = 0; static_cast<int>(ep.gt_segments.size()) < cfg.num_gt; ++attempt) {
    if (attempt > 10000) throw ConfigError("synthesize_episode: cannot place non-overlapping GT segments");
    const double len = std::round(qrng.uniform(min_len, max_len));
    const double start = std::floor(qrng.uniform(0.0, cfg.num_frames - len + 1.0));
    const TemporalSegment g{start, start + len};
    const bool clash = std::any_of(ep.gt_segments.begin(), ep.gt_segments.end(), [&](const auto& o) {
      return g.start < o.end + cfg.stride && o.start < g.end + cfg.stride;
    });
    if (!clash) ep.gt_segments.push_back(g);
  }
  std::sort(ep.gt_segments.begin(), ep.gt_segments.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });

  // Distractors come from their own stream so adding them leaves the GT
  // placement untouched.
  Rng drng(mix_seed(cfg.seed, 4));
  std::vector<Eigen::VectorXd> distractor_embeddings;
  for (int attempt = 0; static_cast<int>(ep.distractor_segments.size()) < cfg.distractors; ++attempt) {
    if (attempt > 10000) throw ConfigError("synthesize_episode: cannot place distractor segments");
    const double len = std::round(drng.uniform(min_len, max_len));
    const double start = std::floor(drng.uniform(0.0, cfg.num_frames - len + 1.0));
    const TemporalSegment d{start, start + len};
    auto clash = [&](const std::vector<TemporalSegment>& v) {
      return std::any_of(v.begin(), v.end(), [&](const auto& o) {
        return d.start < o.end + cfg.stride && o.start < d.end + cfg.stride;
      });
    };
    if (clash(ep.gt_segments) || clash(ep.distractor_segments)) continue;
    ep.distractor_segments.push_back(d);
    distractor_embeddings.push_back(class_embedding(drng, shared, cfg.activity_share));
  }

  const int steps = cfg.num_frames / cfg.stride;
  ep.query.resize(steps, cfg.channels);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(cfg.channels);
  for (int t = 0; t < steps; ++t) {
    const bool inside = std::any_of(ep.gt_segments.begin(), ep.gt_segments.end(),
                                    [&](const auto& g) { return step_inside(t, cfg.stride, g); });
    const Eigen::VectorXd* mean = inside ? &ep.embedding : &zero;
    for (std::size_t k = 0; k < ep.distractor_segments.size(); ++k) {
      if (step_inside(t, cfg.stride, ep.distractor_segments[k])) mean = &distractor_embeddings[k];
    }
    ep.query.row(t) = noisy_rows(qrng, 1, *mean, cfg.noise_std).row(0);
  }

  Rng nrng(mix_seed(cfg.seed, 3));
  std::vector<Eigen::VectorXd> wrong;
  const int wrong_classes = cfg.noisy_same_class ? std::min(1, cfg.noisy_count) : cfg.noisy_count;
  for (int k = 0; k < wrong_classes; ++k) wrong.push_back(class_embedding(nrng, shared, cfg.activity_share));

  const int first_noisy = cfg.supports - cfg.noisy_count;
  for (int i = 0; i < cfg.supports; ++i) {
    Rng srng(mix_seed(mix_seed(cfg.seed, 2), static_cast<std::uint64_t>(i)));
    const bool noisy = i >= first_noisy;
    const Eigen::VectorXd& mean =
        noisy ? wrong[cfg.noisy_same_class ? 0 : i - first_noisy] : ep.embedding;
    const int len = cfg.support_min_steps +
                    static_cast<int>(srng.below(cfg.support_max_steps - cfg.support_min_steps + 1));
    ep.supports.push_back(noisy_rows(srng, cfg.image_support ? 1 : len, mean, cfg.noise_std));
    ep.noisy.push_back(noisy);
  }
  return ep;
}

}  // namespace fscal
