#include "fscal/config.hpp"

#include <cmath>

#include "fscal/error.hpp"
#include "fscal/io.hpp"

namespace fscal {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ordered_json RunConfig::defaults() {
  ordered_json d;
  d["schema_version"] = kConfigSchemaVersion;
  d["seed"] = 0;
  d["model"] = {{"backbone", "passthrough"},
                {"channels", 512},
                {"input_channels", 512},
                {"stride", 8},
                {"parts", 4},
                {"attn_width", 0},
                {"value_width", 0},
                {"reduction", 4},
                {"depth", 3},
                {"scale_attention", false},
                {"proposal_hidden", 128}};
  d["anchors"] = {{"scales", {32, 64, 128, 256, 512}}};
  d["proposals"] = {{"score_threshold", 0.7},
                    {"min_keep", 16},
                    {"nms", 0.7},
                    {"train_count", 128},
                    {"eval_count", 300}};
  d["targets"] = {{"anchor_pos", 0.7}, {"anchor_neg", 0.3}, {"cond_pos", 0.5}, {"cond_neg", 0.3}};
  d["train"] = {{"lr", 2e-3},
                {"decay_lr", 2e-4},
                {"decay_at", 1250},
                {"iterations", 2000},
                {"supports", 5},
                {"cls_mean", false}};
  d["inference"] = {{"theta", 0.5},
                    {"final_nms", nullptr},
                    {"min_score", 0.0},
                    {"max_window", 768},
                    {"windows", {256, 512, 768}},
                    {"overlap", 0.75}};
  d["eval"] = {{"thresholds", {0.5, 0.6, 0.7, 0.8, 0.9}},
               {"micro_map", false},
               {"episodes", 50},
               {"supports", 5},
               {"phase", "test"},
               {"noisy_count", 0},
               {"noisy_same_class", false},
               {"image_support", false}};
  d["synthetic"] = {{"enabled", false},
                    {"num_frames", 768},
                    {"num_gt", 1},
                    {"noise_std", 0.25},
                    {"gt_min_frames", 96.0},
                    {"gt_max_frames", 320.0},
                    {"support_min_steps", 8},
                    {"support_max_steps", 24},
                    {"activity_share", 0.5},
                    {"distractors", 0}};
  d["data"] = {{"manifest", ""},
               {"features", ""},
               {"annotations", ""},
               {"format", "activitynet"},
               {"dataset", "activitynet"},
               {"split_mode", "fixed"},
               {"variant", "common"},
               {"max_frames", 768}};
  return d;
}

RunConfig::RunConfig() : doc_(defaults()) {}

namespace {

bool compatible(const ordered_json& def, const json& v) {
  if (def.is_null()) return v.is_null() || v.is_number();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_integer()) return v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  return false;
}

void merge_into(ordered_json& dst, const json& src, const ordered_json& def, const std::string& path) {
  if (!src.is_object()) throw ConfigError("config: " + (path.empty() ? "document" : path) + " must be an object");
  for (const auto& [key, value] : src.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!def.contains(key)) throw ConfigError("config: unknown key '" + full + "'");
    const ordered_json& d = def[key];
    if (d.is_object()) {
      merge_into(dst[key], value, d, full);
      continue;
    }
    if (!compatible(d, value)) throw ConfigError("config: key '" + full + "' has the wrong type");
    if (d.is_number_integer() && value.is_number_float()) {
      dst[key] = static_cast<long long>(value.get<double>());
    } else {
      dst[key] = value;
    }
  }
}

template <typename T>
T get(const ordered_json& doc, const char* section, const char* key) {
  return doc.at(section).at(key).get<T>();
}

}  // namespace

void RunConfig::merge(const json& doc) {
  ordered_json next = doc_;
  merge_into(next, doc, defaults(), "");
  if (next.at("schema_version").get<int>() != kConfigSchemaVersion) {
    throw ConfigError("config: unsupported schema_version");
  }
  doc_ = std::move(next);
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return;  // empty file: defaults
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  merge(doc);
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("config: override '" + assignment + "' must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json patch = json::object();
  json* cur = &patch;
  std::size_t begin = 0;
  for (;;) {
    const auto dot = key.find('.', begin);
    const std::string part = key.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (part.empty()) throw ConfigError("config: malformed key '" + key + "'");
    if (dot == std::string::npos) {
      (*cur)[part] = value;
      break;
    }
    cur = &(*cur)[part];
    begin = dot + 1;
  }
  merge(patch);
}

void RunConfig::apply_preset(const std::string& name) {
  if (name == "synthetic") {
    merge(json{{"synthetic", {{"enabled", true}}}, {"model", {{"channels", 64}, {"input_channels", 64}}}});
  } else if (name == "full") {
    merge(json{{"train", {{"lr", 1e-5}, {"decay_lr", 1e-6}, {"decay_at", 25000}, {"iterations", 40000}}}});
  } else {
    throw ConfigError("config: unknown preset '" + name + "'");
  }
}

std::uint64_t RunConfig::seed() const { return doc_.at("seed").get<std::uint64_t>(); }

bool RunConfig::synthetic() const { return get<bool>(doc_, "synthetic", "enabled"); }

ModelConfig RunConfig::model() const {
  ModelConfig m;
  const std::string kind = get<std::string>(doc_, "model", "backbone");
  if (kind == "passthrough") {
    m.backbone.kind = BackboneKind::Passthrough;
  } else if (kind == "encoder") {
    m.backbone.kind = BackboneKind::TemporalEncoder;
  } else {
    throw ConfigError("config: model.backbone must be 'passthrough' or 'encoder'");
  }
  m.backbone.channels = get<int>(doc_, "model", "channels");
  m.backbone.input_channels = get<int>(doc_, "model", "input_channels");
  m.backbone.stride = get<int>(doc_, "model", "stride");
  m.parts = get<int>(doc_, "model", "parts");
  m.proposal_hidden = get<int>(doc_, "model", "proposal_hidden");
  m.align.channels = m.backbone.channels;
  m.align.attn_width = get<int>(doc_, "model", "attn_width");
  m.align.value_width = get<int>(doc_, "model", "value_width");
  m.align.reduction = get<int>(doc_, "model", "reduction");
  m.align.depth = get<int>(doc_, "model", "depth");
  m.align.scale_attention = get<bool>(doc_, "model", "scale_attention");
  m.anchors.scales = get<std::vector<double>>(doc_, "anchors", "scales");
  m.anchors.stride = m.backbone.stride;
  return m;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.lr = get<double>(doc_, "train", "lr");
  t.decay_lr = get<double>(doc_, "train", "decay_lr");
  t.decay_at = get<long long>(doc_, "train", "decay_at");
  t.iterations = get<long long>(doc_, "train", "iterations");
  t.supports = get<int>(doc_, "train", "supports");
  t.cls_mean = get<bool>(doc_, "train", "cls_mean");
  t.seed = seed();
  return t;
}

SelectionPolicy RunConfig::selection() const {
  SelectionPolicy p;
  p.score_threshold = get<double>(doc_, "proposals", "score_threshold");
  p.min_keep = get<int>(doc_, "proposals", "min_keep");
  p.nms_threshold = get<double>(doc_, "proposals", "nms");
  p.train_count = get<int>(doc_, "proposals", "train_count");
  p.eval_count = get<int>(doc_, "proposals", "eval_count");
  if (p.min_keep < 1 || p.train_count < 1 || p.eval_count < 1) {
    throw ConfigError("config: proposal counts must be >= 1");
  }
  return p;
}

TargetConfig RunConfig::targets() const {
  TargetConfig t;
  t.anchor_pos = get<double>(doc_, "targets", "anchor_pos");
  t.anchor_neg = get<double>(doc_, "targets", "anchor_neg");
  t.cond_pos = get<double>(doc_, "targets", "cond_pos");
  t.cond_neg = get<double>(doc_, "targets", "cond_neg");
  if (t.anchor_neg > t.anchor_pos || t.cond_neg > t.cond_pos) {
    throw ConfigError("config: negative thresholds must not exceed positive thresholds");
  }
  return t;
}

InferConfig RunConfig::inference() const {
  InferConfig c;
  c.theta = get<double>(doc_, "inference", "theta");
  const auto& f = doc_.at("inference").at("final_nms");
  if (!f.is_null()) c.final_nms = f.get<double>();
  c.min_score = get<double>(doc_, "inference", "min_score");
  c.max_window = get<int>(doc_, "inference", "max_window");
  c.windows = get<std::vector<int>>(doc_, "inference", "windows");
  c.overlap = get<double>(doc_, "inference", "overlap");
  c.policy = selection();
  if (c.overlap < 0.0 || c.overlap >= 1.0) throw ConfigError("config: inference.overlap must lie in [0, 1)");
  if (c.windows.empty()) throw ConfigError("config: inference.windows must not be empty");
  return c;
}

EvalSettings RunConfig::eval() const {
  EvalSettings e;
  e.thresholds = get<std::vector<double>>(doc_, "eval", "thresholds");
  e.micro_map = get<bool>(doc_, "eval", "micro_map");
  e.episodes = get<int>(doc_, "eval", "episodes");
  e.supports = get<int>(doc_, "eval", "supports");
  e.phase = parse_phase(get<std::string>(doc_, "eval", "phase"));
  e.noisy_count = get<int>(doc_, "eval", "noisy_count");
  e.noisy_same_class = get<bool>(doc_, "eval", "noisy_same_class");
  e.image_support = get<bool>(doc_, "eval", "image_support");
  if (e.thresholds.empty()) throw ConfigError("config: eval.thresholds must not be empty");
  if (e.episodes < 1 || e.supports < 1) throw ConfigError("config: eval.episodes and eval.supports must be >= 1");
  if (e.noisy_count < 0 || e.noisy_count > e.supports) {
    throw ConfigError("config: eval.noisy_count must lie in [0, eval.supports]");
  }
  return e;
}

DataSettings RunConfig::data() const {
  DataSettings d;
  d.manifest = get<std::string>(doc_, "data", "manifest");
  d.features = get<std::string>(doc_, "data", "features");
  d.annotations = get<std::string>(doc_, "data", "annotations");
  const std::string fmt = get<std::string>(doc_, "data", "format");
  if (fmt == "activitynet") {
    d.format = AnnotationFormat::ActivityNet;
  } else if (fmt == "thumos") {
    d.format = AnnotationFormat::Thumos;
  } else {
    throw ConfigError("config: data.format must be 'activitynet' or 'thumos'");
  }
  const std::string ds = get<std::string>(doc_, "data", "dataset");
  if (ds == "activitynet") {
    d.dataset = Dataset::ActivityNet;
  } else if (ds == "thumos") {
    d.dataset = Dataset::Thumos;
  } else {
    throw ConfigError("config: data.dataset must be 'activitynet' or 'thumos'");
  }
  const std::string mode = get<std::string>(doc_, "data", "split_mode");
  if (mode == "fixed") {
    d.split_mode = SplitMode::Fixed;
  } else if (mode == "random") {
    d.split_mode = SplitMode::Random;
  } else {
    throw ConfigError("config: data.split_mode must be 'fixed' or 'random'");
  }
  d.variant = get<std::string>(doc_, "data", "variant");
  if (d.variant != "common" && d.variant != "multi") {
    throw ConfigError("config: data.variant must be 'common' or 'multi'");
  }
  d.max_frames = get<int>(doc_, "data", "max_frames");
  return d;
}

SyntheticConfig RunConfig::synthetic_episode(std::uint64_t episode_seed, int supports) const {
  SyntheticConfig s;
  s.supports = supports;
  s.channels = get<int>(doc_, "model", "channels");
  s.stride = get<int>(doc_, "model", "stride");
  s.num_frames = get<int>(doc_, "synthetic", "num_frames");
  s.num_gt = get<int>(doc_, "synthetic", "num_gt");
  s.noise_std = get<double>(doc_, "synthetic", "noise_std");
  s.gt_min_frames = get<double>(doc_, "synthetic", "gt_min_frames");
  s.gt_max_frames = get<double>(doc_, "synthetic", "gt_max_frames");
  s.support_min_steps = get<int>(doc_, "synthetic", "support_min_steps");
  s.support_max_steps = get<int>(doc_, "synthetic", "support_max_steps");
  s.activity_share = get<double>(doc_, "synthetic", "activity_share");
  s.distractors = get<int>(doc_, "synthetic", "distractors");
  s.seed = episode_seed;
  return s;
}

void RunConfig::validate() const {
  fscal::validate(model());
  fscal::validate(train());
  (void)selection();
  (void)targets();
  (void)inference();
  (void)eval();
  (void)data();
  if (synthetic() && model().backbone.kind != BackboneKind::Passthrough) {
    throw ConfigError("config: synthetic episodes provide step features; use model.backbone=passthrough");
  }
}

RunConfig config_from_echo(const std::string& echo) {
  json doc;
  try {
    doc = json::parse(echo);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config echo: ") + e.what());
  }
  RunConfig c;
  c.merge(doc);
  return c;
}

}  // namespace fscal
