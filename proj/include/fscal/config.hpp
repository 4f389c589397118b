#pragma once

// Run configuration: a JSON document with a fixed key set. Every key has
// a default; files and command-line overrides may only set known keys.
// Precedence: defaults < preset < file < overrides.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fscal/data.hpp"
#include "fscal/engine.hpp"

namespace fscal {

inline constexpr int kConfigSchemaVersion = 1;

struct EvalSettings {
  std::vector<double> thresholds;
  bool micro_map = false;
  int episodes = 50;
  int supports = 5;
  Phase phase = Phase::Test;
  int noisy_count = 0;
  bool noisy_same_class = false;
  bool image_support = false;
};

struct DataSettings {
  std::string manifest;
  std::string features;
  std::string annotations;
  AnnotationFormat format = AnnotationFormat::ActivityNet;
  Dataset dataset = Dataset::ActivityNet;
  SplitMode split_mode = SplitMode::Fixed;
  std::string variant = "common";  // common | multi
  int max_frames = 768;
};

class RunConfig {
 public:
  RunConfig();

  static nlohmann::ordered_json defaults();

  /// Named bundles of overrides: "synthetic" (desk-scale synthetic run)
  /// and "full" (full-length optimizer schedule).
  void apply_preset(const std::string& name);
  /// Merges a document; unknown keys raise ConfigError naming the key path.
  void merge(const nlohmann::json& doc);
  void merge_file(const std::filesystem::path& path);
  /// "section.key=value"; the value is parsed as JSON, falling back to a
  /// plain string.
  void set(const std::string& assignment);

  const nlohmann::ordered_json& doc() const { return doc_; }
  std::string echo() const { return doc_.dump(); }

  std::uint64_t seed() const;
  bool synthetic() const;
  ModelConfig model() const;
  TrainConfig train() const;
  SelectionPolicy selection() const;
  TargetConfig targets() const;
  InferConfig inference() const;
  EvalSettings eval() const;
  DataSettings data() const;
  /// Synthetic world settings for the episode drawn with `episode_seed`.
  SyntheticConfig synthetic_episode(std::uint64_t episode_seed, int supports) const;

  /// Checks that every typed view can be built.
  void validate() const;

 private:
  nlohmann::ordered_json doc_;
};

/// Parses a config echo stored in a checkpoint or result document.
RunConfig config_from_echo(const std::string& echo);

}  // namespace fscal
