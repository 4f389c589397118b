#pragma once

// Class-agnostic detection AP per episode, mAP over episodes at several
// tIoU thresholds, and the result document / plot writers.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fscal/temporal.hpp"

namespace fscal {

inline constexpr int kResultSchemaVersion = 1;

std::vector<double> default_thresholds();  // 0.5, 0.6, 0.7, 0.8, 0.9

/// All-points interpolated AP. A prediction is a hit when its tIoU with
/// a still-unmatched GT exceeds `theta`. Predictions are re-sorted by
/// score, so input order does not matter. nullopt when there are no GTs.
std::optional<double> episode_ap(std::vector<ScoredSegment> predictions,
                                 const std::vector<TemporalSegment>& gts, double theta);

/// Precision/recall area under the all-points envelope, given the ranked
/// hit flags and the number of GTs.
double average_precision(const std::vector<bool>& ranked_hits, std::size_t num_gts);

struct EpisodeResult {
  std::string id;
  std::vector<ScoredSegment> predictions;
  std::vector<TemporalSegment> gts;
};

struct EvalResult {
  std::vector<double> thresholds;
  std::vector<double> map;  // per threshold
  double mean_map = 0.0;    // mean over thresholds
  bool micro = false;
  std::vector<std::string> episode_ids;
  std::vector<std::vector<double>> episode_ap;  // [episode][threshold]
  std::vector<std::string> warnings;

  double map_at(double theta) const;
  bool operator==(const EvalResult&) const = default;
};

/// Macro: mean of per-episode APs. Micro: one ranking pooled over all
/// episodes (matching stays within each episode). Episodes without GTs
/// are skipped with a warning; at least one must remain.
EvalResult evaluate(const std::vector<EpisodeResult>& episodes,
                    const std::vector<double>& thresholds = default_thresholds(), bool micro = false);

nlohmann::ordered_json to_json(const EvalResult& r);
EvalResult eval_result_from_json(const nlohmann::json& j);

struct SweepPoint {
  int supports = 0;
  EvalResult result;
};

/// Writes result.json plus map_vs_threshold.png and ap_histogram.png.
/// Throws std::runtime_error when the directory is not writable.
void report(const EvalResult& result, const nlohmann::ordered_json& meta,
            const std::filesystem::path& out_dir);

/// Writes sweep.json and map_vs_supports.png.
void report_sweep(const std::vector<SweepPoint>& points, const nlohmann::ordered_json& meta,
                  const std::filesystem::path& out_dir);

}  // namespace fscal
