#include "fscal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "fscal/error.hpp"
#include "fscal/io.hpp"
#include "fscal/plot.hpp"

namespace fscal {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::vector<double> default_thresholds() { return {0.5, 0.6, 0.7, 0.8, 0.9}; }

namespace {

bool ranks_before(const ScoredSegment& a, const ScoredSegment& b) {
  return std::tie(b.score, a.segment.start, a.segment.end) <
         std::tie(a.score, b.segment.start, b.segment.end);
}

/// Marks the best still-unmatched GT above theta; returns whether one was found.
bool match(const TemporalSegment& pred, const std::vector<TemporalSegment>& gts,
           std::vector<bool>& used, double theta) {
  int best = -1;
  double best_iou = theta;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (used[g]) continue;
    const double o = tiou(pred, gts[g]);
    if (o > best_iou) {
      best_iou = o;
      best = static_cast<int>(g);
    }
  }
  if (best < 0) return false;
  used[static_cast<std::size_t>(best)] = true;
  return true;
}

}  // namespace

double average_precision(const std::vector<bool>& ranked_hits, std::size_t num_gts) {
  require(num_gts > 0, "average_precision: no ground truth");
  const std::size_t n = ranked_hits.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ranked_hits[k]) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(num_gts);
  }
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

std::optional<double> episode_ap(std::vector<ScoredSegment> predictions,
                                 const std::vector<TemporalSegment>& gts, double theta) {
  if (gts.empty()) return std::nullopt;
  std::stable_sort(predictions.begin(), predictions.end(), ranks_before);
  std::vector<bool> used(gts.size(), false);
  std::vector<bool> hits;
  hits.reserve(predictions.size());
  for (const auto& p : predictions) hits.push_back(match(p.segment, gts, used, theta));
  return average_precision(hits, gts.size());
}

double EvalResult::map_at(double theta) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - theta) < 1e-9) return map[i];
  }
  throw ContractViolation("EvalResult: threshold " + std::to_string(theta) + " was not evaluated");
}

EvalResult evaluate(const std::vector<EpisodeResult>& episodes, const std::vector<double>& thresholds,
                    bool micro) {
  require(!thresholds.empty(), "evaluate: no thresholds");
  EvalResult r;
  r.thresholds = thresholds;
  r.micro = micro;
  std::vector<const EpisodeResult*> kept;
  for (const auto& e : episodes) {
    if (e.gts.empty()) {
      r.warnings.push_back("episode " + e.id + " has no ground truth; excluded");
      continue;
    }
    for (const auto& p : e.predictions) {
      if (!std::isfinite(p.score)) throw ContractViolation("evaluate: non-finite score in episode " + e.id);
    }
    kept.push_back(&e);
  }
  require(!kept.empty(), "evaluate: no episode with ground truth");

  for (const auto* e : kept) {
    r.episode_ids.push_back(e->id);
    std::vector<double> row;
    for (double t : thresholds) row.push_back(*episode_ap(e->predictions, e->gts, t));
    r.episode_ap.push_back(std::move(row));
  }

  for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
    if (!micro) {
      double s = 0.0;
      for (const auto& row : r.episode_ap) s += row[ti];
      r.map.push_back(s / static_cast<double>(r.episode_ap.size()));
      continue;
    }
    struct Item {
      ScoredSegment p;
      std::size_t episode;
    };
    std::vector<Item> pool;
    std::size_t total_gts = 0;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      total_gts += kept[k]->gts.size();
      for (const auto& p : kept[k]->predictions) pool.push_back({p, k});
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Item& a, const Item& b) {
      if (ranks_before(a.p, b.p)) return true;
      if (ranks_before(b.p, a.p)) return false;
      return a.episode < b.episode;
    });
    std::vector<std::vector<bool>> used;
    for (const auto* e : kept) used.emplace_back(e->gts.size(), false);
    std::vector<bool> hits;
    for (const auto& it : pool) {
      hits.push_back(match(it.p.segment, kept[it.episode]->gts, used[it.episode], thresholds[ti]));
    }
    r.map.push_back(average_precision(hits, total_gts));
  }
  r.mean_map = std::accumulate(r.map.begin(), r.map.end(), 0.0) / static_cast<double>(r.map.size());
  return r;
}

ordered_json to_json(const EvalResult& r) {
  ordered_json j;
  j["schema_version"] = kResultSchemaVersion;
  j["aggregation"] = r.micro ? "micro" : "macro";
  ordered_json maps = ordered_json::array();
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
    maps.push_back({{"threshold", r.thresholds[i]}, {"map", r.map[i]}});
  }
  j["map"] = std::move(maps);
  j["mean_map"] = r.mean_map;
  ordered_json eps = ordered_json::array();
  for (std::size_t i = 0; i < r.episode_ids.size(); ++i) {
    eps.push_back({{"id", r.episode_ids[i]}, {"ap", r.episode_ap[i]}});
  }
  j["episodes"] = std::move(eps);
  j["warnings"] = r.warnings;
  return j;
}

EvalResult eval_result_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kResultSchemaVersion) {
      throw ParseError("result document: unsupported schema_version");
    }
    EvalResult r;
    r.micro = j.at("aggregation").get<std::string>() == "micro";
    for (const auto& m : j.at("map")) {
      r.thresholds.push_back(m.at("threshold").get<double>());
      r.map.push_back(m.at("map").get<double>());
    }
    r.mean_map = j.at("mean_map").get<double>();
    for (const auto& e : j.at("episodes")) {
      r.episode_ids.push_back(e.at("id").get<std::string>());
      r.episode_ap.push_back(e.at("ap").get<std::vector<double>>());
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("result document: ") + e.what());
  }
}

namespace {

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory " + dir.string());
  }
}

}  // namespace

void report(const EvalResult& result, const ordered_json& meta, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  ordered_json doc = to_json(result);
  doc["meta"] = meta;
  write_file(out_dir / "result.json", doc.dump(2) + "\n");

  Series s;
  s.x = result.thresholds;
  s.y = result.map;
  const double lo = *std::min_element(s.x.begin(), s.x.end());
  const double hi = *std::max_element(s.x.begin(), s.x.end());
  write_png(line_chart({s}, lo, hi > lo ? hi : lo + 1.0, 0.0, 1.0), out_dir / "map_vs_threshold.png");

  std::vector<double> first;
  for (const auto& row : result.episode_ap) first.push_back(row.front());
  write_png(histogram(first, 10, 0.0, 1.0), out_dir / "ap_histogram.png");
}

void report_sweep(const std::vector<SweepPoint>& points, const ordered_json& meta,
                  const std::filesystem::path& out_dir) {
  require(!points.empty(), "report_sweep: no points");
  ensure_dir(out_dir);
  ordered_json doc;
  doc["schema_version"] = kResultSchemaVersion;
  doc["meta"] = meta;
  ordered_json arr = ordered_json::array();
  for (const auto& p : points) arr.push_back({{"supports", p.supports}, {"result", to_json(p.result)}});
  doc["points"] = std::move(arr);
  write_file(out_dir / "sweep.json", doc.dump(2) + "\n");

  const std::uint32_t colors[] = {0x1f77b4, 0xff7f0e, 0x2ca02c, 0xd62728, 0x9467bd};
  std::vector<Series> series;
  for (std::size_t ti = 0; ti < points.front().result.thresholds.size(); ++ti) {
    Series s;
    s.color = colors[ti % 5];
    for (const auto& p : points) {
      s.x.push_back(p.supports);
      s.y.push_back(p.result.map[ti]);
    }
    series.push_back(std::move(s));
  }
  const double lo = points.front().supports;
  const double hi = points.back().supports;
  write_png(line_chart(series, lo, hi > lo ? hi : lo + 1.0, 0.0, 1.0), out_dir / "map_vs_supports.png");
}

}  // namespace fscal
