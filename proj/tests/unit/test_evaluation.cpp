#include <fstream>

#include "doctest.h"
#include "fscal/error.hpp"
#include "fscal/evaluation.hpp"
#include "fscal/io.hpp"
#include "fscal/oracles.hpp"
#include "helpers.hpp"

using namespace fscal;

namespace {

EpisodeResult episode(std::string id, std::vector<ScoredSegment> preds, std::vector<TemporalSegment> gts) {
  return {std::move(id), std::move(preds), std::move(gts)};
}

EvalResult sample_result() {
  std::vector<EpisodeResult> eps;
  eps.push_back(episode("a", {{{0, 100}, 0.9}, {{300, 400}, 0.4}}, {{0, 100}}));
  eps.push_back(episode("b", {{{10, 90}, 0.8}}, {{0, 100}, {500, 700}}));
  return evaluate(eps);
}

}  // namespace

TEST_CASE("episode AP on small rankings") {
  const std::vector<TemporalSegment> gts{{0, 100}};
  CHECK(*episode_ap({{{0, 100}, 0.9}}, gts, 0.5) == 1.0);
  CHECK(*episode_ap({{{500, 600}, 0.9}}, gts, 0.5) == 0.0);
  CHECK(*episode_ap({}, gts, 0.5) == 0.0);
  CHECK(*episode_ap({{{500, 600}, 0.9}, {{0, 100}, 0.5}}, gts, 0.5) == doctest::Approx(0.5));
  CHECK_FALSE(episode_ap({{{0, 100}, 0.9}}, {}, 0.5).has_value());
  // tIoU exactly at the threshold is not a hit.
  CHECK(*episode_ap({{{0, 50}, 0.9}}, gts, 0.5) == 0.0);
}

TEST_CASE("hand-computed fixture with a duplicate detection") {
  const std::vector<TemporalSegment> gts{{0, 100}, {200, 300}};
  const std::vector<ScoredSegment> preds{
      {{0, 100}, 0.9}, {{10, 100}, 0.8}, {{200, 290}, 0.7}, {{500, 600}, 0.6}};
  // Hits T F T F: envelope precisions 1, 2/3 at recalls 1/2, 1.
  CHECK(*episode_ap(preds, gts, 0.5) == doctest::Approx(0.5 + 0.5 * 2.0 / 3.0).epsilon(1e-12));
  CHECK(*episode_ap(preds, gts, 0.95) == doctest::Approx(0.5).epsilon(1e-12));

  // Ten copies of a perfect hit still recall one GT once.
  std::vector<ScoredSegment> copies(10, ScoredSegment{{0, 100}, 0.9});
  CHECK(*episode_ap(copies, gts, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("episode AP agrees with the reference implementation") {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<TemporalSegment> gts;
    const int ng = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < ng; ++i) gts.push_back(test::random_segment(rng, 300, 10));
    auto preds = test::random_candidates(rng, static_cast<int>(rng.below(20)), 300);
    for (int i = 0; i < ng; ++i) {
      if (rng.uniform() < 0.5) preds.push_back({gts[static_cast<std::size_t>(i)], rng.uniform()});
    }
    for (double theta : {0.3, 0.5, 0.7, 0.9}) {
      CHECK(std::abs(*episode_ap(preds, gts, theta) - oracle::episode_ap(preds, gts, theta)) < 1e-12);
    }
  }
}

TEST_CASE("AP ignores input order") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TemporalSegment> gts{test::random_segment(rng, 300, 10), test::random_segment(rng, 300, 10)};
    auto preds = test::random_candidates(rng, 15, 300);
    preds.push_back({gts[0], 0.5});
    const double base = *episode_ap(preds, gts, 0.5);
    rng.shuffle(preds);
    CHECK(*episode_ap(preds, gts, 0.5) == base);
  }
}

TEST_CASE("perfect detectors score one and AP falls with the threshold") {
  std::vector<EpisodeResult> eps;
  for (int i = 0; i < 4; ++i) {
    const TemporalSegment g{100.0 * i, 100.0 * i + 80};
    eps.push_back(episode("e" + std::to_string(i), {{g, 0.9}}, {g}));
  }
  const auto perfect = evaluate(eps);
  for (double m : perfect.map) CHECK(m == 1.0);
  CHECK(perfect.mean_map == 1.0);

  Rng rng(4);
  std::vector<EpisodeResult> noisy;
  for (int i = 0; i < 20; ++i) {
    const TemporalSegment g = test::random_segment(rng, 500, 50);
    auto preds = test::random_candidates(rng, 10, 500);
    preds.push_back({{g.start + 5, g.end}, 0.7});
    noisy.push_back(episode(std::to_string(i), preds, {g}));
  }
  const auto r = evaluate(noisy);
  for (std::size_t i = 1; i < r.map.size(); ++i) CHECK(r.map[i] <= r.map[i - 1]);
  CHECK(r.map_at(0.7) == r.map[2]);
  CHECK_THROWS_AS(r.map_at(0.55), ContractViolation);
}

TEST_CASE("episodes without ground truth are skipped with a warning") {
  std::vector<EpisodeResult> eps;
  eps.push_back(episode("full", {{{0, 10}, 0.9}}, {{0, 10}}));
  eps.push_back(episode("empty", {{{0, 10}, 0.9}}, {}));
  const auto r = evaluate(eps);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("empty") != std::string::npos);
  CHECK(r.episode_ids == std::vector<std::string>{"full"});
  CHECK(r.map[0] == 1.0);
  CHECK_THROWS_AS(evaluate({eps[1]}), ContractViolation);
}

TEST_CASE("macro and micro aggregation") {
  std::vector<EpisodeResult> eps;
  eps.push_back(episode("a", {{{0, 100}, 0.9}}, {{0, 100}}));
  eps.push_back(episode("b", {{{500, 600}, 0.95}, {{0, 100}, 0.5}}, {{0, 100}}));
  const auto macro = evaluate(eps, {0.5});
  CHECK(macro.map[0] == doctest::Approx(0.75));
  // Pooled ranking: miss, hit, hit over two GTs.
  const auto micro = evaluate(eps, {0.5}, true);
  CHECK(micro.micro);
  CHECK(micro.map[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("result documents round-trip and are byte-stable") {
  const EvalResult r = sample_result();
  const nlohmann::ordered_json meta{{"checkpoint", "model.ckpt"}, {"seed", 3}};
  const auto d1 = test::scratch_dir("report_a");
  const auto d2 = test::scratch_dir("report_b");
  report(r, meta, d1);
  report(r, meta, d2);
  for (const char* f : {"result.json", "map_vs_threshold.png", "ap_histogram.png"}) {
    REQUIRE(std::filesystem::exists(d1 / f));
    CHECK(read_file(d1 / f) == read_file(d2 / f));
  }
  const auto doc = nlohmann::json::parse(read_file(d1 / "result.json"));
  CHECK(doc.at("meta").at("seed") == 3);
  CHECK(eval_result_from_json(doc) == r);
  const std::string png = read_file(d1 / "map_vs_threshold.png");
  CHECK(png.substr(1, 3) == "PNG");

  nlohmann::json broken = doc;
  broken["schema_version"] = 99;
  CHECK_THROWS_AS(eval_result_from_json(broken), ParseError);
}

TEST_CASE("support sweep document has one point per count") {
  std::vector<SweepPoint> pts;
  for (int s = 1; s <= 6; ++s) pts.push_back({s, sample_result()});
  const auto dir = test::scratch_dir("sweep");
  report_sweep(pts, {{"episodes", 2}}, dir);
  const auto doc = nlohmann::json::parse(read_file(dir / "sweep.json"));
  REQUIRE(doc.at("points").size() == 6);
  for (int s = 0; s < 6; ++s) CHECK(doc["points"][s]["supports"] == s + 1);
  CHECK(std::filesystem::exists(dir / "map_vs_supports.png"));
}

TEST_CASE("unwritable output directories are reported") {
  const auto dir = test::scratch_dir("blocked");
  std::ofstream(dir / "file") << "x";
  CHECK_THROWS_AS(report(sample_result(), {}, dir / "file" / "sub"), std::runtime_error);
}
