#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "fscal/data.hpp"
#include "fscal/error.hpp"
#include "helpers.hpp"

using namespace fscal;

namespace {

const char* kTwoVideos = R"({
  "database": {
    "v_b": {"duration": 20.0, "fps": 30, "annotations": [
      {"label": "Surfing", "segment": [2.0, 5.0]},
      {"label": "Kneeling", "segment": [1.0, 1.5]}]},
    "v_a": {"num_frames": 300, "fps": 25, "annotations": [
      {"label": "Surfing", "segment": [0.5, 4.0]}]}
  }
})";

AnnotatedVideo video(const std::string& id, int frames,
                     std::vector<std::pair<std::string, TemporalSegment>> inst) {
  AnnotatedVideo v;
  v.video_id = id;
  v.source_id = id;
  v.num_frames = frames;
  v.fps = 30.0;
  for (auto& [label, seg] : inst) v.instances.push_back({label, seg});
  return v;
}

ClassSplit abc_split() {
  ClassSplit s;
  s.train = {"a", "b"};
  s.val = {"c"};
  s.test = {"d"};
  return s;
}

}  // namespace

TEST_CASE("activitynet ingestion converts seconds to frames") {
  const auto r = parse_activitynet(kTwoVideos);
  REQUIRE(r.videos.size() == 2);
  CHECK(r.warnings.empty());
  CHECK(r.videos[0].video_id == "v_a");
  CHECK(r.videos[0].num_frames == 300);
  CHECK(r.videos[0].instances[0].segment == TemporalSegment{12.5, 100.0});
  const auto& b = r.videos[1];
  CHECK(b.num_frames == 600);
  REQUIRE(b.instances.size() == 2);
  CHECK(b.instances[0].label == "Kneeling");  // sorted by start
  CHECK(b.instances[1].segment == TemporalSegment{60.0, 150.0});
  CHECK(class_labels(r.videos) == std::set<std::string>{"Kneeling", "Surfing"});
}

TEST_CASE("activitynet ingestion drops out-of-range instances with a warning") {
  const auto r = parse_activitynet(R"({"v": {"num_frames": 100, "fps": 10, "annotations": [
      {"label": "x", "segment": [1.0, 2.0]}, {"label": "y", "segment": [5.0, 12.0]}]}})");
  REQUIRE(r.videos.size() == 1);
  CHECK(r.videos[0].instances.size() == 1);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("'y'") != std::string::npos);
}

TEST_CASE("activitynet ingestion reports malformed records with context") {
  CHECK_THROWS_AS(parse_activitynet("{not json"), ParseError);
  try {
    parse_activitynet(R"({"good": {"num_frames": 10, "fps": 1, "annotations": []},
                          "bad": {"num_frames": 10, "fps": 1, "annotations": [{"label": "x"}]}})");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad") != std::string::npos);
    CHECK(msg.find("annotations[0]") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_activitynet(R"({"v": {"fps": 1, "annotations": []}})"), ParseError);
}

TEST_CASE("thumos ingestion groups lines by video") {
  const auto r = parse_thumos(
      "# video label start end frames fps\n"
      "vid1,HighJump,1.0,2.0,300,30\n"
      "vid1 LongJump 4.0 5.5 300 30\n"
      "\n"
      "vid2,Diving,0.0,3.0,90,30\n");
  REQUIRE(r.videos.size() == 2);
  CHECK(r.videos[0].instances.size() == 2);
  CHECK(r.videos[0].instances[1].segment == TemporalSegment{120.0, 165.0});
  CHECK(r.videos[1].num_frames == 90);
}

TEST_CASE("thumos ingestion reports the offending line") {
  try {
    parse_thumos("v,A,0,1,100,30\nv,A,zero,1,100,30\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_thumos("v,A,0,1\n"), ParseError);
}

TEST_CASE("ingest_annotations reads files") {
  const auto dir = test::scratch_dir("ingest");
  std::ofstream(dir / "a.json") << kTwoVideos;
  CHECK(ingest_annotations(dir / "a.json", AnnotationFormat::ActivityNet).videos.size() == 2);
  CHECK_THROWS_AS(ingest_annotations(dir / "missing.json", AnnotationFormat::ActivityNet), ParseError);
}

TEST_CASE("fixed thumos split") {
  std::set<std::string> classes;
  const auto& lists = fixed_split_lists(Dataset::Thumos);
  for (const auto* l : {&lists.train, &lists.val, &lists.test}) classes.insert(l->begin(), l->end());
  const auto s = split_classes(classes, SplitMode::Fixed, 0, Dataset::Thumos);
  CHECK(s.train.size() == 16);
  CHECK(s.val == std::vector<std::string>{"SoccerPenalty", "TennisSwing"});
  CHECK(s.test == std::vector<std::string>{"ThrowDiscus", "VolleyballSpiking"});
  CHECK(std::binary_search(s.train.begin(), s.train.end(), "BaseballPitch"));
}

TEST_CASE("fixed activitynet split sizes and disjointness") {
  std::set<std::string> classes;
  const auto& lists = fixed_split_lists(Dataset::ActivityNet);
  for (const auto* l : {&lists.train, &lists.val, &lists.test}) classes.insert(l->begin(), l->end());
  REQUIRE(classes.size() == 200);
  const auto s = split_classes(classes, SplitMode::Fixed, 0, Dataset::ActivityNet);
  CHECK(s.train.size() == 160);
  CHECK(s.val.size() == 20);
  CHECK(s.test.size() == 20);
  for (const auto& c : s.val) CHECK_FALSE(std::binary_search(s.train.begin(), s.train.end(), c));
  for (const auto& c : s.test) {
    CHECK_FALSE(std::binary_search(s.train.begin(), s.train.end(), c));
    CHECK_FALSE(std::binary_search(s.val.begin(), s.val.end(), c));
  }
  CHECK(s.phase_of("Volleyball") == Phase::Val);
  CHECK(s.phase_of("Pole vault") == Phase::Test);
  CHECK(s.phase_of("Surfing") == Phase::Train);
  CHECK_FALSE(s.phase_of("Juggling").has_value());
}

TEST_CASE("fixed split names the missing classes") {
  std::set<std::string> classes{"BaseballPitch", "SoccerPenalty", "ThrowDiscus"};
  try {
    split_classes(classes, SplitMode::Fixed, 0, Dataset::Thumos);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("missing") != std::string::npos);
    CHECK(msg.find("TennisSwing") != std::string::npos);
  }
}

TEST_CASE("random split is 80/10/10 and seeded") {
  std::set<std::string> classes;
  for (int i = 0; i < 10; ++i) classes.insert("c" + std::to_string(i));
  const auto a = split_classes(classes, SplitMode::Random, 42);
  const auto b = split_classes(classes, SplitMode::Random, 42);
  CHECK(a.train.size() == 8);
  CHECK(a.val.size() == 1);
  CHECK(a.test.size() == 1);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  std::set<std::string> all(a.train.begin(), a.train.end());
  all.insert(a.val.begin(), a.val.end());
  all.insert(a.test.begin(), a.test.end());
  CHECK(all == classes);
  CHECK_THROWS_AS(split_classes({"x", "y"}, SplitMode::Random, 0), ContractViolation);
}

TEST_CASE("common-instance reorganization splits multi-action videos") {
  const auto v = video("m", 700, {{"a", {100, 150}}, {"b", {300, 400}}, {"c", {500, 600}}});
  ReorganizeStats st;
  const auto out = reorganize_common_instance({v}, abc_split(), 768, &st);
  CHECK(st.derived == 3);
  const auto& train = out[Phase::Train];
  REQUIRE(train.size() == 2);
  REQUIRE(out[Phase::Val].size() == 1);
  for (const auto* list : {&train, &out[Phase::Val]}) {
    for (const auto& d : *list) {
      CHECK(d.instances.size() == 1);
      CHECK(d.source_id == "m");
      CHECK(d.instances[0].segment.end <= d.num_frames);
    }
  }
  // Background runs to the midpoint toward each neighbour.
  CHECK(train[0].source_offset == 0.0);
  CHECK(train[0].num_frames == 225);
  CHECK(train[1].source_offset == 225.0);
  CHECK(train[1].num_frames == 225);
  CHECK(train[1].instances[0].segment == TemporalSegment{75, 175});
  CHECK(out[Phase::Val][0].source_offset == 450.0);
  CHECK(out[Phase::Val][0].num_frames == 250);
}

TEST_CASE("common-instance reorganization drops long and overlapping cases") {
  ReorganizeStats st;
  const auto long_one = video("l", 800, {{"a", {10, 700}}});
  const auto overlap = video("o", 500, {{"a", {10, 200}}, {"b", {150, 300}}, {"a", {400, 450}}});
  const auto out = reorganize_common_instance({long_one, overlap}, abc_split(), 768, &st);
  CHECK(st.discarded_long == 1);
  CHECK(st.discarded_overlap == 2);
  REQUIRE(out[Phase::Train].size() == 1);
  CHECK(out[Phase::Train][0].video_id == "o#2");

  const auto pass = video("p", 300, {{"b", {20, 90}}});
  const auto kept = reorganize_common_instance({pass}, abc_split());
  REQUIRE(kept[Phase::Train].size() == 1);
  CHECK(kept[Phase::Train][0] == pass);
}

TEST_CASE("multi-instance reorganization keeps whole videos by majority class") {
  const auto many = video("t", 5000, {});
  auto busy = many;
  for (int i = 0; i < 14; ++i) busy.instances.push_back({"a", {i * 300.0, i * 300.0 + 100.0}});
  const auto mixed = video("x", 900, {{"c", {0, 10}}, {"c", {20, 30}}, {"a", {40, 50}}});
  const auto tie = video("y", 900, {{"c", {0, 10}}, {"b", {20, 30}}});
  const auto out = reorganize_multi_instance({busy, mixed, tie}, abc_split());
  REQUIRE(out[Phase::Train].size() == 2);
  CHECK(out[Phase::Train][0] == busy);
  CHECK(out[Phase::Train][1].video_id == "y");
  REQUIRE(out[Phase::Val].size() == 1);
  CHECK(out[Phase::Val][0].video_id == "x");
}

TEST_CASE("split manifest round-trips") {
  const auto v = video("m", 700, {{"a", {100, 150}}, {"b", {300, 400}}, {"c", {500, 600}}});
  const auto split = abc_split();
  const auto data = reorganize_common_instance({v}, split);
  const auto doc = split_manifest(split, data, {{"dataset", "toy"}});
  const auto back = load_manifest(doc.dump());
  CHECK(back.split.train == split.train);
  CHECK(back.split.test == split.test);
  for (int p = 0; p < 3; ++p) CHECK(back.data.videos[p] == data.videos[p]);
  CHECK(split_manifest(back.split, back.data, {{"dataset", "toy"}}).dump() == doc.dump());
  CHECK_THROWS_AS(load_manifest("[1,2]"), ParseError);
}

namespace {

PhaseData sampler_world(ClassSplit& split) {
  split.train = {"a", "b", "c"};
  split.val = {"v", "w", "x"};
  split.test = {"t"};
  PhaseData data;
  for (const auto& label : split.train) {
    for (int i = 0; i < 8; ++i) {
      data[Phase::Train].push_back(video(label + std::to_string(i), 300, {{label, {50, 150}}}));
    }
  }
  for (const auto& label : split.val) {
    for (int i = 0; i < 7; ++i) {
      data[Phase::Val].push_back(video(label + std::to_string(i), 300, {{label, {40, 200}}}));
    }
  }
  data[Phase::Test].push_back(video("t0", 300, {{"t", {0, 10}}}));
  return data;
}

}  // namespace

TEST_CASE("fixed episodes are a pure function of the index") {
  ClassSplit split;
  const auto data = sampler_world(split);
  EpisodeSampler s1(data, split, 5), s2(data, split, 5);
  EpisodeOptions opts;
  const Episode e = s1.fixed(Phase::Val, 7, opts);
  CHECK(e == s1.fixed(Phase::Val, 7, opts));
  CHECK(e == s2.fixed(Phase::Val, 7, opts));
  CHECK(to_json(e).dump() == to_json(s2.fixed(Phase::Val, 7, opts)).dump());
  CHECK(e.supports.size() == 5);
  for (const auto& sc : e.supports) {
    CHECK(sc.label == e.common_class);
    CHECK(sc.video_id != e.query_id);
  }
  CHECK(std::binary_search(split.val.begin(), split.val.end(), e.common_class));
  CHECK(e.gt_segments == std::vector<TemporalSegment>{{40, 200}});
}

TEST_CASE("train episodes advance the seeded stream") {
  ClassSplit split;
  const auto data = sampler_world(split);
  EpisodeSampler a(data, split, 9), b(data, split, 9);
  EpisodeOptions opts;
  std::vector<Episode> ea, eb;
  for (int i = 0; i < 10; ++i) {
    ea.push_back(a.next_train(opts));
    eb.push_back(b.next_train(opts));
  }
  CHECK(ea == eb);
  bool varied = false;
  for (int i = 1; i < 10; ++i) varied |= !(ea[i] == ea[0]);
  CHECK(varied);
  for (const auto& e : ea) {
    CHECK(std::binary_search(split.train.begin(), split.train.end(), e.common_class));
  }
}

TEST_CASE("noisy supports replace clean ones") {
  ClassSplit split;
  const auto data = sampler_world(split);
  EpisodeSampler s(data, split, 1);
  EpisodeOptions one{5, 1, false, false};
  for (int i = 0; i < 20; ++i) {
    const Episode e = s.fixed(Phase::Val, i, one);
    REQUIRE(e.supports.size() == 5);
    int noisy = 0;
    for (const auto& sc : e.supports) {
      if (sc.noisy) {
        ++noisy;
        CHECK(sc.label != e.common_class);
      } else {
        CHECK(sc.label == e.common_class);
      }
    }
    CHECK(noisy == 1);
  }
  EpisodeOptions same{5, 2, true, false};
  for (int i = 0; i < 20; ++i) {
    const Episode e = s.fixed(Phase::Val, i, same);
    std::set<std::string> wrong;
    for (const auto& sc : e.supports) {
      if (sc.noisy) wrong.insert(sc.label);
    }
    CHECK(wrong.size() == 1);
    CHECK(std::count_if(e.supports.begin(), e.supports.end(), [](const SupportClip& c) { return c.noisy; }) == 2);
  }
  EpisodeOptions distinct{5, 2, false, true};
  const Episode d = s.fixed(Phase::Val, 3, distinct);
  std::set<std::string> wrong;
  for (const auto& sc : d.supports) {
    CHECK(sc.image);
    if (sc.noisy) wrong.insert(sc.label);
  }
  CHECK(wrong.size() == 2);
}

TEST_CASE("sampling fails when no class has enough supports") {
  ClassSplit split;
  const auto data = sampler_world(split);
  EpisodeSampler s(data, split, 1);
  CHECK_THROWS_AS(s.fixed(Phase::Test, 0, EpisodeOptions{}), ConfigError);
  CHECK_THROWS_AS(s.fixed(Phase::Val, 0, EpisodeOptions{20, 0, false, false}), ConfigError);
}

TEST_CASE("synthetic episodes: zero noise and determinism") {
  SyntheticConfig cfg;
  cfg.noise_std = 0.0;
  cfg.channels = 16;
  const auto e = synthesize_episode(cfg);
  REQUIRE(e.gt_segments.size() == 1);
  CHECK(e.query.rows() == 96);
  Eigen::RowVectorXd support_mean = Eigen::RowVectorXd::Zero(16);
  int rows = 0;
  for (const auto& s : e.supports) {
    support_mean += s.colwise().sum();
    rows += static_cast<int>(s.rows());
  }
  support_mean /= rows;
  for (int t = 0; t < e.query.rows(); ++t) {
    if (step_inside(t, cfg.stride, e.gt_segments[0])) {
      CHECK(test::max_abs_diff(e.query.row(t), support_mean) < 1e-12);
    } else {
      CHECK(e.query.row(t).norm() == 0.0);
    }
  }
  CHECK(std::abs(e.embedding.norm() - 1.0) < 1e-12);

  SyntheticConfig noisy;
  noisy.seed = 77;
  const auto a = synthesize_episode(noisy);
  const auto b = synthesize_episode(noisy);
  CHECK(a.query == b.query);
  REQUIRE(a.supports.size() == b.supports.size());
  for (std::size_t i = 0; i < a.supports.size(); ++i) CHECK(a.supports[i] == b.supports[i]);
  CHECK(a.gt_segments == b.gt_segments);
}

TEST_CASE("synthetic episodes: inside-GT features resemble the supports") {
  for (double noise : {0.25, 0.5}) {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      SyntheticConfig cfg;
      cfg.seed = seed;
      cfg.noise_std = noise;
      const auto e = synthesize_episode(cfg);
      Eigen::RowVectorXd in = Eigen::RowVectorXd::Zero(cfg.channels);
      Eigen::RowVectorXd out = in, sup = in;
      int n_in = 0, n_out = 0;
      for (int t = 0; t < e.query.rows(); ++t) {
        if (step_inside(t, cfg.stride, e.gt_segments[0])) {
          in += e.query.row(t);
          ++n_in;
        } else {
          out += e.query.row(t);
          ++n_out;
        }
      }
      for (const auto& s : e.supports) sup += s.colwise().mean();
      auto cosine = [](const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) {
        return x.dot(y) / (x.norm() * y.norm());
      };
      wins += cosine(in / n_in, sup) > cosine(out / n_out, sup);
    }
    CHECK(wins == 100);
  }
}

TEST_CASE("synthetic noisy supports come from other classes") {
  SyntheticConfig cfg;
  cfg.noise_std = 0.0;
  cfg.noisy_count = 2;
  cfg.noisy_same_class = true;
  const auto e = synthesize_episode(cfg);
  REQUIRE(e.noisy.size() == 5);
  CHECK(std::count(e.noisy.begin(), e.noisy.end(), true) == 2);
  std::vector<Eigen::RowVectorXd> wrong;
  for (std::size_t i = 0; i < 5; ++i) {
    const Eigen::RowVectorXd m = e.supports[i].colwise().mean();
    if (e.noisy[i]) {
      wrong.push_back(m);
      CHECK((m.transpose() - e.embedding).norm() > 1e-3);
    } else {
      CHECK((m.transpose() - e.embedding).norm() < 1e-12);
    }
  }
  CHECK((wrong[0] - wrong[1]).norm() < 1e-12);
}

TEST_CASE("synthetic distractors never overlap the GT") {
  SyntheticConfig cfg;
  cfg.distractors = 2;
  cfg.gt_max_frames = 160;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    cfg.seed = seed;
    const auto e = synthesize_episode(cfg);
    REQUIRE(e.distractor_segments.size() == 2);
    for (const auto& d : e.distractor_segments) {
      CHECK(tiou(d, e.gt_segments[0]) == 0.0);
      CHECK(d.end <= e.num_frames);
    }
  }
}
