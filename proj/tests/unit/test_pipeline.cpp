#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "action4d/error.hpp"
#include "action4d/pipeline.hpp"
#include "fixtures.hpp"

using namespace action4d;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<WeightBundle> toy_people() {
  return load_bundle(fixtures::data_dir() / "weights" / "people_toy.w4db");
}

}  // namespace

TEST(Evaluate, Identical) {
  const std::vector<int> a{3, 1, 4, 1, 5};
  const Accuracy r = evaluate(a, a);
  EXPECT_EQ(r.acc, 100.0);
  EXPECT_EQ(r.racc, 100.0);
}

TEST(Evaluate, HandEnumeratedExample) {
  const std::vector<int> truth{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const std::vector<int> pred{0, 0, 0, 0, 0, 0, 0, 1, 1, 1};
  const Accuracy r = evaluate(pred, truth);
  EXPECT_EQ(r.acc, 80.0);
  EXPECT_EQ(r.racc, 100.0);
}

TEST(Evaluate, RelaxedNeverBelowExact) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> a(1 + rng() % 40), b(a.size());
    for (auto& v : a) v = rng() % 4;
    for (auto& v : b) v = rng() % 4;
    const Accuracy r = evaluate(a, b);
    EXPECT_GE(r.racc, r.acc);
  }
}

TEST(Evaluate, LengthMismatch) {
  EXPECT_THROW(evaluate(std::vector<int>{1, 2}, std::vector<int>{1}), ContractViolation);
}

TEST(Config, DeskProfileWithOverrides) {
  const RunConfig c = parse_run_config(R"({"profile": "desk", "calibration": "c.json",
      "input": {"scene": "s.json"}, "tracking": {"gate": 5.5}, "workers": 2})", "/base");
  EXPECT_EQ(c.grid.dims, (std::array<int, 3>{101, 101, 43}));
  EXPECT_EQ(c.detection.nms_radius, 3);
  EXPECT_EQ(c.tracking.gate, 5.5);
  EXPECT_EQ(c.workers, 2);
  EXPECT_EQ(c.calibration, std::filesystem::path("/base/c.json"));
  EXPECT_EQ(c.input.kind, InputSpec::Kind::kScene);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_run_config("[1, 2"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"input": {"scene": "s.json"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"profile": "huge", "calibration": "c", "input": {"scene": "s"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"calibration": "c", "input": {"scene": "s"}, "workers": 0})"), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
  const RunConfig c = parse_run_config(R"({"calibration": "missing.json", "input": {"scene": "s.json"}})", "/nope");
  EXPECT_THROW(c.validate(true), ConfigError);
}

TEST(Records, RoundTrip) {
  FrameRecord r;
  r.frame = 12;
  r.candidates = 3;
  TrackRecord t;
  t.id = 4;
  t.position = Vec3(0.5, -1.25, 0.0);
  t.column = Vec2(55, 37.5);
  t.score = 0.875;
  t.label = 2;
  t.probabilities = std::vector<float>(16, 0.0625f);
  r.tracks = {t};
  const std::string line = format_record(r);
  EXPECT_EQ(format_record(parse_record(line)), line);
  EXPECT_THROW(parse_record("{\"schema\": 99}"), DataError);
  EXPECT_THROW(parse_record("nope"), DataError);
}

TEST(Pipeline, EmptySceneHasNoTracks) {
  const SceneScript script = load_scene(fixtures::data_dir() / "scenes" / "empty.json");
  const auto lines = fixtures::run_scene(RunConfig::desk(), script, fixtures::desk_rig(), script.frames);
  ASSERT_EQ(lines.size(), 10u);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const FrameRecord r = parse_record(lines[k]);
    EXPECT_EQ(r.frame, static_cast<int>(k));
    EXPECT_TRUE(r.tracks.empty());
  }
}

TEST(Pipeline, OnePersonKeepsOneId) {
  const SceneScript script = load_scene(fixtures::data_dir() / "scenes" / "one_person.json");
  const RunConfig config = RunConfig::desk();
  const auto lines = fixtures::run_scene(config, script, fixtures::desk_rig(), script.frames, toy_people());
  ASSERT_EQ(static_cast<int>(lines.size()), script.frames);
  const auto rep = fixtures::identity_report(lines, script, config.grid, config.tracking.gate);
  EXPECT_EQ(rep.ids.size(), 1u);
  EXPECT_EQ(rep.switches, 0);
  EXPECT_EQ(rep.missed, 0);
  EXPECT_EQ(rep.false_tracks, 0);
  for (const auto& line : lines) {
    for (const auto& t : parse_record(line).tracks) {
      float sum = 0.0f;
      for (float p : t.probabilities) sum += p;
      EXPECT_NEAR(sum, 1.0f, 1e-5f);
    }
  }
}

TEST(Pipeline, WorkerCountDoesNotChangeRecords) {
  const SceneScript script = load_scene(fixtures::data_dir() / "scenes" / "three_crossing.json");
  RunConfig config = RunConfig::desk();
  const auto one = fixtures::run_scene(config, script, fixtures::desk_rig(), 12, toy_people());
  config.workers = 3;
  const auto three = fixtures::run_scene(config, script, fixtures::desk_rig(), 12, toy_people());
  EXPECT_EQ(one, three);
}

TEST(Run, WritesRecordsAndMeta) {
  const auto out = std::filesystem::temp_directory_path() / "a4d_run_test";
  std::filesystem::remove_all(out);
  RunConfig c = RunConfig::desk();
  c.calibration = fixtures::data_dir() / "calib" / "desk_rig.json";
  c.input.path = fixtures::data_dir() / "scenes" / "empty.json";
  c.output = out;
  const RunSummary s = run(c);
  EXPECT_EQ(s.frames, 10);
  EXPECT_TRUE(s.heuristic_scorer);
  std::ifstream in(out / "records.jsonl");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 10);
  const std::string meta = slurp(out / "meta.json");
  EXPECT_NE(meta.find("\"frames\": 10"), std::string::npos);
  std::filesystem::remove_all(out);
}

TEST(Run, DepthDirectoryMatchesScene) {
  const auto dir = std::filesystem::temp_directory_path() / "a4d_depth_dir_test";
  std::filesystem::remove_all(dir);
  SceneScript script = load_scene(fixtures::data_dir() / "scenes" / "one_person.json");
  script.frames = 6;
  const auto cams = fixtures::desk_rig();
  simulate_to_directory(script, cams, dir / "frames", RenderOptions{});
  EXPECT_TRUE(std::filesystem::exists(dir / "frames" / "labels.json"));

  RunConfig c = RunConfig::desk();
  c.calibration = fixtures::data_dir() / "calib" / "desk_rig.json";
  c.input.kind = InputSpec::Kind::kDepthDirectory;
  c.input.path = dir / "frames";
  c.output = dir / "out";
  EXPECT_EQ(run(c).frames, 6);

  std::filesystem::remove(dir / "frames" / depth_file_name(2, 4));
  try {
    run(c);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("cam2_frame4.d16"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
