#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "action4d/error.hpp"
#include "action4d/pipeline.hpp"

namespace a4d = action4d;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::vector<int> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw a4d::DataError("cannot open label file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    try {
      const auto j = nlohmann::json::parse(text);
      return (j.is_object() ? j.at("labels") : j).get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw a4d::DataError("bad label file " + path + ": " + e.what());
    }
  }
  std::vector<int> labels;
  std::istringstream words(text);
  std::string w;
  while (words >> w) {
    try {
      std::size_t used = 0;
      labels.push_back(std::stoi(w, &used));
      if (used != w.size()) throw std::invalid_argument(w);
    } catch (const std::exception&) {
      throw a4d::DataError("bad label '" + w + "' in " + path);
    }
  }
  return labels;
}

int cmd_run(const std::string& config_path) {
  const a4d::RunConfig config = a4d::load_run_config(config_path);
  const a4d::RunSummary s = a4d::run(config);
  std::printf("frames %d -> %s\n", s.frames, (config.output / "records.jsonl").string().c_str());
  if (s.heuristic_scorer) std::printf("note: no people weights, heuristic person scorer in use\n");
  return 0;
}

int cmd_simulate(const std::string& scene, const std::string& calib, const std::string& out, double sigma,
                 std::uint64_t seed, int workers) {
  const a4d::SceneScript script = a4d::load_scene(scene);
  const std::vector<a4d::Camera> cameras = a4d::load_calibration(calib);
  a4d::RenderOptions options;
  options.noise_sigma = sigma;
  options.seed = seed;
  options.workers = workers;
  a4d::simulate_to_directory(script, cameras, out, options);
  std::printf("wrote %d frames x %zu cameras to %s\n", script.frames, cameras.size(), out.c_str());
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& truth, int window) {
  const auto p = read_labels(pred);
  const auto t = read_labels(truth);
  if (p.size() != t.size() || p.empty()) {
    throw a4d::DataError("prediction and truth need the same non-zero length");
  }
  const a4d::Accuracy a = a4d::evaluate(p, t, window);
  std::printf("frames %zu  Acc %.2f%%  RAcc(+-%d) %.2f%%\n", p.size(), a.acc, window, a.racc);
  return 0;
}

int cmd_rig(const std::string& out, int count, double radius, double mount, double aim_z, int width, int height,
            double hfov, double max_depth) {
  const auto cameras = a4d::ring_rig(count, a4d::Vec3::Zero(), radius, mount, a4d::Vec3(0, 0, aim_z), width,
                                     height, hfov, 0.4, max_depth);
  a4d::save_calibration(out, cameras);
  std::printf("wrote %d cameras to %s\n", count, out.c_str());
  return 0;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

void bench_full_carve(int workers) {
  const auto cameras = a4d::ring_rig(4, a4d::Vec3::Zero(), 5.5, 2.6, a4d::Vec3(0, 0, 0.8), 512, 424, 70.6);
  a4d::SceneScript script;
  script.primitives = a4d::random_clutter(7, 24, 4.0);
  a4d::ScriptedPerson person;
  person.id = 1;
  person.track = {{0, 0.0, 0.0, 0.0}};
  script.persons = {person};
  const a4d::SceneFrame frame = script.at(0);
  std::vector<a4d::DepthImage> depths;
  for (const auto& cam : cameras) depths.push_back(a4d::render_depth(frame, cam));

  const auto t0 = std::chrono::steady_clock::now();
  const a4d::CarvePlan plan(a4d::GridSpec::full_default(), cameras, workers);
  const double plan_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::vector<double> times;
  for (int i = 0; i < 15; ++i) {
    const auto s = std::chrono::steady_clock::now();
    const a4d::VoxelGrid g = plan.carve(depths, workers);
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - s).count());
    if (g.occupancy.empty()) std::abort();
  }
  const double m = median(times);
  std::printf("full-scale carve 201x201x85, 4 x 512x424, %d workers (%u hw threads): plan %.1f ms, carve median %.2f ms "
              "[target <= 66, floor <= 132] %s\n",
              workers, std::thread::hardware_concurrency(), plan_ms, m,
              m <= 66.0 ? "PASS" : (m <= 132.0 ? "WITHIN-FLOOR" : "FAIL"));
}

int cmd_bench(const std::string& config_path, int frames, bool full_carve, int workers_override) {
  a4d::RunConfig config = a4d::load_run_config(config_path);
  if (workers_override > 0) config.workers = workers_override;
  const auto cameras = a4d::load_calibration(config.calibration);
  const auto source = a4d::open_source(config, cameras);
  const int available = source->frame_count();
  if (available < 1) throw a4d::DataError("input has no frames");
  // Frames are produced up front so input synthesis is not timed.
  std::vector<std::vector<a4d::DepthImage>> inputs;
  for (int k = 0; k < std::min(frames, available); ++k) inputs.push_back(source->frame(k));

  a4d::Pipeline pipeline(config, cameras);
  std::size_t records = 0;
  const auto start = std::chrono::steady_clock::now();
  for (int k = 0; k < frames; ++k) records += pipeline.push(inputs[static_cast<std::size_t>(k) % inputs.size()]).size();
  records += pipeline.finish().size();
  const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  const auto& t = pipeline.timings();
  const double fps = 1000.0 * frames / wall;
  std::printf("pipeline: %d frames, %zu records, %d workers, %.1f ms wall, %.2f fps [target >= 15, floor >= 7.5] %s\n",
              frames, records, config.workers, wall, fps, fps >= 15.0 ? "PASS" : (fps >= 7.5 ? "WITHIN-FLOOR" : "FAIL"));
  const double n = std::max(1, t.frames);
  std::printf("per-frame ms: reconstruct %.2f  detect %.2f  classify %.2f  track %.2f  action %.2f\n",
              t.reconstruct_ms / n, t.detect_ms / n, t.classify_ms / n, t.track_ms / n, t.action_ms / n);
  if (full_carve) bench_full_carve(config.workers);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volumetric multi-camera person tracking and action recognition"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the pipeline described by a config file");
  run->add_option("--config", config_path, "run configuration (JSON)")->required();

  std::string scene, calib, out;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  int workers = 1;
  auto* sim = app.add_subcommand("simulate", "render depth frames for a scene script");
  sim->add_option("--scene", scene, "scene script (JSON)")->required();
  sim->add_option("--calib", calib, "camera calibration (JSON)")->required();
  sim->add_option("--out", out, "output directory")->required();
  sim->add_option("--noise-sigma", sigma, "depth noise in metres")->check(CLI::NonNegativeNumber);
  sim->add_option("--seed", seed, "noise seed");
  sim->add_option("--workers", workers, "render threads")->check(CLI::PositiveNumber);

  std::string pred, truth;
  int window = 3;
  auto* ev = app.add_subcommand("eval", "per-frame Acc and RAcc of a label sequence");
  ev->add_option("--pred", pred, "predicted labels (JSON array or whitespace separated)")->required();
  ev->add_option("--truth", truth, "ground-truth labels")->required();
  ev->add_option("--window", window, "RAcc window in frames")->check(CLI::NonNegativeNumber);

  int frames = 100;
  bool full_carve = false;
  int bench_workers = 0;
  auto* bench = app.add_subcommand("bench", "time the pipeline on pre-loaded frames");
  bench->add_option("--config", config_path, "run configuration (JSON)")->required();
  bench->add_option("--frames", frames, "frames to process")->check(CLI::PositiveNumber);
  bench->add_flag("--full-carve", full_carve, "also time a 201x201x85 carve from 4 x 512x424 images");
  bench->add_option("--workers", bench_workers, "override the configured worker count")->check(CLI::PositiveNumber);

  int rig_count = 4, rig_w = 256, rig_h = 212;
  double rig_radius = 5.5, rig_mount = 4.4, rig_aim = 1.2, rig_hfov = 70.6, rig_max = 12.0;
  auto* rig = app.add_subcommand("rig", "write a calibration for a ring of cameras aimed at the origin");
  rig->add_option("--out", out, "calibration file to write")->required();
  rig->add_option("--count", rig_count, "cameras")->check(CLI::PositiveNumber);
  rig->add_option("--radius", rig_radius, "ring radius in metres");
  rig->add_option("--mount", rig_mount, "mount height in metres");
  rig->add_option("--aim-z", rig_aim, "height of the aim point above the origin");
  rig->add_option("--width", rig_w, "image width")->check(CLI::PositiveNumber);
  rig->add_option("--height", rig_h, "image height")->check(CLI::PositiveNumber);
  rig->add_option("--hfov", rig_hfov, "horizontal field of view in degrees");
  rig->add_option("--max-depth", rig_max, "far depth limit in metres");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*sim) return cmd_simulate(scene, calib, out, sigma, seed, workers);
    if (*ev) return cmd_eval(pred, truth, window);
    if (*rig) return cmd_rig(out, rig_count, rig_radius, rig_mount, rig_aim, rig_w, rig_h, rig_hfov, rig_max);
    if (*bench) return cmd_bench(config_path, frames, full_carve, bench_workers);
  } catch (const a4d::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const a4d::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
