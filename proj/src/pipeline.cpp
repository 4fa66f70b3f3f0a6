#include "action4d/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "action4d/error.hpp"
#include "action4d/parallel.hpp"

namespace action4d {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <class T>
void read_field(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
  }
}

Vec3 read_vec3(const json& v, const char* what) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(std::string("config: ") + what + " needs 3 numbers");
  return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

class SceneSource final : public FrameSource {
 public:
  SceneSource(SceneScript script, std::vector<Camera> cameras, const InputSpec& input, int workers)
      : script_(std::move(script)), cameras_(std::move(cameras)), input_(input), workers_(workers) {}

  int frame_count() const override { return script_.frames; }

  std::vector<DepthImage> frame(int k) const override {
    const SceneFrame scene = script_.at(k);
    std::vector<DepthImage> out;
    for (std::size_t j = 0; j < cameras_.size(); ++j) {
      RenderOptions options;
      options.noise_sigma = input_.noise_sigma;
      options.seed = input_.seed ^ (static_cast<std::uint64_t>(k) << 16) ^ j;
      options.workers = workers_;
      out.push_back(render_depth(scene, cameras_[j], options));
    }
    return out;
  }

 private:
  SceneScript script_;
  std::vector<Camera> cameras_;
  InputSpec input_;
  int workers_;
};

class DirectorySource final : public FrameSource {
 public:
  DirectorySource(std::filesystem::path dir, std::vector<Camera> cameras, std::optional<int> frames)
      : dir_(std::move(dir)), cameras_(std::move(cameras)) {
    if (frames) {
      frames_ = *frames;
    } else {
      while (std::filesystem::exists(dir_ / depth_file_name(0, frames_))) ++frames_;
    }
  }

  int frame_count() const override { return frames_; }

  std::vector<DepthImage> frame(int k) const override {
    std::vector<DepthImage> out;
    for (std::size_t j = 0; j < cameras_.size(); ++j) {
      out.push_back(read_depth_d16(dir_ / depth_file_name(static_cast<int>(j), k), cameras_[j].width,
                                   cameras_[j].height));
    }
    return out;
  }

 private:
  std::filesystem::path dir_;
  std::vector<Camera> cameras_;
  int frames_ = 0;
};

WeightBundle default_action_bundle() { return make_bundle(action_net_descriptor()); }

}  // namespace

RunConfig RunConfig::desk() {
  RunConfig c;
  c.grid = GridSpec::desk_profile();
  c.detection = {1.0, 3, 8.0};
  c.tracking.gate = 6.0;
  return c;
}

void RunConfig::validate(bool check_files) const {
  grid.validate();
  if (!(detection.sigma >= 0.0)) throw ConfigError("config: detection.sigma must be >= 0");
  if (detection.nms_radius < 1) throw ConfigError("config: detection.nms_radius must be >= 1");
  tracking.validate();
  if (mask_dilation < 0) throw ConfigError("config: mask_dilation must be >= 0");
  if (workers < 1) throw ConfigError("config: workers must be >= 1");
  if (!check_files) return;
  const auto must_exist = [](const std::filesystem::path& p, const char* what) {
    if (!std::filesystem::exists(p)) throw ConfigError(std::string("config: ") + what + " not found: " + p.string());
  };
  must_exist(calibration, "calibration");
  must_exist(input.path, "input");
  if (people_weights) must_exist(*people_weights, "people weights");
  if (action_weights) must_exist(*action_weights, "action weights");
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  const std::string profile = j.value("profile", "full");
  RunConfig c;
  if (profile == "desk") {
    c = RunConfig::desk();
  } else if (profile != "full") {
    throw ConfigError("config: unknown profile '" + profile + "'");
  }

  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.contains("origin")) c.grid.origin = read_vec3(g["origin"], "grid.origin");
    read_field(g, "voxel_size", c.grid.voxel_size);
    read_field(g, "dims", c.grid.dims);
  }
  if (!j.contains("calibration") || !j["calibration"].is_string()) throw ConfigError("config: missing calibration");
  c.calibration = resolve(base_dir, j["calibration"].get<std::string>());

  if (!j.contains("input") || !j["input"].is_object()) throw ConfigError("config: missing input");
  const auto& in = j["input"];
  if (in.contains("scene")) {
    c.input.kind = InputSpec::Kind::kScene;
    c.input.path = resolve(base_dir, in["scene"].get<std::string>());
    read_field(in, "noise_sigma", c.input.noise_sigma);
    read_field(in, "seed", c.input.seed);
  } else if (in.contains("depth_dir")) {
    c.input.kind = InputSpec::Kind::kDepthDirectory;
    c.input.path = resolve(base_dir, in["depth_dir"].get<std::string>());
    if (in.contains("frames")) c.input.frames = in["frames"].get<int>();
  } else {
    throw ConfigError("config: input needs 'scene' or 'depth_dir'");
  }

  if (j.contains("detection")) {
    const auto& d = j["detection"];
    read_field(d, "sigma", c.detection.sigma);
    read_field(d, "nms_radius", c.detection.nms_radius);
    read_field(d, "min_height", c.detection.min_height);
  }
  if (j.contains("tracking")) {
    const auto& t = j["tracking"];
    read_field(t, "lookahead", c.tracking.lookahead);
    read_field(t, "gate", c.tracking.gate);
    read_field(t, "lambda", c.tracking.lambda);
    read_field(t, "theta_drop", c.tracking.theta_drop);
    read_field(t, "prediction_prob", c.tracking.prediction_prob);
    read_field(t, "c0", c.tracking.c0);
    read_field(t, "w_prob", c.tracking.w_prob);
    read_field(t, "w_dist", c.tracking.w_dist);
    read_field(t, "w_volume", c.tracking.w_volume);
  }
  read_field(j, "mask_dilation", c.mask_dilation);
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    if (w.contains("people") && w["people"].is_string()) c.people_weights = resolve(base_dir, w["people"].get<std::string>());
    if (w.contains("action") && w["action"].is_string()) c.action_weights = resolve(base_dir, w["action"].get<std::string>());
  }
  read_field(j, "workers", c.workers);
  if (j.contains("output")) c.output = resolve(base_dir, j["output"].get<std::string>());
  read_field(j, "dump_alpha", c.dump_alpha);
  c.validate(false);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse_run_config(ss.str(), path.parent_path());
  c.validate(true);
  return c;
}

std::string format_record(const FrameRecord& record) {
  ordered_json tracks = ordered_json::array();
  for (const auto& t : record.tracks) {
    tracks.push_back({{"id", t.id},
                      {"position", {t.position.x(), t.position.y(), t.position.z()}},
                      {"column", {t.column.x(), t.column.y()}},
                      {"score", t.score},
                      {"predicted", t.predicted},
                      {"label", t.label},
                      {"probabilities", t.probabilities}});
  }
  const ordered_json j = {{"schema", kRecordSchema},
                          {"frame", record.frame},
                          {"candidates", record.candidates},
                          {"tracks", tracks}};
  return j.dump();
}

FrameRecord parse_record(const std::string& line) {
  try {
    const json j = json::parse(line);
    if (j.at("schema").get<int>() != kRecordSchema) throw DataError("record: unsupported schema");
    FrameRecord r;
    r.frame = j.at("frame").get<int>();
    r.candidates = j.at("candidates").get<int>();
    for (const auto& t : j.at("tracks")) {
      TrackRecord tr;
      tr.id = t.at("id").get<int>();
      const auto& p = t.at("position");
      tr.position = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      const auto& c = t.at("column");
      tr.column = Vec2(c[0].get<double>(), c[1].get<double>());
      tr.score = t.at("score").get<double>();
      tr.predicted = t.at("predicted").get<bool>();
      tr.label = t.at("label").get<int>();
      tr.probabilities = t.at("probabilities").get<std::vector<float>>();
      r.tracks.push_back(std::move(tr));
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("record: malformed line: ") + e.what());
  }
}

VoxelGrid reconstruct(const CarvePlan& plan, std::span<const DepthImage> depths, int mask_dilation, int workers) {
  VoxelGrid grid = plan.carve(depths, workers);
  std::vector<PointCloud> clouds;
  clouds.reserve(depths.size());
  for (std::size_t j = 0; j < depths.size(); ++j) clouds.push_back(depth_to_cloud(depths[j], plan.cameras()[j]));
  grid = apply_topdown_mask(grid, clouds, mask_dilation);
  return inject_points(std::move(grid), clouds);
}

Pipeline::Pipeline(const RunConfig& config, std::vector<Camera> cameras)
    : Pipeline(config, std::move(cameras),
               config.people_weights ? std::optional<WeightBundle>(load_bundle(*config.people_weights)) : std::nullopt,
               config.action_weights ? std::optional<WeightBundle>(load_bundle(*config.action_weights))
                                     : std::nullopt) {}

Pipeline::Pipeline(const RunConfig& config, std::vector<Camera> cameras, std::optional<WeightBundle> people,
                   std::optional<WeightBundle> action)
    : config_(config),
      plan_(config.grid, std::move(cameras), config.workers),
      scorer_(people ? PersonScorer::network(*people) : PersonScorer::heuristic()),
      action_(action ? *action : default_action_bundle()),
      tracker_(config.tracking) {
  config_.validate(false);
}

std::vector<FrameRecord> Pipeline::push(std::span<const DepthImage> depths) {
  Pending p;
  p.frame = next_frame_++;

  auto start = Clock::now();
  p.grid = reconstruct(plan_, depths, config_.mask_dilation, config_.workers);
  timings_.reconstruct_ms += ms_since(start);

  start = Clock::now();
  const std::vector<Candidate> candidates = detect(p.grid, config_.detection);
  timings_.detect_ms += ms_since(start);

  start = Clock::now();
  p.detections.resize(candidates.size());
  parallel_for(candidates.size(), config_.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Detection& d = p.detections[i];
      d.position = Vec2(candidates[i].m, candidates[i].n);
      d.crop = crop_person(p.grid, candidates[i].m, candidates[i].n);
      d.prob = scorer_.score(d.crop);
    }
  });
  timings_.classify_ms += ms_since(start);
  ++timings_.frames;

  pending_.push_back(std::move(p));
  std::vector<FrameRecord> out;
  if (pending_.size() > static_cast<std::size_t>(config_.tracking.lookahead)) {
    out.push_back(emit(static_cast<std::size_t>(config_.tracking.lookahead)));
  }
  return out;
}

std::vector<FrameRecord> Pipeline::finish() {
  std::vector<FrameRecord> out;
  while (!pending_.empty()) out.push_back(emit(pending_.size() - 1));
  return out;
}

FrameRecord Pipeline::emit(std::size_t lookahead) {
  auto start = Clock::now();
  std::vector<std::vector<Detection>> window;
  for (std::size_t k = 0; k <= lookahead && k < pending_.size(); ++k) window.push_back(pending_[k].detections);
  const Pending& current = pending_.front();
  const std::vector<Trajectory>& live = tracker_.step(current.frame, window);
  timings_.track_ms += ms_since(start);

  start = Clock::now();
  FrameRecord record;
  record.frame = current.frame;
  record.candidates = static_cast<int>(current.detections.size());
  std::vector<const Trajectory*> reported;
  for (const auto& tr : live) {
    if (tr.people_score >= config_.tracking.theta_drop) reported.push_back(&tr);
  }
  std::sort(reported.begin(), reported.end(), [](const Trajectory* a, const Trajectory* b) { return a->id < b->id; });

  std::vector<ActionStep> steps(reported.size());
  parallel_for(reported.size(), config_.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Trajectory& tr = *reported[i];
      const Vec2 pos = tr.history.back().position;
      const PersonVolume crop = crop_person(current.grid, static_cast<int>(round_pixel(pos.x())),
                                            static_cast<int>(round_pixel(pos.y())));
      const auto it = action_state_.find(tr.id);
      steps[i] = action_.step(crop, it != action_state_.end() ? it->second : action_.initial_state());
    }
  });

  std::map<int, LstmState> next_state;
  const GridSpec& spec = config_.grid;
  for (std::size_t i = 0; i < reported.size(); ++i) {
    const Trajectory& tr = *reported[i];
    const Vec2 pos = tr.history.back().position;
    TrackRecord t;
    t.id = tr.id;
    t.column = pos;
    t.position = spec.origin + spec.voxel_size * Vec3(pos.x(), pos.y(), 0.0);
    t.position.z() = 0.0;
    t.score = tr.people_score;
    t.predicted = tr.history.back().predicted;
    t.probabilities = steps[i].probabilities;
    t.label = argmax(t.probabilities);
    if (on_alpha) on_alpha(current.frame, tr.id, steps[i].alpha);
    next_state[tr.id] = std::move(steps[i].state);
    record.tracks.push_back(std::move(t));
  }
  action_state_ = std::move(next_state);
  timings_.action_ms += ms_since(start);
  pending_.pop_front();
  return record;
}

std::string depth_file_name(int camera, int frame) {
  return "cam" + std::to_string(camera) + "_frame" + std::to_string(frame) + ".d16";
}

std::unique_ptr<FrameSource> open_source(const RunConfig& config, const std::vector<Camera>& cameras) {
  if (config.input.kind == InputSpec::Kind::kScene) {
    return std::make_unique<SceneSource>(load_scene(config.input.path), cameras, config.input, config.workers);
  }
  if (!std::filesystem::is_directory(config.input.path)) {
    throw DataError("depth directory not found: " + config.input.path.string());
  }
  return std::make_unique<DirectorySource>(config.input.path, cameras, config.input.frames);
}

RunSummary run(const RunConfig& config) {
  config.validate(true);
  const std::vector<Camera> cameras = load_calibration(config.calibration);
  if (cameras.empty()) throw ConfigError("calibration has no cameras");
  const auto source = open_source(config, cameras);
  Pipeline pipeline(config, cameras);

  std::filesystem::create_directories(config.output);
  if (config.dump_alpha) {
    const auto dir = config.output / "alpha";
    std::filesystem::create_directories(dir);
    pipeline.on_alpha = [dir](int frame, int id, const Tensor& alpha) {
      save_alpha_map(dir / ("frame" + std::to_string(frame) + "_track" + std::to_string(id) + ".w4db"), alpha);
    };
  }
  std::ofstream records(config.output / "records.jsonl", std::ios::binary);
  if (!records) throw ConfigError("cannot write " + (config.output / "records.jsonl").string());
  const auto write = [&records](const std::vector<FrameRecord>& batch) {
    for (const auto& r : batch) records << format_record(r) << '\n';
    records.flush();
  };
  const int frames = source->frame_count();
  for (int k = 0; k < frames; ++k) {
    const std::vector<DepthImage> depths = source->frame(k);
    write(pipeline.push(depths));
  }
  write(pipeline.finish());

  const ordered_json meta = {
      {"schema", kRecordSchema},
      {"frames", frames},
      {"heuristic_scorer", pipeline.heuristic_scorer()},
      {"people_weights", config.people_weights ? json(config.people_weights->filename().string()) : json(nullptr)},
      {"action_weights", config.action_weights ? json(config.action_weights->filename().string()) : json(nullptr)},
      {"grid",
       {{"origin", {config.grid.origin.x(), config.grid.origin.y(), config.grid.origin.z()}},
        {"voxel_size", config.grid.voxel_size},
        {"dims", config.grid.dims}}},
      {"cameras", cameras.size()},
      {"lookahead", config.tracking.lookahead}};
  std::ofstream meta_out(config.output / "meta.json", std::ios::binary);
  meta_out << meta.dump(2) << '\n';
  return {frames, pipeline.timings(), pipeline.heuristic_scorer()};
}

void simulate_to_directory(const SceneScript& script, const std::vector<Camera>& cameras,
                           const std::filesystem::path& out, const RenderOptions& options) {
  script.validate();
  std::filesystem::create_directories(out);
  json persons = json::array();
  for (const auto& p : script.persons) {
    json labels = json::array();
    json positions = json::array();
    for (int k = 0; k < script.frames; ++k) {
      const auto pose = p.pose(k);
      labels.push_back(pose ? p.label(k) : -1);
      positions.push_back(pose ? json::array({pose->x, pose->y}) : json(nullptr));
    }
    persons.push_back({{"id", p.id}, {"labels", labels}, {"positions", positions}});
  }
  for (int k = 0; k < script.frames; ++k) {
    const SceneFrame frame = script.at(k);
    for (std::size_t j = 0; j < cameras.size(); ++j) {
      RenderOptions o = options;
      o.seed = options.seed ^ (static_cast<std::uint64_t>(k) << 16) ^ j;
      write_depth_d16(out / depth_file_name(static_cast<int>(j), k), render_depth(frame, cameras[j], o));
    }
  }
  std::ofstream labels(out / "labels.json", std::ios::binary);
  if (!labels) throw DataError("cannot write " + (out / "labels.json").string());
  labels << json{{"frames", script.frames}, {"persons", persons}}.dump(1) << '\n';
}

Accuracy evaluate(std::span<const int> predicted, std::span<const int> truth, int window) {
  if (predicted.size() != truth.size()) throw ContractViolation("evaluate: sequence lengths differ");
  if (predicted.empty()) throw ContractViolation("evaluate: empty sequences");
  if (window < 0) throw ContractViolation("evaluate: window must be >= 0");
  const auto n = static_cast<long>(truth.size());
  long exact = 0;
  long relaxed = 0;
  for (long i = 0; i < n; ++i) {
    const int p = predicted[static_cast<std::size_t>(i)];
    if (p == truth[static_cast<std::size_t>(i)]) ++exact;
    for (long j = std::max(0L, i - window); j <= std::min(n - 1, i + window); ++j) {
      if (truth[static_cast<std::size_t>(j)] == p) {
        ++relaxed;
        break;
      }
    }
  }
  return {100.0 * static_cast<double>(exact) / static_cast<double>(n),
          100.0 * static_cast<double>(relaxed) / static_cast<double>(n)};
}

}  // namespace action4d
