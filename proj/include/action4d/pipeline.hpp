#pragma once

#include <array>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "action4d/action_net.hpp"
#include "action4d/carving.hpp"
#include "action4d/detection.hpp"
#include "action4d/geometry.hpp"
#include "action4d/people_net.hpp"
#include "action4d/simulator.hpp"
#include "action4d/tracking.hpp"

namespace action4d {

inline constexpr int kRecordSchema = 1;

struct InputSpec {
  enum class Kind { kScene, kDepthDirectory };
  Kind kind = Kind::kScene;
  std::filesystem::path path;
  std::optional<int> frames;  // depth directory: frame count (default: scan)
  double noise_sigma = 0.0;   // scene: renderer noise
  std::uint64_t seed = 0;     // scene: noise seed
};

/// Run configuration. JSON file, relative paths resolve against the file's directory:
///   {"profile": "full" | "desk",
///    "grid": {"origin": [x,y,z], "voxel_size": s, "dims": [X,Y,Z]},
///    "calibration": "calib.json",
///    "input": {"scene": "scene.json", "noise_sigma": 0, "seed": 0}
///           | {"depth_dir": "frames/", "frames": 300},
///    "detection": {"sigma": 2, "nms_radius": 5, "min_height": 16},
///    "tracking": {"lookahead": 3, "gate": 8, "lambda": 0.3, "theta_drop": 0.5,
///                 "prediction_prob": 0.3, "c0": 1, "w_prob": 1, "w_dist": 1, "w_volume": 1},
///    "mask_dilation": 0,
///    "weights": {"people": "people.w4db", "action": "action.w4db"},
///    "workers": 1, "output": "out/", "dump_alpha": false}
/// The profile sets grid, detection and tracking defaults; explicit fields win.
struct RunConfig {
  GridSpec grid = GridSpec::full_default();
  std::filesystem::path calibration;
  InputSpec input;
  DetectionParams detection;
  TrackingParams tracking;
  int mask_dilation = 0;
  std::optional<std::filesystem::path> people_weights;
  std::optional<std::filesystem::path> action_weights;
  int workers = 1;
  std::filesystem::path output = "out";
  bool dump_alpha = false;

  /// Desk-scale defaults: 101 x 101 x 43 grid at 10 cm with detection and
  /// gating radii scaled to the coarser voxels.
  static RunConfig desk();
  /// Checks ranges and, with `check_files`, that every referenced file exists (ConfigError).
  void validate(bool check_files = true) const;
};

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

struct TrackRecord {
  int id = 0;
  Vec3 position = Vec3::Zero();  // world metres, floor point
  Vec2 column = Vec2::Zero();
  double score = 0.0;
  int label = 0;
  std::vector<float> probabilities;
  bool predicted = false;
};

struct FrameRecord {
  int frame = 0;
  int candidates = 0;
  std::vector<TrackRecord> tracks;
};

std::string format_record(const FrameRecord& record);
FrameRecord parse_record(const std::string& line);

struct StageTimings {
  double reconstruct_ms = 0.0;
  double detect_ms = 0.0;
  double classify_ms = 0.0;
  double track_ms = 0.0;
  double action_ms = 0.0;
  int frames = 0;

  double total_ms() const { return reconstruct_ms + detect_ms + classify_ms + track_ms + action_ms; }
};

/// carve -> top-down mask -> point injection.
VoxelGrid reconstruct(const CarvePlan& plan, std::span<const DepthImage> depths, int mask_dilation,
                      int workers);

/// Incremental pipeline. Frame t's record is produced once frame t + n has
/// arrived (n = lookahead); finish() flushes the tail with a shorter lookahead.
class Pipeline {
 public:
  Pipeline(const RunConfig& config, std::vector<Camera> cameras);
  Pipeline(const RunConfig& config, std::vector<Camera> cameras, std::optional<WeightBundle> people,
           std::optional<WeightBundle> action);

  std::vector<FrameRecord> push(std::span<const DepthImage> depths);
  std::vector<FrameRecord> finish();

  bool heuristic_scorer() const { return scorer_.is_heuristic(); }
  const StageTimings& timings() const { return timings_; }
  const CarvePlan& plan() const { return plan_; }
  /// Invoked with (frame, track id, alpha) for every action step.
  std::function<void(int, int, const Tensor&)> on_alpha;

 private:
  struct Pending {
    int frame = 0;
    VoxelGrid grid;
    std::vector<Detection> detections;
  };

  FrameRecord emit(std::size_t lookahead);

  RunConfig config_;
  CarvePlan plan_;
  PersonScorer scorer_;
  ActionNet action_;
  Tracker tracker_;
  std::map<int, LstmState> action_state_;
  std::deque<Pending> pending_;
  int next_frame_ = 0;
  StageTimings timings_;
};

/// Depth frames for a run: rendered from a scene script or read from cam{j}_frame{k}.d16 files.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual int frame_count() const = 0;
  /// Throws DataError naming the offending file when a frame is missing.
  virtual std::vector<DepthImage> frame(int k) const = 0;
};

std::unique_ptr<FrameSource> open_source(const RunConfig& config, const std::vector<Camera>& cameras);

std::string depth_file_name(int camera, int frame);

struct RunSummary {
  int frames = 0;
  StageTimings timings;
  bool heuristic_scorer = false;
};

/// Runs the configured pipeline, writing records.jsonl and meta.json to config.output.
RunSummary run(const RunConfig& config);

/// Renders every frame of `script` for `cameras` into `out` and writes labels.json
/// with the per-person, per-frame ground-truth labels and columns.
void simulate_to_directory(const SceneScript& script, const std::vector<Camera>& cameras,
                           const std::filesystem::path& out, const RenderOptions& options);

struct Accuracy {
  double acc = 0.0;   // percent
  double racc = 0.0;  // percent
};

/// Per-frame accuracy, and the relaxed accuracy that accepts any truth label
/// within +-window frames (clamped at the ends). Throws ContractViolation on a length mismatch.
Accuracy evaluate(std::span<const int> predicted, std::span<const int> truth, int window = 3);

}  // namespace action4d
