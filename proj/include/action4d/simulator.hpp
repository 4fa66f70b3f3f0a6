#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "action4d/carving.hpp"
#include "action4d/geometry.hpp"

namespace action4d {

/// Number of action label ids; labels are opaque integers in [0, kActionCount).
inline constexpr int kActionCount = 16;

/// Solid used by the renderer and the occupancy oracle.
struct Shape {
  enum class Kind { kBox, kCapsule };
  Kind kind = Kind::kBox;
  // Box: centre, yaw about +z, half extents.
  Vec3 center = Vec3::Zero();
  double yaw = 0.0;
  Vec3 half_extents = Vec3::Constant(0.5);
  // Capsule: segment end points and radius.
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
  int person_id = -1;  // -1 for furniture

  static Shape box(const Vec3& center, const Vec3& size, double yaw = 0.0);
  static Shape capsule(const Vec3& a, const Vec3& b, double radius);

  bool contains(const Vec3& p) const;
  /// Smallest ray parameter s > 0 with origin + s * dir inside the surface, if any.
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir) const;
  /// Centre and radius of a sphere enclosing the shape.
  std::pair<Vec3, double> bounding_sphere() const;
};

struct ScenePrimitive {
  enum class Kind { kBox, kVerticalCapsule };
  Kind kind = Kind::kBox;
  Vec3 center = Vec3::Zero();
  double yaw = 0.0;
  Vec3 size = Vec3::Constant(1.0);  // box: full extents
  double radius = 0.2;              // capsule
  double height = 1.0;              // capsule: total height, centred on `center`
  int person_id = -1;               // >= 0 labels a static person, -1 furniture

  Shape to_shape() const;
  void validate() const;
};

struct TrackKey {
  int frame = 0;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

/// A scripted person: body capsule standing on the floor plus one arm capsule
/// whose pose depends on the current action label.
struct ScriptedPerson {
  int id = 0;
  double radius = 0.2;
  double height = 1.7;
  std::vector<TrackKey> track;                    // strictly increasing frames
  std::vector<std::pair<int, int>> label_runs;    // (first frame, label) runs

  bool present(int frame) const;
  /// Linearly interpolated (x, y, yaw) at `frame`; nullopt outside the track.
  std::optional<TrackKey> pose(int frame) const;
  int label(int frame) const;
};

struct PersonState {
  int id = 0;
  Vec3 position = Vec3::Zero();  // floor point under the body axis
  double yaw = 0.0;
  int label = 0;
};

/// Everything visible at one instant.
struct SceneFrame {
  std::vector<Shape> shapes;
  std::vector<PersonState> persons;
  bool floor = true;
};

struct SceneScript {
  double frame_rate = 15.0;
  int frames = 1;
  bool floor = true;
  std::vector<ScenePrimitive> primitives;
  std::vector<ScriptedPerson> persons;

  void validate() const;
  SceneFrame at(int frame) const;
};

/// Body and arm capsules for a person standing at (x, y) facing `yaw`.
/// `jitter` perturbs the arm elevation (radians).
std::vector<Shape> person_shapes(int person_id, double x, double y, double yaw, double radius,
                                 double height, int label, double jitter = 0.0);

/// Arm (elevation, azimuth) in degrees for an action label.
std::pair<double, double> arm_pose_degrees(int label);

enum class DepthSampling {
  kCenterRay,     // depth along the ray through the pixel centre
  kFootprintMin,  // exact minimum depth over the pixel's footprint
};

struct RenderOptions {
  DepthSampling sampling = DepthSampling::kFootprintMin;
  double noise_sigma = 0.0;  // additive Gaussian noise in metres
  std::uint64_t seed = 0;    // noise stream seed
  int workers = 1;
};

/// Camera-space depth of the nearest surface per pixel. kFootprintMin stores
/// the smallest depth of any solid point whose projection falls inside the
/// pixel square (rounding to that pixel), so every voxel centre inside a
/// solid measures a depth no smaller than its sample and is never carved.
/// The minimum is evaluated exactly from corner rays, box vertices and edge
/// crossings of pixel boundary planes, and the closed-form minimum of each
/// capsule on those planes. Depths outside [min_depth, max_depth] are invalid.
DepthImage render_depth(const SceneFrame& frame, const Camera& camera,
                        const RenderOptions& options = {});

/// Voxel occupied iff its centre is inside some shape (the floor is not a shape).
VoxelGrid ground_truth_occupancy(const SceneFrame& frame, const GridSpec& spec);

struct GroundTruthDetection {
  int person_id = 0;
  int m = 0;
  int n = 0;
};

/// Column of every person's body axis that falls inside the grid.
std::vector<GroundTruthDetection> ground_truth_detections(const SceneFrame& frame,
                                                          const GridSpec& spec);

/// Scene scripts are JSON:
///   {"frame_rate": 15, "frames": 300, "floor": true,
///    "primitives": [{"kind": "box", "center": [x,y,z], "yaw": r, "size": [sx,sy,sz]},
///                   {"kind": "vertical_capsule", "center": [x,y,z], "radius": r, "height": h}],
///    "persons": [{"id": 1, "radius": 0.2, "height": 1.7,
///                 "track": [[frame, x, y, yaw], ...],
///                 "labels": [[first_frame, label], ...]}]}
SceneScript parse_scene(const std::string& text);
SceneScript load_scene(const std::filesystem::path& path);
std::string format_scene(const SceneScript& script);
void save_scene(const std::filesystem::path& path, const SceneScript& script);

/// Random furniture clutter (boxes and vertical capsules resting on the
/// floor) inside the square [-half_extent, half_extent]^2.
std::vector<ScenePrimitive> random_clutter(std::uint64_t seed, int count, double half_extent);

}  // namespace action4d
