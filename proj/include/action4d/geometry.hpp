#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace action4d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole depth camera. World-to-camera is x_cam = R * x_world + t; camera
/// axes are x right, y down, z forward, so the third row of [R|t] gives the
/// metric camera-space depth of a world point.
struct Camera {
  std::string name;
  Mat3 intrinsics = Mat3::Identity();
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int width = 1;
  int height = 1;
  double min_depth = 0.0;
  double max_depth = 10.0;

  /// Throws ConfigError if R is not orthonormal, the image is empty, the depth
  /// range is inverted, or K does not have a (0, 0, 1) last row.
  void validate() const;

  /// Camera center in world coordinates, -R^T t.
  Vec3 center() const;

  /// Third row of R (the depth axis in world coordinates).
  Eigen::RowVector3d depth_row() const { return rotation.row(2); }
  double depth_offset() const { return translation.z(); }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
};

struct Projection {
  Vec2 pixel = Vec2::Zero();  // continuous pixel coordinates (u, v)
  double cam_depth = 0.0;     // metres along the optical axis
  bool in_fov = false;
};

/// Projects a world point. in_fov requires positive depth and a rounded pixel
/// inside the image; no perspective division happens for depths <= 1e-12.
Projection project(const Vec3& point, const Camera& camera);

/// Row-major pixel index of a projection (round-to-nearest), if in view.
std::optional<std::size_t> pixel_index(const Projection& projection, const Camera& camera);

/// Round-to-nearest used for every continuous-to-pixel conversion.
inline long round_pixel(double coordinate) {
  return static_cast<long>(std::floor(coordinate + 0.5));
}

/// World point seen at pixel (u, v) with camera-space depth `depth`.
Vec3 unproject(double u, double v, double depth, const Camera& camera);

/// Camera at `eye` looking at `target` with world +z as up. Focal length is
/// derived from the horizontal field of view; the principal point is centred.
Camera look_at(std::string name, const Vec3& eye, const Vec3& target, int width, int height,
               double horizontal_fov_deg, double min_depth, double max_depth);

/// `count` cameras evenly spaced on a circle of `radius` around `center`, at
/// `mount_height`, all aimed at `aim` (a point near the floor at the centre).
std::vector<Camera> ring_rig(int count, const Vec3& center, double radius, double mount_height,
                             const Vec3& aim, int width, int height, double horizontal_fov_deg,
                             double min_depth = 0.4, double max_depth = 10.0);

/// Depth image in metres, row-major; 0 marks an invalid sample.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> samples;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), samples(static_cast<std::size_t>(w) * h, 0.0f) {}

  float at(int u, int v) const { return samples[static_cast<std::size_t>(v) * width + u]; }
  float& at(int u, int v) { return samples[static_cast<std::size_t>(v) * width + u]; }
  static bool is_valid(float sample) { return sample > 0.0f; }

  /// Throws DataError if the sample count disagrees with the size or a
  /// sample is negative or non-finite.
  void validate() const;
};

/// Calibration files are JSON: {"cameras": [{"name", "width", "height",
/// "K": [9], "R": [9], "t": [3], "min_depth", "max_depth"}, ...]} with
/// matrices in row-major order.
std::vector<Camera> load_calibration(const std::filesystem::path& path);
std::vector<Camera> parse_calibration(const std::string& text);
void save_calibration(const std::filesystem::path& path, const std::vector<Camera>& cameras);
std::string format_calibration(const std::vector<Camera>& cameras);

/// 16-bit little-endian millimetre depth frames (0 = invalid), row-major.
/// Writing truncates towards zero so a stored depth never exceeds the true one.
void write_depth_d16(const std::filesystem::path& path, const DepthImage& image);
DepthImage read_depth_d16(const std::filesystem::path& path, int width, int height);

}  // namespace action4d
