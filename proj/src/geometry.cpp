#include "action4d/geometry.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "action4d/error.hpp"

namespace action4d {
namespace {

constexpr double kMinHomogeneous = 1e-12;

Mat3 mat3_from(const nlohmann::json& values, const std::string& what) {
  if (!values.is_array() || values.size() != 9) {
    throw ConfigError("calibration: " + what + " must hold 9 numbers");
  }
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = values.at(r * 3 + c).get<double>();
  return m;
}

nlohmann::json mat3_to(const Mat3& m) {
  nlohmann::json out = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.push_back(m(r, c));
  return out;
}

}  // namespace

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("camera " + name + ": empty image size");
  if (!(min_depth >= 0.0 && min_depth < max_depth)) {
    throw ConfigError("camera " + name + ": need 0 <= min_depth < max_depth");
  }
  if (!intrinsics.allFinite() || !rotation.allFinite() || !translation.allFinite()) {
    throw ConfigError("camera " + name + ": non-finite calibration");
  }
  const double ortho_err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err >= 1e-6) throw ConfigError("camera " + name + ": rotation is not orthonormal");
  if (std::abs(intrinsics(2, 0)) > 1e-12 || std::abs(intrinsics(2, 1)) > 1e-12 ||
      std::abs(intrinsics(2, 2) - 1.0) > 1e-12) {
    throw ConfigError("camera " + name + ": intrinsics must end in row (0, 0, 1)");
  }
  if (std::abs(intrinsics.determinant()) < 1e-12) {
    throw ConfigError("camera " + name + ": singular intrinsics");
  }
}

Vec3 Camera::center() const { return -rotation.transpose() * translation; }

Projection project(const Vec3& point, const Camera& camera) {
  Projection out;
  const Vec3 cam = camera.rotation * point + camera.translation;
  out.cam_depth = cam.z();
  const Vec3 h = camera.intrinsics * cam;
  if (out.cam_depth <= 0.0 || h.z() <= kMinHomogeneous) return out;
  out.pixel = Vec2(h.x() / h.z(), h.y() / h.z());
  const long u = round_pixel(out.pixel.x());
  const long v = round_pixel(out.pixel.y());
  out.in_fov = u >= 0 && v >= 0 && u < camera.width && v < camera.height;
  return out;
}

std::optional<std::size_t> pixel_index(const Projection& projection, const Camera& camera) {
  if (!projection.in_fov) return std::nullopt;
  const long u = round_pixel(projection.pixel.x());
  const long v = round_pixel(projection.pixel.y());
  if (u < 0 || v < 0 || u >= camera.width || v >= camera.height) return std::nullopt;
  return static_cast<std::size_t>(v) * static_cast<std::size_t>(camera.width) +
         static_cast<std::size_t>(u);
}

Vec3 unproject(double u, double v, double depth, const Camera& camera) {
  const Vec3 ray = camera.intrinsics.inverse() * Vec3(u, v, 1.0);
  const Vec3 cam = ray * (depth / ray.z());
  return camera.rotation.transpose() * (cam - camera.translation);
}

Camera look_at(std::string name, const Vec3& eye, const Vec3& target, int width, int height,
               double horizontal_fov_deg, double min_depth, double max_depth) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = Vec3::UnitX();  // looking straight up or down
  right.normalize();
  const Vec3 down = forward.cross(right);

  Camera cam;
  cam.name = std::move(name);
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * eye;
  const double focal =
      0.5 * width / std::tan(0.5 * horizontal_fov_deg * std::numbers::pi / 180.0);
  cam.intrinsics << focal, 0.0, 0.5 * (width - 1), 0.0, focal, 0.5 * (height - 1), 0.0, 0.0, 1.0;
  cam.width = width;
  cam.height = height;
  cam.min_depth = min_depth;
  cam.max_depth = max_depth;
  return cam;
}

std::vector<Camera> ring_rig(int count, const Vec3& center, double radius, double mount_height,
                             const Vec3& aim, int width, int height, double horizontal_fov_deg,
                             double min_depth, double max_depth) {
  std::vector<Camera> cams;
  cams.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    // Offset by 45 degrees so a four-camera rig sits in the room corners.
    const double angle = std::numbers::pi * (0.25 + 2.0 * j / count);
    const Vec3 eye(center.x() + radius * std::cos(angle), center.y() + radius * std::sin(angle),
                   mount_height);
    cams.push_back(look_at("cam" + std::to_string(j), eye, aim, width, height, horizontal_fov_deg,
                           min_depth, max_depth));
  }
  return cams;
}

void DepthImage::validate() const {
  if (width <= 0 || height <= 0 ||
      samples.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DataError("depth image: sample count does not match its size");
  }
  for (float s : samples) {
    if (!std::isfinite(s) || s < 0.0f) throw DataError("depth image: invalid sample value");
  }
}

std::vector<Camera> parse_calibration(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("calibration: ") + e.what());
  }
  std::vector<Camera> cams;
  try {
    for (const auto& item : doc.at("cameras")) {
      Camera cam;
      cam.name = item.value("name", "cam" + std::to_string(cams.size()));
      cam.width = item.at("width").get<int>();
      cam.height = item.at("height").get<int>();
      cam.intrinsics = mat3_from(item.at("K"), "K");
      cam.rotation = mat3_from(item.at("R"), "R");
      const auto& t = item.at("t");
      if (!t.is_array() || t.size() != 3) throw ConfigError("calibration: t must hold 3 numbers");
      cam.translation = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
      cam.min_depth = item.at("min_depth").get<double>();
      cam.max_depth = item.at("max_depth").get<double>();
      cam.validate();
      cams.push_back(std::move(cam));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("calibration: ") + e.what());
  }
  return cams;
}

std::vector<Camera> load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("calibration: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_calibration(buf.str());
}

std::string format_calibration(const std::vector<Camera>& cameras) {
  nlohmann::json doc;
  doc["cameras"] = nlohmann::json::array();
  for (const auto& cam : cameras) {
    doc["cameras"].push_back({{"name", cam.name},
                              {"width", cam.width},
                              {"height", cam.height},
                              {"K", mat3_to(cam.intrinsics)},
                              {"R", mat3_to(cam.rotation)},
                              {"t", {cam.translation.x(), cam.translation.y(), cam.translation.z()}},
                              {"min_depth", cam.min_depth},
                              {"max_depth", cam.max_depth}});
  }
  return doc.dump(2) + "\n";
}

void save_calibration(const std::filesystem::path& path, const std::vector<Camera>& cameras) {
  std::ofstream out(path);
  if (!out) throw ConfigError("calibration: cannot write " + path.string());
  out << format_calibration(cameras);
}

void write_depth_d16(const std::filesystem::path& path, const DepthImage& image) {
  std::vector<unsigned char> bytes(image.samples.size() * 2);
  for (std::size_t i = 0; i < image.samples.size(); ++i) {
    const double mm = std::floor(static_cast<double>(image.samples[i]) * 1000.0);
    const auto value = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
    bytes[2 * i] = static_cast<unsigned char>(value & 0xff);
    bytes[2 * i + 1] = static_cast<unsigned char>(value >> 8);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write depth frame " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

DepthImage read_depth_d16(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing depth frame " + path.string());
  DepthImage image(width, height);
  std::vector<unsigned char> bytes(image.samples.size() * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size() || in.peek() != EOF) {
    throw DataError("depth frame has the wrong size: " + path.string());
  }
  for (std::size_t i = 0; i < image.samples.size(); ++i) {
    const std::uint16_t mm = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    image.samples[i] = static_cast<float>(mm) / 1000.0f;
  }
  return image;
}

}  // namespace action4d
