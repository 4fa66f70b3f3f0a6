#include "action4d/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "action4d/error.hpp"
#include "action4d/parallel.hpp"

namespace action4d {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kTile = 16;
constexpr double kArmRadius = 0.07;
constexpr double kArmJitterDeg = 8.0;

// Entry parameter of the ray o + s*d into a sphere, if in front of the origin.
std::optional<double> sphere_entry(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
  const Vec3 oc = o - c;
  const double a = d.squaredNorm();
  const double b = oc.dot(d);
  const double cc = oc.squaredNorm() - r * r;
  if (cc <= 0.0) return std::nullopt;  // origin inside
  const double disc = b * b - a * cc;
  if (disc < 0.0) return std::nullopt;
  const double s = (-b - std::sqrt(disc)) / a;
  if (s <= 0.0) return std::nullopt;
  return s;
}

double point_segment_distance2(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).squaredNorm();
}

// Stateless 64-bit mix for per-frame arm jitter.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_jitter(int person_id, int frame) {
  const std::uint64_t h = mix64((static_cast<std::uint64_t>(static_cast<std::uint32_t>(person_id))
                                 << 32) ^
                                static_cast<std::uint32_t>(frame));
  return 2.0 * (static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53)) - 1.0;
}

Vec3 vec3_from(const nlohmann::json& v, const char* what) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(std::string("scene: ") + what + " needs 3 numbers");
  return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

struct ScreenRect {
  int u0, v0, u1, v1;  // inclusive
};

ScreenRect screen_bounds(const Shape& shape, const Camera& cam) {
  const ScreenRect full{0, 0, cam.width - 1, cam.height - 1};
  const auto [center, radius] = shape.bounding_sphere();
  const Vec3 cc = cam.rotation * center + cam.translation;
  if (cc.z() - radius <= 1e-3) return full;
  double u_min = std::numeric_limits<double>::infinity();
  double v_min = u_min;
  double u_max = -u_min;
  double v_max = -u_min;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 p = cc + radius * Vec3((corner & 1) ? 1 : -1, (corner & 2) ? 1 : -1,
                                      (corner & 4) ? 1 : -1);
    const Vec3 h = cam.intrinsics * p;
    u_min = std::min(u_min, h.x() / h.z());
    u_max = std::max(u_max, h.x() / h.z());
    v_min = std::min(v_min, h.y() / h.z());
    v_max = std::max(v_max, h.y() / h.z());
  }
  // A footprint sample reaches half a pixel beyond the pixel centre.
  ScreenRect r{static_cast<int>(std::floor(u_min - 1.0)), static_cast<int>(std::floor(v_min - 1.0)),
               static_cast<int>(std::ceil(u_max + 1.0)), static_cast<int>(std::ceil(v_max + 1.0))};
  r.u0 = std::max(r.u0, 0);
  r.v0 = std::max(r.v0, 0);
  r.u1 = std::min(r.u1, cam.width - 1);
  r.v1 = std::min(r.v1, cam.height - 1);
  return r;
}

}  // namespace

Shape Shape::box(const Vec3& center, const Vec3& size, double yaw) {
  Shape s;
  s.kind = Kind::kBox;
  s.center = center;
  s.half_extents = 0.5 * size;
  s.yaw = yaw;
  return s;
}

Shape Shape::capsule(const Vec3& a, const Vec3& b, double radius) {
  Shape s;
  s.kind = Kind::kCapsule;
  s.a = a;
  s.b = b;
  s.radius = radius;
  s.center = 0.5 * (a + b);
  return s;
}

bool Shape::contains(const Vec3& p) const {
  if (kind == Kind::kCapsule) return point_segment_distance2(p, a, b) <= radius * radius;
  const Vec3 d = p - center;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double lx = c * d.x() + s * d.y();
  const double ly = -s * d.x() + c * d.y();
  return std::abs(lx) <= half_extents.x() && std::abs(ly) <= half_extents.y() &&
         std::abs(d.z()) <= half_extents.z();
}

std::optional<double> Shape::intersect(const Vec3& origin, const Vec3& dir) const {
  if (kind == Kind::kBox) {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    const Vec3 d0 = origin - center;
    const Vec3 o(c * d0.x() + s * d0.y(), -s * d0.x() + c * d0.y(), d0.z());
    const Vec3 d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
    double t_enter = -std::numeric_limits<double>::infinity();
    double t_exit = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      if (std::abs(d[k]) < 1e-15) {
        if (std::abs(o[k]) > half_extents[k]) return std::nullopt;
        continue;
      }
      double t0 = (-half_extents[k] - o[k]) / d[k];
      double t1 = (half_extents[k] - o[k]) / d[k];
      if (t0 > t1) std::swap(t0, t1);
      t_enter = std::max(t_enter, t0);
      t_exit = std::min(t_exit, t1);
      if (t_enter > t_exit) return std::nullopt;
    }
    if (t_enter <= 0.0) return std::nullopt;
    return t_enter;
  }

  // Capsule entry: the earlier of the lateral cylinder hit (within the
  // segment's axial range) and the two end-sphere hits.
  std::optional<double> best;
  auto keep = [&best](std::optional<double> s) {
    if (s && (!best || *s < *best)) best = s;
  };
  if (point_segment_distance2(origin, a, b) <= radius * radius) return std::nullopt;
  const Vec3 axis = b - a;
  const double len = axis.norm();
  if (len > 1e-12) {
    const Vec3 w = axis / len;
    const Vec3 m = origin - a;
    const Vec3 d_perp = dir - dir.dot(w) * w;
    const Vec3 m_perp = m - m.dot(w) * w;
    const double qa = d_perp.squaredNorm();
    if (qa > 1e-18) {
      const double qb = d_perp.dot(m_perp);
      const double qc = m_perp.squaredNorm() - radius * radius;
      const double disc = qb * qb - qa * qc;
      if (disc >= 0.0) {
        const double s = (-qb - std::sqrt(disc)) / qa;
        const double y = (m + s * dir).dot(w);
        if (s > 0.0 && y >= 0.0 && y <= len) keep(s);
      }
    }
  }
  keep(sphere_entry(origin, dir, a, radius));
  keep(sphere_entry(origin, dir, b, radius));
  return best;
}

std::pair<Vec3, double> Shape::bounding_sphere() const {
  if (kind == Kind::kCapsule) return {0.5 * (a + b), 0.5 * (b - a).norm() + radius};
  return {center, half_extents.norm()};
}

Shape ScenePrimitive::to_shape() const {
  Shape s;
  if (kind == Kind::kBox) {
    s = Shape::box(center, size, yaw);
  } else {
    const double half_axis = std::max(0.0, 0.5 * height - radius);
    s = Shape::capsule(center - Vec3(0, 0, half_axis), center + Vec3(0, 0, half_axis), radius);
  }
  s.person_id = person_id;
  return s;
}

void ScenePrimitive::validate() const {
  if (!center.allFinite() || !std::isfinite(yaw)) throw ConfigError("scene: non-finite primitive pose");
  if (kind == Kind::kBox) {
    if (!(size.minCoeff() > 0.0)) throw ConfigError("scene: box extents must be positive");
  } else if (!(radius > 0.0) || !(height > 0.0)) {
    throw ConfigError("scene: capsule radius and height must be positive");
  }
}

bool ScriptedPerson::present(int frame) const {
  return !track.empty() && frame >= track.front().frame && frame <= track.back().frame;
}

std::optional<TrackKey> ScriptedPerson::pose(int frame) const {
  if (!present(frame)) return std::nullopt;
  const auto hi = std::lower_bound(track.begin(), track.end(), frame,
                                   [](const TrackKey& k, int f) { return k.frame < f; });
  if (hi->frame == frame) return *hi;
  const auto lo = hi - 1;
  const double w = static_cast<double>(frame - lo->frame) / static_cast<double>(hi->frame - lo->frame);
  TrackKey k;
  k.frame = frame;
  k.x = lo->x + w * (hi->x - lo->x);
  k.y = lo->y + w * (hi->y - lo->y);
  k.yaw = lo->yaw + w * (hi->yaw - lo->yaw);
  return k;
}

int ScriptedPerson::label(int frame) const {
  int current = 0;
  for (const auto& [first, label] : label_runs) {
    if (first > frame) break;
    current = label;
  }
  return current;
}

void SceneScript::validate() const {
  if (!(frame_rate > 0.0)) throw ConfigError("scene: frame_rate must be positive");
  if (frames < 0) throw ConfigError("scene: frames must be non-negative");
  for (const auto& p : primitives) p.validate();
  std::vector<int> ids;
  for (const auto& person : persons) {
    if (!(person.radius > 0.0) || !(person.height > 2.0 * person.radius)) {
      throw ConfigError("scene: person " + std::to_string(person.id) + " has bad dimensions");
    }
    for (std::size_t i = 1; i < person.track.size(); ++i) {
      if (person.track[i].frame <= person.track[i - 1].frame) {
        throw ConfigError("scene: track frames must be strictly increasing");
      }
    }
    for (std::size_t i = 0; i < person.label_runs.size(); ++i) {
      const auto& [first, label] = person.label_runs[i];
      if (label < 0 || label >= kActionCount) throw ConfigError("scene: action label out of range");
      if (i > 0 && first <= person.label_runs[i - 1].first) {
        throw ConfigError("scene: label runs must be strictly increasing");
      }
    }
    if (std::find(ids.begin(), ids.end(), person.id) != ids.end()) {
      throw ConfigError("scene: duplicate person id");
    }
    ids.push_back(person.id);
  }
}

std::pair<double, double> arm_pose_degrees(int label) {
  // (elevation, azimuth relative to the facing direction; + is the arm side)
  static constexpr std::array<std::pair<double, double>, kActionCount> kPoses{{
      {-80.0, 0.0}, {0.0, 0.0},   {75.0, 0.0},   {0.0, 90.0},
      {40.0, 0.0},  {-40.0, 0.0}, {40.0, 90.0},  {-40.0, 90.0},
      {0.0, 45.0},  {75.0, 90.0}, {20.0, -30.0}, {-20.0, 45.0},
      {60.0, 45.0}, {-60.0, 90.0}, {10.0, 135.0}, {50.0, -45.0},
  }};
  return kPoses.at(static_cast<std::size_t>(std::clamp(label, 0, kActionCount - 1)));
}

std::vector<Shape> person_shapes(int person_id, double x, double y, double yaw, double radius,
                                 double height, int label, double jitter) {
  std::vector<Shape> shapes;
  Shape body = Shape::capsule(Vec3(x, y, radius), Vec3(x, y, height - radius), radius);
  body.person_id = person_id;
  shapes.push_back(body);

  const Vec3 facing(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 side(std::sin(yaw), -std::cos(yaw), 0.0);
  const auto [elev_deg, azim_deg] = arm_pose_degrees(label);
  const double elev = elev_deg * kDeg + jitter;
  const double azim = azim_deg * kDeg;
  const Vec3 dir = std::cos(elev) * (std::cos(azim) * facing + std::sin(azim) * side) +
                   std::sin(elev) * Vec3::UnitZ();
  const Vec3 shoulder = Vec3(x, y, 0.8 * height) + (radius + kArmRadius) * side;
  Shape arm = Shape::capsule(shoulder, shoulder + 0.4 * height * dir, kArmRadius);
  arm.person_id = person_id;
  shapes.push_back(arm);
  return shapes;
}

SceneFrame SceneScript::at(int frame) const {
  SceneFrame out;
  out.floor = floor;
  for (const auto& p : primitives) {
    out.shapes.push_back(p.to_shape());
    if (p.person_id >= 0) {
      out.persons.push_back({p.person_id, Vec3(p.center.x(), p.center.y(), 0.0), p.yaw, 0});
    }
  }
  for (const auto& person : persons) {
    const auto pose = person.pose(frame);
    if (!pose) continue;
    const int label = person.label(frame);
    const double jitter = kArmJitterDeg * kDeg * unit_jitter(person.id, frame);
    const auto shapes =
        person_shapes(person.id, pose->x, pose->y, pose->yaw, person.radius, person.height, label, jitter);
    out.shapes.insert(out.shapes.end(), shapes.begin(), shapes.end());
    out.persons.push_back({person.id, Vec3(pose->x, pose->y, 0.0), pose->yaw, label});
  }
  return out;
}

namespace {

// Per-tile shape lists so each ray only tests shapes whose screen bounds
// (grown by one pixel) cover the tile.
class RayCaster {
 public:
  RayCaster(const SceneFrame& frame, const Camera& camera)
      : frame_(frame),
        k_inv_(camera.intrinsics.inverse()),
        r_t_(camera.rotation.transpose()),
        origin_(camera.center()),
        width_(camera.width),
        height_(camera.height),
        tiles_x_((camera.width + kTile - 1) / kTile) {
    const int tiles_y = (camera.height + kTile - 1) / kTile;
    tiles_.resize(static_cast<std::size_t>(tiles_x_) * tiles_y);
    for (std::size_t s = 0; s < frame.shapes.size(); ++s) {
      const ScreenRect r = screen_bounds(frame.shapes[s], camera);
      if (r.u0 > r.u1 || r.v0 > r.v1) continue;
      for (int ty = r.v0 / kTile; ty <= r.v1 / kTile; ++ty)
        for (int tx = r.u0 / kTile; tx <= r.u1 / kTile; ++tx)
          tiles_[static_cast<std::size_t>(ty) * tiles_x_ + tx].push_back(static_cast<int>(s));
    }
  }

  // Depth of the first surface along the ray through continuous pixel (u, v);
  // (pu, pv) is a pixel whose closed footprint contains (u, v).
  double nearest(double u, double v, int pu, int pv) const {
    pu = std::clamp(pu, 0, width_ - 1);
    pv = std::clamp(pv, 0, height_ - 1);
    // K^-1 (u, v, 1) has unit z, so the ray parameter is camera-space depth.
    const Vec3 dir = r_t_ * (k_inv_ * Vec3(u, v, 1.0));
    double best = std::numeric_limits<double>::infinity();
    if (frame_.floor && dir.z() < 0.0 && origin_.z() > 0.0) best = -origin_.z() / dir.z();
    for (int s : tiles_[static_cast<std::size_t>(pv / kTile) * tiles_x_ + pu / kTile]) {
      if (const auto hit = frame_.shapes[static_cast<std::size_t>(s)].intersect(origin_, dir)) {
        best = std::min(best, *hit);
      }
    }
    return best;
  }

 private:
  const SceneFrame& frame_;
  Mat3 k_inv_;
  Mat3 r_t_;
  Vec3 origin_;
  int width_;
  int height_;
  int tiles_x_;
  std::vector<std::vector<int>> tiles_;
};

// Lowers per-pixel minima with solid points given in camera coordinates.
class FootprintMinimum {
 public:
  FootprintMinimum(const Camera& camera, std::vector<double>& minima)
      : k_(camera.intrinsics), width_(camera.width), height_(camera.height), minima_(minima) {}

  Vec2 image_of(const Vec3& p) const {
    const Vec3 h = k_ * p;
    return Vec2(h.x() / h.z(), h.y() / h.z());
  }

  void lower(int u, int v, double depth) {
    if (u < 0 || v < 0 || u >= width_ || v >= height_) return;
    double& slot = minima_[static_cast<std::size_t>(v) * width_ + u];
    slot = std::min(slot, depth);
  }

  void point(const Vec3& p) {
    if (p.z() <= 0.0) return;
    const Vec2 q = image_of(p);
    lower(static_cast<int>(round_pixel(q.x())), static_cast<int>(round_pixel(q.y())), p.z());
  }

  // Boundary plane between pixel columns i and i+1 (axis 0) or rows (axis 1).
  Vec3 boundary_normal(int axis, int i) const {
    const double c = i + 0.5;
    return (k_.row(axis) - c * k_.row(2)).transpose();
  }

  // A point on the boundary plane `i` of `axis` lowers both adjacent pixels.
  void boundary_point(int axis, int i, const Vec3& p) {
    if (p.z() <= 0.0) return;
    const Vec2 q = image_of(p);
    const int other = static_cast<int>(round_pixel(axis == 0 ? q.y() : q.x()));
    if (axis == 0) {
      lower(i, other, p.z());
      lower(i + 1, other, p.z());
    } else {
      lower(other, i, p.z());
      lower(other, i + 1, p.z());
    }
  }

  // Range of boundary indices i with i + 0.5 in [lo, hi], clipped to the image.
  std::pair<int, int> boundaries(int axis, double lo, double hi) const {
    const int extent = axis == 0 ? width_ : height_;
    const int first = std::max(-1, static_cast<int>(std::ceil(lo - 0.5)));
    const int last = std::min(extent - 1, static_cast<int>(std::floor(hi - 0.5)));
    return {first, last};
  }

  // Endpoints and every boundary-plane crossing of a segment in front of the camera.
  void segment(const Vec3& p0, const Vec3& p1) {
    point(p0);
    point(p1);
    const Vec2 q0 = image_of(p0);
    const Vec2 q1 = image_of(p1);
    const Vec3 d = p1 - p0;
    for (int axis = 0; axis < 2; ++axis) {
      const auto [first, last] =
          boundaries(axis, std::min(q0[axis], q1[axis]), std::max(q0[axis], q1[axis]));
      for (int i = first; i <= last; ++i) {
        const Vec3 n = boundary_normal(axis, i);
        const double denom = n.dot(d);
        if (std::abs(denom) < 1e-15) continue;
        const double t = std::clamp(-n.dot(p0) / denom, 0.0, 1.0);
        boundary_point(axis, i, p0 + t * d);
      }
    }
  }

  // Lowest point of capsule (a, b, r) on each boundary plane it spans. On a
  // plane with unit normal n the capsule section is the union of disks centred
  // at s(t) - d(t) n with radius sqrt(r^2 - d(t)^2), d(t) = n.s(t); the depth
  // minimum over that union is a convex function of t.
  void capsule_planes(const Vec3& a, const Vec3& b, double r, double u_lo, double u_hi,
                      double v_lo, double v_hi) {
    const Vec3 e3 = Vec3::UnitZ();
    for (int axis = 0; axis < 2; ++axis) {
      const auto [first, last] = axis == 0 ? boundaries(0, u_lo, u_hi) : boundaries(1, v_lo, v_hi);
      for (int i = first; i <= last; ++i) {
        const Vec3 n = boundary_normal(axis, i).normalized();
        const Vec3 grad = e3 - e3.dot(n) * n;
        const double g = grad.norm();
        if (g < 1e-12) continue;
        const Vec3 grad_dir = grad / g;
        const double d0 = n.dot(a);
        const double d1 = n.dot(b - a);
        const double slope = (b.z() - a.z()) - d1 * e3.dot(n);
        // Feasible t: |d0 + d1 t| <= r within [0, 1].
        double t_lo = 0.0;
        double t_hi = 1.0;
        if (std::abs(d1) < 1e-15) {
          if (std::abs(d0) > r) continue;
        } else {
          double ta = (-r - d0) / d1;
          double tb = (r - d0) / d1;
          if (ta > tb) std::swap(ta, tb);
          t_lo = std::max(t_lo, ta);
          t_hi = std::min(t_hi, tb);
          if (t_lo > t_hi) continue;
        }
        double t;
        if (std::abs(d1) < 1e-15) {
          t = slope >= 0.0 ? t_lo : t_hi;
        } else {
          const double k = -slope / (g * d1);
          const double w = r * k / std::sqrt(1.0 + k * k);
          t = std::clamp((w - d0) / d1, t_lo, t_hi);
        }
        const Vec3 s = a + t * (b - a);
        const double dist = n.dot(s);
        const double rho = std::sqrt(std::max(0.0, r * r - dist * dist));
        boundary_point(axis, i, s - dist * n - rho * grad_dir);
      }
    }
  }

 private:
  Mat3 k_;
  int width_;
  int height_;
  std::vector<double>& minima_;
};

void add_shape_extrema(const Shape& shape, const Camera& camera, FootprintMinimum& fm) {
  const auto [center, radius] = shape.bounding_sphere();
  const Vec3 cc = camera.rotation * center + camera.translation;
  // Shapes reaching the camera plane are sampled by corner rays only; they sit
  // inside min_depth for any sensible rig.
  if (cc.z() - radius <= 1e-6) return;
  const auto to_cam = [&](const Vec3& p) -> Vec3 { return camera.rotation * p + camera.translation; };

  if (shape.kind == Shape::Kind::kBox) {
    const double c = std::cos(shape.yaw);
    const double s = std::sin(shape.yaw);
    std::array<Vec3, 8> v;
    for (int k = 0; k < 8; ++k) {
      const Vec3 local((k & 1 ? 1 : -1) * shape.half_extents.x(),
                       (k & 2 ? 1 : -1) * shape.half_extents.y(),
                       (k & 4 ? 1 : -1) * shape.half_extents.z());
      v[static_cast<std::size_t>(k)] = to_cam(
          shape.center + Vec3(c * local.x() - s * local.y(), s * local.x() + c * local.y(), local.z()));
    }
    for (int k = 0; k < 8; ++k)
      for (int bit : {1, 2, 4})
        if (!(k & bit)) fm.segment(v[static_cast<std::size_t>(k)], v[static_cast<std::size_t>(k | bit)]);
    return;
  }

  const Vec3 a = to_cam(shape.a);
  const Vec3 b = to_cam(shape.b);
  // Points of least depth: the segment shifted towards the camera by r.
  fm.segment(a - shape.radius * Vec3::UnitZ(), b - shape.radius * Vec3::UnitZ());
  const ScreenRect r = screen_bounds(shape, camera);
  fm.capsule_planes(a, b, shape.radius, r.u0 - 1.0, r.u1 + 1.0, r.v0 - 1.0, r.v1 + 1.0);
}

}  // namespace

DepthImage render_depth(const SceneFrame& frame, const Camera& camera, const RenderOptions& options) {
  camera.validate();
  const int w = camera.width;
  const int h = camera.height;
  const RayCaster caster(frame, camera);
  std::vector<double> minima(camera.pixel_count(), std::numeric_limits<double>::infinity());

  if (options.sampling == DepthSampling::kCenterRay) {
    parallel_for(static_cast<std::size_t>(h), options.workers, [&](std::size_t r0, std::size_t r1) {
      for (std::size_t row = r0; row < r1; ++row) {
        const int v = static_cast<int>(row);
        for (int u = 0; u < w; ++u) minima[row * w + u] = caster.nearest(u, v, u, v);
      }
    });
  } else {
    // Corner lattice: corner (i, j) sits at pixel coordinates (i - 0.5, j - 0.5).
    const std::size_t cw = static_cast<std::size_t>(w) + 1;
    std::vector<double> corners(cw * (static_cast<std::size_t>(h) + 1));
    parallel_for(static_cast<std::size_t>(h) + 1, options.workers,
                 [&](std::size_t r0, std::size_t r1) {
      for (std::size_t j = r0; j < r1; ++j) {
        for (std::size_t i = 0; i < cw; ++i) {
          corners[j * cw + i] = caster.nearest(static_cast<double>(i) - 0.5,
                                               static_cast<double>(j) - 0.5, static_cast<int>(i),
                                               static_cast<int>(j));
        }
      }
    });
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const std::size_t c = static_cast<std::size_t>(v) * cw + static_cast<std::size_t>(u);
        minima[static_cast<std::size_t>(v) * w + u] =
            std::min({corners[c], corners[c + 1], corners[c + cw], corners[c + cw + 1]});
      }
    }
    FootprintMinimum fm(camera, minima);
    for (const auto& shape : frame.shapes) add_shape_extrema(shape, camera, fm);
  }

  DepthImage image(w, h);
  parallel_for(static_cast<std::size_t>(h), options.workers, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t row = r0; row < r1; ++row) {
      std::optional<std::mt19937_64> rng;
      if (options.noise_sigma > 0.0) {
        std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                          static_cast<std::uint32_t>(options.seed >> 32),
                          static_cast<std::uint32_t>(row)};
        rng.emplace(seq);
      }
      std::normal_distribution<double> noise(0.0, options.noise_sigma);
      for (int u = 0; u < w; ++u) {
        double value = minima[row * w + static_cast<std::size_t>(u)];
        if (!std::isfinite(value) || value < camera.min_depth || value > camera.max_depth) continue;
        if (rng) value += noise(*rng);
        if (value > 0.0) image.samples[row * w + static_cast<std::size_t>(u)] = static_cast<float>(value);
      }
    }
  });
  return image;
}

VoxelGrid ground_truth_occupancy(const SceneFrame& frame, const GridSpec& spec) {
  VoxelGrid grid(spec);
  for (const auto& shape : frame.shapes) {
    const auto [center, radius] = shape.bounding_sphere();
    const Vec3 lo = spec.to_lattice(center - Vec3::Constant(radius));
    const Vec3 hi = spec.to_lattice(center + Vec3::Constant(radius));
    const int x0 = std::max(0, static_cast<int>(std::floor(lo.x())));
    const int y0 = std::max(0, static_cast<int>(std::floor(lo.y())));
    const int z0 = std::max(0, static_cast<int>(std::floor(lo.z())));
    const int x1 = std::min(spec.dims[0] - 1, static_cast<int>(std::ceil(hi.x())));
    const int y1 = std::min(spec.dims[1] - 1, static_cast<int>(std::ceil(hi.y())));
    const int z1 = std::min(spec.dims[2] - 1, static_cast<int>(std::ceil(hi.z())));
    for (int x = x0; x <= x1; ++x)
      for (int y = y0; y <= y1; ++y)
        for (int z = z0; z <= z1; ++z)
          if (shape.contains(spec.center(x, y, z))) grid.set(x, y, z);
  }
  return grid;
}

std::vector<GroundTruthDetection> ground_truth_detections(const SceneFrame& frame,
                                                          const GridSpec& spec) {
  std::vector<GroundTruthDetection> out;
  for (const auto& person : frame.persons) {
    if (const auto col = spec.column_of(person.position)) {
      out.push_back({person.id, (*col)[0], (*col)[1]});
    }
  }
  return out;
}

SceneScript parse_scene(const std::string& text) {
  SceneScript script;
  try {
    const auto doc = nlohmann::json::parse(text);
    script.frame_rate = doc.value("frame_rate", 15.0);
    script.frames = doc.value("frames", 1);
    script.floor = doc.value("floor", true);
    for (const auto& item : doc.value("primitives", nlohmann::json::array())) {
      ScenePrimitive p;
      const std::string kind = item.at("kind").get<std::string>();
      p.center = vec3_from(item.at("center"), "center");
      p.yaw = item.value("yaw", 0.0);
      p.person_id = item.value("person", -1);
      if (kind == "box") {
        p.kind = ScenePrimitive::Kind::kBox;
        p.size = vec3_from(item.at("size"), "size");
      } else if (kind == "vertical_capsule") {
        p.kind = ScenePrimitive::Kind::kVerticalCapsule;
        p.radius = item.at("radius").get<double>();
        p.height = item.at("height").get<double>();
      } else {
        throw ConfigError("scene: unknown primitive kind '" + kind + "'");
      }
      script.primitives.push_back(p);
    }
    for (const auto& item : doc.value("persons", nlohmann::json::array())) {
      ScriptedPerson person;
      person.id = item.at("id").get<int>();
      person.radius = item.value("radius", 0.2);
      person.height = item.value("height", 1.7);
      for (const auto& key : item.at("track")) {
        if (!key.is_array() || key.size() != 4) {
          throw ConfigError("scene: track entries are [frame, x, y, yaw]");
        }
        person.track.push_back(
            {key[0].get<int>(), key[1].get<double>(), key[2].get<double>(), key[3].get<double>()});
      }
      for (const auto& run : item.value("labels", nlohmann::json::array())) {
        if (!run.is_array() || run.size() != 2) {
          throw ConfigError("scene: label entries are [first_frame, label]");
        }
        person.label_runs.emplace_back(run[0].get<int>(), run[1].get<int>());
      }
      script.persons.push_back(std::move(person));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene: ") + e.what());
  }
  script.validate();
  return script;
}

SceneScript load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scene: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene(buf.str());
}

std::string format_scene(const SceneScript& script) {
  nlohmann::json doc;
  doc["frame_rate"] = script.frame_rate;
  doc["frames"] = script.frames;
  doc["floor"] = script.floor;
  doc["primitives"] = nlohmann::json::array();
  for (const auto& p : script.primitives) {
    nlohmann::json item{{"center", {p.center.x(), p.center.y(), p.center.z()}}, {"yaw", p.yaw}};
    if (p.kind == ScenePrimitive::Kind::kBox) {
      item["kind"] = "box";
      item["size"] = {p.size.x(), p.size.y(), p.size.z()};
    } else {
      item["kind"] = "vertical_capsule";
      item["radius"] = p.radius;
      item["height"] = p.height;
    }
    if (p.person_id >= 0) item["person"] = p.person_id;
    doc["primitives"].push_back(item);
  }
  doc["persons"] = nlohmann::json::array();
  for (const auto& person : script.persons) {
    nlohmann::json item{{"id", person.id}, {"radius", person.radius}, {"height", person.height}};
    item["track"] = nlohmann::json::array();
    for (const auto& k : person.track) item["track"].push_back({k.frame, k.x, k.y, k.yaw});
    item["labels"] = nlohmann::json::array();
    for (const auto& [first, label] : person.label_runs) item["labels"].push_back({first, label});
    doc["persons"].push_back(item);
  }
  return doc.dump(2) + "\n";
}

void save_scene(const std::filesystem::path& path, const SceneScript& script) {
  std::ofstream out(path);
  if (!out) throw ConfigError("scene: cannot write " + path.string());
  out << format_scene(script);
}

std::vector<ScenePrimitive> random_clutter(std::uint64_t seed, int count, double half_extent) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-half_extent, half_extent);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ScenePrimitive> out;
  for (int i = 0; i < count; ++i) {
    ScenePrimitive p;
    if (unit(rng) < 0.7) {
      p.kind = ScenePrimitive::Kind::kBox;
      p.size = Vec3(0.15 + 1.0 * unit(rng), 0.15 + 1.0 * unit(rng), 0.2 + 1.3 * unit(rng));
      p.center = Vec3(pos(rng), pos(rng), 0.5 * p.size.z());
      p.yaw = std::numbers::pi * unit(rng);
      // Occasionally a floating shelf or table top.
      if (unit(rng) < 0.2) p.center.z() += 0.3 + 0.8 * unit(rng);
    } else {
      p.kind = ScenePrimitive::Kind::kVerticalCapsule;
      p.radius = 0.08 + 0.3 * unit(rng);
      p.height = 2.0 * p.radius + 0.1 + 1.4 * unit(rng);
      p.center = Vec3(pos(rng), pos(rng), 0.5 * p.height);
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace action4d
