#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "action4d/geometry.hpp"

namespace action4d {

/// Axis-aligned voxel lattice. `origin` is the centre of voxel (0, 0, 0) and
/// z index 0 lies on the ground plane. Linear order is x-major, then y, then z.
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  double voxel_size = 0.05;
  std::array<int, 3> dims{201, 201, 85};

  void validate() const;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * static_cast<std::size_t>(dims[1]) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(dims[2]) +
           static_cast<std::size_t>(z);
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
  }
  Vec3 center(int x, int y, int z) const {
    return origin + voxel_size * Vec3(x, y, z);
  }
  /// Continuous lattice coordinates of a world point (voxel centres are integers).
  Vec3 to_lattice(const Vec3& world) const { return (world - origin) / voxel_size; }
  /// Voxel whose cell contains `world`, if inside the grid.
  std::optional<std::array<int, 3>> voxel_of(const Vec3& world) const;
  /// x-y column whose footprint contains `world`, if inside the grid.
  std::optional<std::array<int, 2>> column_of(const Vec3& world) const;

  /// 201 x 201 x 85 at 5 cm, centred on the world origin in x-y.
  static GridSpec full_default();
  /// 101 x 101 x 43 at 10 cm for CI-scale runs.
  static GridSpec desk_profile();
  /// A grid with the given dims and voxel size centred on (cx, cy) at floor level.
  static GridSpec centered(double cx, double cy, double voxel_size, std::array<int, 3> dims);
};

/// Dense occupancy volume, one byte (0 or 1) per voxel.
struct VoxelGrid {
  GridSpec spec;
  std::vector<std::uint8_t> occupancy;

  VoxelGrid() = default;
  explicit VoxelGrid(const GridSpec& s, bool filled = false)
      : spec(s), occupancy(s.voxel_count(), filled ? 1 : 0) {}

  bool at(int x, int y, int z) const { return occupancy[spec.index(x, y, z)] != 0; }
  void set(int x, int y, int z, bool value = true) {
    occupancy[spec.index(x, y, z)] = value ? 1 : 0;
  }
  std::size_t count() const;
  bool operator==(const VoxelGrid& other) const {
    return spec.dims == other.spec.dims && occupancy == other.occupancy;
  }
};

struct PointCloud {
  std::vector<Vec3> points;
};

/// Back-projects every valid sample of `depth` into world coordinates.
PointCloud depth_to_cloud(const DepthImage& depth, const Camera& camera);

/// Precomputed per-voxel projection tables for a fixed grid and camera rig:
/// one pixel index and one camera-space depth per voxel and camera. Voxels
/// outside a camera's view store an infinite depth, so the carving loop is a
/// branch-free gather and compare.
class CarvePlan {
 public:
  CarvePlan(const GridSpec& spec, std::vector<Camera> cameras, int workers = 1);

  const GridSpec& spec() const { return spec_; }
  const std::vector<Camera>& cameras() const { return cameras_; }

  /// Per-voxel AND over cameras of (out of view | invalid sample | depth >= sample).
  /// Throws ConfigError when the depth list or an image size disagrees with the rig.
  VoxelGrid carve(std::span<const DepthImage> depths, int workers = 1) const;

 private:
  GridSpec spec_;
  std::vector<Camera> cameras_;
  std::vector<std::vector<std::uint32_t>> pixel_;  // [camera][voxel]
  std::vector<std::vector<float>> depth_;          // [camera][voxel]
};

/// One-shot carve; builds a CarvePlan internally. No cameras leaves every voxel occupied.
VoxelGrid carve(const GridSpec& spec, std::span<const Camera> cameras,
                std::span<const DepthImage> depths, int workers = 1);

/// Keeps only columns whose x-y footprint (grown by `dilation` columns in
/// Chebyshev distance) contains at least one cloud point.
VoxelGrid apply_topdown_mask(const VoxelGrid& grid, const PointCloud& cloud, int dilation = 0);
VoxelGrid apply_topdown_mask(const VoxelGrid& grid, std::span<const PointCloud> clouds,
                             int dilation = 0);

/// Marks every voxel that contains at least one point. Never clears a voxel.
VoxelGrid inject_points(VoxelGrid grid, std::span<const PointCloud> clouds);

/// Person-centred 31 x 31 x 43 occupancy crop.
struct PersonVolume {
  static constexpr int kSizeX = 31;
  static constexpr int kSizeY = 31;
  static constexpr int kSizeZ = 43;
  static constexpr int kHalfX = kSizeX / 2;
  static constexpr int kHalfY = kSizeY / 2;
  static constexpr std::size_t kVoxels =
      static_cast<std::size_t>(kSizeX) * kSizeY * kSizeZ;

  std::vector<std::uint8_t> voxels = std::vector<std::uint8_t>(kVoxels, 0);

  static std::size_t index(int a, int b, int c) {
    return (static_cast<std::size_t>(a) * kSizeY + static_cast<std::size_t>(b)) * kSizeZ +
           static_cast<std::size_t>(c);
  }
  bool at(int a, int b, int c) const { return voxels[index(a, b, c)] != 0; }
  std::size_t count() const;
  bool operator==(const PersonVolume&) const = default;
};

/// Crop centred on column (m, n), from the ground up. Reads outside the grid are empty.
PersonVolume crop_person(const VoxelGrid& grid, int m, int n);

/// Intersection-over-union of two crops; two empty crops count as identical.
double volume_iou(const PersonVolume& a, const PersonVolume& b);

/// Occupancy grid file: "C4DV", three u32 dims, a reserved u32, then the
/// occupancy bit-packed LSB-first in x-major order, all little-endian.
std::vector<std::uint8_t> encode_grid(const VoxelGrid& grid);
/// Dims come from the file; origin and voxel size from `layout`.
VoxelGrid decode_grid(std::span<const std::uint8_t> bytes, GridSpec layout = {});
void write_grid_file(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_grid_file(const std::filesystem::path& path, GridSpec layout = {});

}  // namespace action4d
