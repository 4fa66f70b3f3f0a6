#include "action4d/carving.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "action4d/error.hpp"
#include "action4d/parallel.hpp"

namespace action4d {
namespace {

constexpr std::size_t kCarveBlock = 4096;
constexpr char kGridMagic[4] = {'C', '4', 'D', 'V'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

}  // namespace

void GridSpec::validate() const {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw ConfigError("grid: voxel_size must be positive");
  }
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) throw ConfigError("grid: dims must be >= 1");
  if (!origin.allFinite()) throw ConfigError("grid: origin must be finite");
}

std::optional<std::array<int, 3>> GridSpec::voxel_of(const Vec3& world) const {
  const Vec3 l = to_lattice(world);
  const std::array<int, 3> v{static_cast<int>(std::floor(l.x() + 0.5)),
                             static_cast<int>(std::floor(l.y() + 0.5)),
                             static_cast<int>(std::floor(l.z() + 0.5))};
  if (!contains(v[0], v[1], v[2])) return std::nullopt;
  return v;
}

std::optional<std::array<int, 2>> GridSpec::column_of(const Vec3& world) const {
  const Vec3 l = to_lattice(world);
  const int m = static_cast<int>(std::floor(l.x() + 0.5));
  const int n = static_cast<int>(std::floor(l.y() + 0.5));
  if (m < 0 || n < 0 || m >= dims[0] || n >= dims[1]) return std::nullopt;
  return std::array<int, 2>{m, n};
}

GridSpec GridSpec::full_default() { return centered(0.0, 0.0, 0.05, {201, 201, 85}); }

GridSpec GridSpec::desk_profile() { return centered(0.0, 0.0, 0.10, {101, 101, 43}); }

GridSpec GridSpec::centered(double cx, double cy, double voxel_size, std::array<int, 3> dims) {
  GridSpec spec;
  spec.voxel_size = voxel_size;
  spec.dims = dims;
  spec.origin = Vec3(cx - 0.5 * (dims[0] - 1) * voxel_size, cy - 0.5 * (dims[1] - 1) * voxel_size,
                     0.0);
  return spec;
}

std::size_t VoxelGrid::count() const {
  return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
}

PointCloud depth_to_cloud(const DepthImage& depth, const Camera& camera) {
  PointCloud cloud;
  const Mat3 k_inv = camera.intrinsics.inverse();
  const Mat3 r_t = camera.rotation.transpose();
  const Vec3 cam_center = camera.center();
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const float d = depth.at(u, v);
      if (!DepthImage::is_valid(d)) continue;
      const Vec3 ray = k_inv * Vec3(u, v, 1.0);
      cloud.points.push_back(r_t * (ray * (static_cast<double>(d) / ray.z())) + cam_center);
    }
  }
  return cloud;
}

CarvePlan::CarvePlan(const GridSpec& spec, std::vector<Camera> cameras, int workers)
    : spec_(spec), cameras_(std::move(cameras)) {
  spec_.validate();
  for (const auto& cam : cameras_) cam.validate();
  const std::size_t n = spec_.voxel_count();
  const int ly = spec_.dims[1];
  const int lz = spec_.dims[2];
  pixel_.resize(cameras_.size());
  depth_.resize(cameras_.size());
  for (std::size_t j = 0; j < cameras_.size(); ++j) {
    pixel_[j].assign(n, 0);
    depth_[j].assign(n, std::numeric_limits<float>::infinity());
    const Camera& cam = cameras_[j];
    auto& pix = pixel_[j];
    auto& dep = depth_[j];
    // Parallel over x slabs; each voxel's entry is written by exactly one worker.
    parallel_for(static_cast<std::size_t>(spec_.dims[0]), workers,
                 [&](std::size_t x_begin, std::size_t x_end) {
                   for (std::size_t x = x_begin; x < x_end; ++x) {
                     for (int y = 0; y < ly; ++y) {
                       for (int z = 0; z < lz; ++z) {
                         const int xi = static_cast<int>(x);
                         const Projection p = project(spec_.center(xi, y, z), cam);
                         const auto idx = pixel_index(p, cam);
                         if (!idx) continue;
                         const std::size_t i = spec_.index(xi, y, z);
                         pix[i] = static_cast<std::uint32_t>(*idx);
                         dep[i] = static_cast<float>(p.cam_depth);
                       }
                     }
                   }
                 });
  }
}

VoxelGrid CarvePlan::carve(std::span<const DepthImage> depths, int workers) const {
  if (depths.size() != cameras_.size()) {
    throw ConfigError("carve: " + std::to_string(depths.size()) + " depth images for " +
                      std::to_string(cameras_.size()) + " cameras");
  }
  for (std::size_t j = 0; j < depths.size(); ++j) {
    if (depths[j].width != cameras_[j].width || depths[j].height != cameras_[j].height ||
        depths[j].samples.size() != cameras_[j].pixel_count()) {
      throw ConfigError("carve: depth image size does not match camera " + cameras_[j].name);
    }
  }
  VoxelGrid grid(spec_, true);
  const std::size_t n = spec_.voxel_count();
  const std::size_t blocks = (n + kCarveBlock - 1) / kCarveBlock;
  std::uint8_t* occ = grid.occupancy.data();
  parallel_for(blocks, workers, [&](std::size_t b_begin, std::size_t b_end) {
    for (std::size_t b = b_begin; b < b_end; ++b) {
      const std::size_t begin = b * kCarveBlock;
      const std::size_t len = std::min(kCarveBlock, n - begin);
      for (std::size_t j = 0; j < cameras_.size(); ++j) {
        const float* image = depths[j].samples.data();
        const std::uint32_t* pix = pixel_[j].data() + begin;
        const float* cam_depth = depth_[j].data() + begin;
        std::uint8_t* out = occ + begin;
        // Invalid samples are 0 and every in-view depth is positive, so they
        // never carve; out-of-view voxels hold +inf.
        for (std::size_t i = 0; i < len; ++i) {
          out[i] &= static_cast<std::uint8_t>(cam_depth[i] >= image[pix[i]]);
        }
      }
    }
  });
  return grid;
}

VoxelGrid carve(const GridSpec& spec, std::span<const Camera> cameras,
                std::span<const DepthImage> depths, int workers) {
  if (cameras.size() != depths.size()) {
    throw ConfigError("carve: camera and depth image counts differ");
  }
  const CarvePlan plan(spec, std::vector<Camera>(cameras.begin(), cameras.end()), workers);
  return plan.carve(depths, workers);
}

VoxelGrid apply_topdown_mask(const VoxelGrid& grid, const PointCloud& cloud, int dilation) {
  return apply_topdown_mask(grid, std::span<const PointCloud>(&cloud, 1), dilation);
}

VoxelGrid apply_topdown_mask(const VoxelGrid& grid, std::span<const PointCloud> clouds,
                             int dilation) {
  const GridSpec& spec = grid.spec;
  const int lx = spec.dims[0];
  const int ly = spec.dims[1];
  const int lz = spec.dims[2];
  std::vector<std::uint8_t> support(static_cast<std::size_t>(lx) * ly, 0);
  const int r = std::max(dilation, 0);
  for (const auto& cloud : clouds) {
    for (const auto& p : cloud.points) {
      const auto col = spec.column_of(p);
      if (!col) continue;
      for (int m = std::max(0, (*col)[0] - r); m <= std::min(lx - 1, (*col)[0] + r); ++m)
        for (int n = std::max(0, (*col)[1] - r); n <= std::min(ly - 1, (*col)[1] + r); ++n)
          support[static_cast<std::size_t>(m) * ly + n] = 1;
    }
  }
  VoxelGrid out = grid;
  for (int m = 0; m < lx; ++m) {
    for (int n = 0; n < ly; ++n) {
      if (support[static_cast<std::size_t>(m) * ly + n]) continue;
      std::fill_n(out.occupancy.begin() + static_cast<std::ptrdiff_t>(spec.index(m, n, 0)), lz,
                  std::uint8_t{0});
    }
  }
  return out;
}

VoxelGrid inject_points(VoxelGrid grid, std::span<const PointCloud> clouds) {
  for (const auto& cloud : clouds) {
    for (const auto& p : cloud.points) {
      if (const auto v = grid.spec.voxel_of(p)) grid.set((*v)[0], (*v)[1], (*v)[2]);
    }
  }
  return grid;
}

std::size_t PersonVolume::count() const {
  return static_cast<std::size_t>(std::count(voxels.begin(), voxels.end(), std::uint8_t{1}));
}

PersonVolume crop_person(const VoxelGrid& grid, int m, int n) {
  PersonVolume vol;
  const auto& dims = grid.spec.dims;
  const int z_end = std::min(PersonVolume::kSizeZ, dims[2]);
  for (int a = 0; a < PersonVolume::kSizeX; ++a) {
    const int x = m - PersonVolume::kHalfX + a;
    if (x < 0 || x >= dims[0]) continue;
    for (int b = 0; b < PersonVolume::kSizeY; ++b) {
      const int y = n - PersonVolume::kHalfY + b;
      if (y < 0 || y >= dims[1]) continue;
      std::memcpy(&vol.voxels[PersonVolume::index(a, b, 0)],
                  &grid.occupancy[grid.spec.index(x, y, 0)], static_cast<std::size_t>(z_end));
    }
  }
  return vol;
}

double volume_iou(const PersonVolume& a, const PersonVolume& b) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < PersonVolume::kVoxels; ++i) {
    inter += static_cast<std::size_t>(a.voxels[i] & b.voxels[i]);
    uni += static_cast<std::size_t>(a.voxels[i] | b.voxels[i]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::uint8_t> encode_grid(const VoxelGrid& grid) {
  std::vector<std::uint8_t> out(kGridMagic, kGridMagic + 4);
  for (int d : grid.spec.dims) put_u32(out, static_cast<std::uint32_t>(d));
  put_u32(out, 0);
  const std::size_t n = grid.occupancy.size();
  const std::size_t header = out.size();
  out.resize(header + (n + 7) / 8, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (grid.occupancy[i]) out[header + i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  return out;
}

VoxelGrid decode_grid(std::span<const std::uint8_t> bytes, GridSpec layout) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kGridMagic, 4) != 0) {
    throw DataError("grid file: bad magic or truncated header");
  }
  for (int a = 0; a < 3; ++a) {
    const std::uint32_t d = get_u32(bytes, 4 + 4 * static_cast<std::size_t>(a));
    if (d == 0 || d > (1u << 20)) throw DataError("grid file: implausible dimension");
    layout.dims[static_cast<std::size_t>(a)] = static_cast<int>(d);
  }
  VoxelGrid grid(layout);
  const std::size_t n = grid.occupancy.size();
  if (bytes.size() != 20 + (n + 7) / 8) throw DataError("grid file: payload size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    grid.occupancy[i] = static_cast<std::uint8_t>((bytes[20 + i / 8] >> (i % 8)) & 1u);
  }
  return grid;
}

void write_grid_file(const std::filesystem::path& path, const VoxelGrid& grid) {
  const auto bytes = encode_grid(grid);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write grid file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

VoxelGrid read_grid_file(const std::filesystem::path& path, GridSpec layout) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing grid file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_grid(bytes, layout);
}

}  // namespace action4d
