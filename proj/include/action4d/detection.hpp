#pragma once

#include <vector>

#include "action4d/carving.hpp"

namespace action4d {

/// Per-column height in voxel z units, indexed value(m, n) = values[m * ny + n].
struct HeightMap {
  int nx = 0;
  int ny = 0;
  std::vector<double> values;

  HeightMap() = default;
  HeightMap(int x, int y, double fill = 0.0)
      : nx(x), ny(y), values(static_cast<std::size_t>(x) * static_cast<std::size_t>(y), fill) {}

  double at(int m, int n) const { return values[static_cast<std::size_t>(m) * ny + n]; }
  double& at(int m, int n) { return values[static_cast<std::size_t>(m) * ny + n]; }
};

struct Candidate {
  int m = 0;
  int n = 0;
  double peak_height = 0.0;
  double person_prob = 0.0;
};

struct DetectionParams {
  double sigma = 2.0;
  int nms_radius = 5;
  double min_height = 16.0;
};

/// Highest occupied z index per column, 0 for empty columns.
HeightMap topdown_envelope(const VoxelGrid& grid);

/// Separable Gaussian blur, kernel radius ceil(3 sigma), replicated borders.
HeightMap smooth(const HeightMap& map, double sigma);

/// Cells that beat every other cell within Chebyshev distance `nms_radius`
/// (equal values go to the lexicographically smallest cell), are strictly
/// above at least one of them, and reach `min_height`. Highest first.
std::vector<Candidate> detect_candidates(const HeightMap& map, int nms_radius, double min_height);

/// envelope -> smooth -> detect.
std::vector<Candidate> detect(const VoxelGrid& grid, const DetectionParams& params);

}  // namespace action4d
