#include "action4d/detection.hpp"

#include <algorithm>
#include <cmath>

#include "action4d/error.hpp"

namespace action4d {

HeightMap topdown_envelope(const VoxelGrid& grid) {
  const auto& d = grid.spec.dims;
  HeightMap map(d[0], d[1]);
  const std::uint8_t* occ = grid.occupancy.data();
  for (int m = 0; m < d[0]; ++m) {
    for (int n = 0; n < d[1]; ++n) {
      const std::uint8_t* column = occ + grid.spec.index(m, n, 0);
      for (int k = d[2] - 1; k > 0; --k) {
        if (column[k]) {
          map.at(m, n) = k;
          break;
        }
      }
    }
  }
  return map;
}

HeightMap smooth(const HeightMap& map, double sigma) {
  if (!(sigma >= 0.0)) throw ContractViolation("smooth: sigma must be >= 0");
  if (sigma == 0.0 || map.values.empty()) return map;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  HeightMap along_n(map.nx, map.ny);
  for (int m = 0; m < map.nx; ++m) {
    for (int n = 0; n < map.ny; ++n) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * map.at(m, std::clamp(n + i, 0, map.ny - 1));
      }
      along_n.at(m, n) = acc;
    }
  }
  HeightMap out(map.nx, map.ny);
  for (int m = 0; m < map.nx; ++m) {
    for (int n = 0; n < map.ny; ++n) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * along_n.at(std::clamp(m + i, 0, map.nx - 1), n);
      }
      out.at(m, n) = acc;
    }
  }
  return out;
}

std::vector<Candidate> detect_candidates(const HeightMap& map, int nms_radius, double min_height) {
  if (nms_radius < 1) throw ContractViolation("detect_candidates: nms_radius must be >= 1");
  std::vector<Candidate> found;
  for (int m = 0; m < map.nx; ++m) {
    for (int n = 0; n < map.ny; ++n) {
      const double v = map.at(m, n);
      if (!(v >= min_height)) continue;
      bool peak = true;
      bool above_some = false;
      for (int a = std::max(0, m - nms_radius); peak && a <= std::min(map.nx - 1, m + nms_radius); ++a) {
        for (int b = std::max(0, n - nms_radius); b <= std::min(map.ny - 1, n + nms_radius); ++b) {
          if (a == m && b == n) continue;
          const double q = map.at(a, b);
          if (q > v || (q == v && std::pair(a, b) < std::pair(m, n))) {
            peak = false;
            break;
          }
          above_some = above_some || q < v;
        }
      }
      if (peak && above_some) found.push_back({m, n, v, 0.0});
    }
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const Candidate& x, const Candidate& y) { return x.peak_height > y.peak_height; });
  return found;
}

std::vector<Candidate> detect(const VoxelGrid& grid, const DetectionParams& params) {
  return detect_candidates(smooth(topdown_envelope(grid), params.sigma), params.nms_radius,
                           params.min_height);
}

}  // namespace action4d
