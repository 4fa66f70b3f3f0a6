#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace action4d {

/// Dense row-major float tensor of rank 1 to 5.
struct Tensor {
  std::vector<int> dims;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> extents, float fill = 0.0f)
      : dims(std::move(extents)), data(element_count(dims), fill) {}
  Tensor(std::vector<int> extents, std::vector<float> values);

  static std::size_t element_count(const std::vector<int>& extents) {
    return std::accumulate(extents.begin(), extents.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  int rank() const { return static_cast<int>(dims.size()); }
  std::size_t size() const { return data.size(); }
  float& operator[](std::size_t i) { return data[i]; }
  float operator[](std::size_t i) const { return data[i]; }
  bool operator==(const Tensor&) const = default;
};

}  // namespace action4d
