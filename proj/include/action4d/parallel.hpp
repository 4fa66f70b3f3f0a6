#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace action4d {

/// Splits [0, count) into `workers` contiguous ranges and runs fn(begin, end)
/// on each. The partition depends only on count and workers, so any kernel
/// that writes disjoint outputs per index is deterministic.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const std::size_t n_workers =
      std::clamp<std::size_t>(workers > 0 ? static_cast<std::size_t>(workers) : 1, 1,
                              std::max<std::size_t>(count, 1));
  if (n_workers == 1) {
    fn(std::size_t{0}, count);
    return;
  }
  const std::size_t chunk = (count + n_workers - 1) / n_workers;
  std::vector<std::jthread> threads;
  threads.reserve(n_workers - 1);
  for (std::size_t w = 1; w < n_workers; ++w) {
    const std::size_t begin = std::min(count, w * chunk);
    const std::size_t end = std::min(count, begin + chunk);
    if (begin < end) threads.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(std::size_t{0}, std::min(count, chunk));
}

}  // namespace action4d
