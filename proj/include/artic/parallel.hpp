#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace artic {

/// Number of workers to use when the caller passes 0.
inline int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each.
/// Callers must write only to per-index outputs so results do not depend on
/// the worker count.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 0) workers = default_workers();
  const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  if (chunks <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(chunks - 1);
  const std::size_t step = (n + chunks - 1) / chunks;
  for (std::size_t c = 1; c < chunks; ++c) {
    const std::size_t b = c * step, e = std::min(n, b + step);
    if (b < e) threads.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(n, step));
  for (auto& t : threads) t.join();
}

}  // namespace artic
