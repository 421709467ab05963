#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace pacnet {

// Worker count used by parallel_for. 0 = hardware concurrency.
// The contract everywhere in this library: each index is processed by exactly
// one worker and all reductions happen in a fixed per-index order, so results
// are bit-identical for any worker count.
inline int& thread_count() {
  static int n = 0;
  return n;
}

inline int resolved_thread_count() {
  int n = thread_count();
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, n);
}

template <typename Fn>
void parallel_for(std::int64_t begin, std::int64_t end, Fn&& fn) {
  const std::int64_t count = end - begin;
  if (count <= 0) return;
  const int workers =
      static_cast<int>(std::min<std::int64_t>(resolved_thread_count(), count));
  if (workers == 1) {
    for (std::int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::int64_t chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = begin + w * chunk;
    const std::int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace pacnet
