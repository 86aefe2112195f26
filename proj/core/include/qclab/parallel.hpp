#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace qclab {

/// Runs fn(i) for i in [begin, end) on up to `threads` workers, splitting the
/// range into contiguous chunks and joining before returning. Workers write
/// to disjoint slots only, so results are bitwise independent of the thread
/// count; with threads <= 1 the loop runs inline.
template <typename Fn>
void parallel_for(int begin, int end, int threads, Fn&& fn) {
  const int count = end - begin;
  if (count <= 0) return;
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = begin + t * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& worker : pool) worker.join();
}

}  // namespace qclab
