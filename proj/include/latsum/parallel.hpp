#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#include "latsum/types.hpp"

namespace latsum {

/// Runs fn(begin, end) over disjoint chunks of [0, n) on up to `threads`
/// workers.  Chunk boundaries depend only on (n, threads), so writes into
/// disjoint ranges stay deterministic.
template <typename Fn>
void parallel_for_chunks(Index n, int threads, Fn&& fn) {
  threads = std::max(1, threads);
  const Index chunks = std::min<Index>(threads, std::max<Index>(n, 1));
  if (chunks <= 1) {
    fn(Index(0), n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(size_t(chunks));
  const Index step = (n + chunks - 1) / chunks;
  for (Index c = 0; c < chunks; ++c) {
    const Index lo = c * step;
    const Index hi = std::min(n, lo + step);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace latsum
