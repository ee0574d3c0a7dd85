// Minimal fork-join helpers. Reductions go through a fixed block partition
// and a fixed combine tree so results are bit-identical for every thread
// count.
#ifndef PURELU_THREADS_HPP
#define PURELU_THREADS_HPP

#include <cstddef>
#include <functional>
#include <thread>
#include <utility>
#include <vector>

namespace purelu {

/// Run fn(begin, end) over a contiguous split of [0, n) across `threads`
/// workers. fn must only touch disjoint state per index.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    if (n) fn(0, n);
    return;
  }
  const unsigned k = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(k - 1);
  const std::size_t chunk = (n + k - 1) / k;
  for (unsigned w = 1; w < k; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(fn, lo, hi);
  }
  fn(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

inline constexpr std::size_t kReduceBlock = 1024;

/// Deterministic reduction: items [0, n) are accumulated serially within
/// fixed blocks of kReduceBlock, then block partials are combined along a
/// pairwise tree that depends only on n. Threads only decide which worker
/// owns which block.
template <typename Acc, typename MakeZero, typename ItemFn, typename CombineFn>
Acc blocked_reduce(std::size_t n, unsigned threads, MakeZero make_zero,
                   ItemFn item, CombineFn combine) {
  const std::size_t nblocks = n ? (n + kReduceBlock - 1) / kReduceBlock : 1;
  std::vector<Acc> partials;
  partials.reserve(nblocks);
  for (std::size_t b = 0; b < nblocks; ++b) partials.push_back(make_zero());
  parallel_for(nblocks, threads, [&](std::size_t blo, std::size_t bhi) {
    for (std::size_t b = blo; b < bhi; ++b) {
      const std::size_t lo = b * kReduceBlock;
      const std::size_t hi = std::min(n, lo + kReduceBlock);
      for (std::size_t i = lo; i < hi; ++i) item(partials[b], i);
    }
  });
  // Serial pairwise combine; tree shape is a function of nblocks only.
  std::function<Acc(std::size_t, std::size_t)> tree =
      [&](std::size_t lo, std::size_t hi) -> Acc {
    if (hi - lo == 1) return std::move(partials[lo]);
    const std::size_t mid = lo + (hi - lo) / 2;
    Acc left = tree(lo, mid);
    Acc right = tree(mid, hi);
    combine(left, std::move(right));
    return left;
  };
  return tree(0, nblocks);
}

}  // namespace purelu

#endif  // PURELU_THREADS_HPP
