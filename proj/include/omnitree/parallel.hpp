#ifndef OMNITREE_PARALLEL_HPP
#define OMNITREE_PARALLEL_HPP

// Deterministic work partitioning: results must not depend on the thread
// count, so callers hand out index ranges and write to preallocated slots.

#include <cstddef>
#include <thread>
#include <vector>

namespace omnitree {

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
/// processed exactly once; fn must write only to its own slot.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(std::size_t(threads), count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&fn, w, workers, count] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace omnitree

#endif  // OMNITREE_PARALLEL_HPP
