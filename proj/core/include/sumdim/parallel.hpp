#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace sumdim {

// Runs f(i) for i in [0, n). Each item writes only its own output slot, so
// results are identical for every thread count.
template <typename F>
void parallel_for(size_t n, int threads, F&& f) {
  if (threads <= 1 || n < 2) {
    for (size_t i = 0; i < n; ++i) f(i);
    return;
  }
  const size_t workers = std::min<size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < n; i += workers) f(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace sumdim
