#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace brwx {

// Deterministic replica fan-out: worker w takes indices w, w+T, w+2T, ...
// Results must be written to per-index slots; any reduction happens after
// the join, in index order, so outputs are identical for every thread count.
inline void parallel_for(std::uint64_t count, int threads, const std::function<void(std::uint64_t)>& fn) {
  if (threads <= 1) {
    for (std::uint64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&fn, w, threads, count]() {
      for (std::uint64_t i = static_cast<std::uint64_t>(w); i < count; i += static_cast<std::uint64_t>(threads))
        fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace brwx
