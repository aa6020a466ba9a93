#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cooccur {

/// Runs fn(begin, end) over a block partition of [0, n) using the requested
/// number of threads (<= 1 means inline). Workers write only to disjoint
/// per-index slots; any reduction feeding a reported number must happen
/// afterwards in index order so results do not depend on the thread count.
template <typename Fn>
void parallel_blocks(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  const std::size_t max_workers =
      threads <= 1 ? 1 : std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (max_workers == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + max_workers - 1) / max_workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(max_workers);
  pool.reserve(max_workers);
  for (std::size_t w = 0; w < max_workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, &errors, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace cooccur
