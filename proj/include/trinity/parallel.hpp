#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace trinity {

// Runs fn(i) for every i in [0, n) on up to `workers` threads. Work items
// must be independent; callers that aggregate results do so by index
// afterwards so the outcome never depends on scheduling.
inline void parallel_for_indexed(size_t n, size_t workers,
                                 const std::function<void(size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  workers = std::min(workers, n);
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Worker budget from TRINITY_THREADS; defaults to 1, never 0.
inline size_t worker_count_from_env() {
  const char* raw = std::getenv("TRINITY_THREADS");
  if (!raw) return 1;
  const long v = std::strtol(raw, nullptr, 10);
  if (v < 1) return 1;
  return static_cast<size_t>(v);
}

}  // namespace trinity
