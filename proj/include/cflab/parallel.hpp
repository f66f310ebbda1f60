#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace cflab {

/// Worker count: the explicit request, else CF_LAB_THREADS, else the
/// hardware concurrency.
inline unsigned worker_count(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CF_LAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) on up to worker_count(threads) threads.
/// Each index is visited exactly once; the first exception is rethrown.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(worker_count(threads), std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace cflab
