#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace enesy {

// Worker count: ENESY_THREADS if set, else hardware concurrency; `requested`
// (when nonzero) is capped by both.
inline std::size_t worker_count(std::size_t requested = 0) {
  std::size_t available = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ENESY_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) available = std::min<std::size_t>(available, static_cast<std::size_t>(cap));
  }
  return requested == 0 ? available : std::min(requested, available);
}

// Runs fn(i) for i in [0, n). Each index is visited exactly once; results
// must be written to per-index slots so the outcome is order independent.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& worker : pool) worker.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace enesy
