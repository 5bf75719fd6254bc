#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gigaqbx {

namespace detail {
inline std::atomic<int>& thread_count_storage() {
  static std::atomic<int> count{[] {
    if (const char* env = std::getenv("GIGAQBX_THREADS")) {
      const int n = std::atoi(env);
      if (n > 0) return n;
    }
    return 1;
  }()};
  return count;
}
}  // namespace detail

/// Worker count used by parallel loops. Defaults to GIGAQBX_THREADS or 1.
inline int num_threads() { return detail::thread_count_storage().load(); }
inline void set_num_threads(int n) { detail::thread_count_storage().store(std::max(1, n)); }

/// Runs f(i) for i in [0, n) on num_threads() workers with static contiguous
/// chunks. Each index is handled by exactly one worker; the first exception
/// thrown by any worker is rethrown on the caller.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace gigaqbx
