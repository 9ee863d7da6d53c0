#ifndef SCREENLAB_PARALLEL_HPP
#define SCREENLAB_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace screenlab {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}
inline thread_local bool in_parallel_region = false;
}  // namespace detail

/// Number of worker threads used by parallel_for. 0 selects the number of
/// logical cores.
inline void set_num_threads(int n) { detail::thread_setting() = std::max(0, n); }

inline int num_threads() {
  int n = detail::thread_setting();
  if (n > 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n). Each index must write only to its own
/// output slot; callers reduce afterwards in index order so results do not
/// depend on the thread count. Nested calls run serially.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(num_threads()));
  if (workers <= 1 || detail::in_parallel_region) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    detail::in_parallel_region = true;
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
    detail::in_parallel_region = false;
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace screenlab

#endif  // SCREENLAB_PARALLEL_HPP
