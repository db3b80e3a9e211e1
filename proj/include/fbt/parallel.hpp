#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fbt {

inline std::atomic<int>& thread_setting() {
  static std::atomic<int> threads{1};
  return threads;
}

inline void set_threads(int n) { thread_setting().store(std::max(1, n)); }
inline int threads() { return thread_setting().load(); }

namespace detail {
/// Set on worker bodies so nested parallel_for calls run inline.
inline bool& in_parallel() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/**
 * @brief Runs f(i) for i in [0, count) on the configured number of threads.
 *
 * Each index must write only to its own output slot; callers combine the slots
 * in index order afterwards, so results do not depend on the thread count.
 * The first exception thrown by any index is rethrown on the calling thread.
 * Calls made from inside another parallel_for run serially.
 */
template <class F>
void parallel_for(std::size_t count, F&& f) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads()), count);
  if (workers <= 1 || detail::in_parallel()) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    const bool outer = detail::in_parallel();
    detail::in_parallel() = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
    detail::in_parallel() = outer;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fbt
