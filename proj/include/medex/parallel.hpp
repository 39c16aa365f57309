#ifndef MEDEX_PARALLEL_HPP
#define MEDEX_PARALLEL_HPP

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace medex::util {

// Process-wide worker cap, set once from the CLI (--threads). 0 means "use
// hardware concurrency". Work units must be written so that results do not
// depend on this value.
inline int& max_threads_ref() {
  static int value = 0;
  return value;
}

inline void set_max_threads(int n) { max_threads_ref() = n < 0 ? 0 : n; }

inline int resolved_threads(int requested) {
  int n = requested > 0 ? requested : max_threads_ref();
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, n);
}

// Runs body(i) for i in [0, count). Each call must touch only its own output
// slot; iterations are distributed by index stripe so results are identical
// for any worker count. The first exception thrown by any iteration is
// rethrown on the caller's thread.
inline void parallel_for(int count, const std::function<void(int)>& body,
                         int requested_threads = 0) {
  if (count <= 0) return;
  int workers = std::min(resolved_threads(requested_threads), count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace medex::util

#endif
