#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace isq {

/// Process-wide cap on worker threads; 0 means hardware concurrency.
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}

/// True on worker threads; nested parallel loops then run serially.
inline bool& inside_worker() {
  thread_local bool flag = false;
  return flag;
}

inline unsigned worker_count(std::size_t work_items) {
  if (inside_worker()) return 1;
  unsigned n = thread_cap().load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(work_items, 1)));
}

/// Runs body(i) for i in [0, n) on contiguous blocks, one block per worker.
/// The first exception thrown by any worker is rethrown on the caller.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers = worker_count(n);
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex guard;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers;
    const std::size_t hi = n * (w + 1) / workers;
    pool.emplace_back([&, lo, hi] {
      inside_worker() = true;
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// out[i] = f(in[i]) in parallel, output order follows input order.
template <class T, class F>
auto parallel_map(const std::vector<T>& in, F&& f) {
  using R = decltype(f(in.front()));
  std::vector<R> out(in.size());
  parallel_for(in.size(), [&](std::size_t i) { out[i] = f(in[i]); });
  return out;
}

}  // namespace isq
