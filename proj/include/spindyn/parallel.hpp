#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace spindyn {

// Worker cap: SPINDYN_THREADS if set, else hardware concurrency.
inline int thread_cap() {
  if (const char* env = std::getenv("SPINDYN_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Run fn(i) for i in [0, n).  Each index writes only to its own slots, so
// the result is identical for any worker count; reductions are done by the
// caller afterwards in index order.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  int workers = std::min<std::size_t>(thread_cap(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  // The lowest-index exception is rethrown, matching the serial order.
  std::mutex mu;
  std::exception_ptr eptr = nullptr;
  std::size_t eidx = n;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (i < eidx) {
            eidx = i;
            eptr = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (eptr) std::rethrow_exception(eptr);
}

} // namespace spindyn
