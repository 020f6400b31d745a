#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

namespace swlab {

// Worker count: `requested` if positive, else $SWLAB_JOBS, else the number of
// hardware threads (at least 1).
int resolve_jobs(int requested);

// Runs fn(i) for i in [0, count) on up to `jobs` threads and returns the
// results indexed by i. Results never depend on scheduling as long as fn(i)
// only uses state derived from i.
template <typename Fn>
auto run_replicas(std::int64_t count, int jobs, Fn&& fn) {
  using Result = std::invoke_result_t<Fn&, std::int64_t>;
  std::vector<Result> results(static_cast<std::size_t>(count));
  const int workers = static_cast<int>(
      std::max<std::int64_t>(1, std::min<std::int64_t>(resolve_jobs(jobs), count)));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < count; ++i) results[static_cast<std::size_t>(i)] = fn(i);
    return results;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::int64_t i = next.fetch_add(1);
          if (i >= count) return;
          try {
            results[static_cast<std::size_t>(i)] = fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next.store(count);
            return;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace swlab
