#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bernrand::detail {

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0)
    return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n_tasks) on up to `threads` workers. Tasks must
/// write only to their own slots. If tasks throw, the exception of the lowest
/// failing index is rethrown, so the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n_tasks, unsigned threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (threads <= 1 || n_tasks <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i)
      fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n_tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_tasks; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto count = std::min<std::size_t>(threads, n_tasks);
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t)
      pool.emplace_back(worker);
  }
  for (auto& error : errors)
    if (error)
      std::rethrow_exception(error);
}

} // namespace bernrand::detail
