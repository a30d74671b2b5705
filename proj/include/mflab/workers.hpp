#pragma once
// Bounded worker pool over indexed tasks.  Results land in index order, so
// the merge is independent of scheduling.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

namespace mflab::workers {

/// Runs task(i) for i in [0, n) on up to `workers` threads.  Tasks are handed
/// out in `order` (default 0..n-1); the exception of the lowest failing index
/// is rethrown after all threads join.
template <class R>
std::vector<R> run_indexed(std::size_t n, int workers, const std::function<R(std::size_t)>& task,
                           std::vector<std::size_t> order = {}) {
  if (order.empty()) {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
  }
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t k = next++; k < order.size(); k = next++) {
      const std::size_t i = order[k];
      try {
        slots[i].emplace(task(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(std::max(1, workers), std::max<std::size_t>(1, n));
  if (threads <= 1) {
    drain();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(drain);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace mflab::workers
